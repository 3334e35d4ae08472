//! The orbit-wise Brownian motion `X_t = φ_{W_t}(Λ)` and its transition
//! semigroup `T_t f(Λ) = ∫ p(t,s) f(φ_s Λ) ds`, by quadrature and by
//! Monte Carlo; Koopman operators; strong-Feller and Itô experiments.
//!
//! Quadrature weights are renormalized (`Σ w f / Σ w`), which makes
//! `T_t 1 = 1` hold bit for bit. Monte Carlo draws come from ChaCha
//! streams indexed by chunk, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{input, Error, Result};
use crate::hull::{orbit_displacement, HullFunction, HullPoint, PlanePoint};
use crate::par;
use crate::quad::{gauss_hermite_normal, gauss_legendre};
use crate::sets::{Address, Tiling};

pub(crate) const MC_CHUNK: usize = 4096;

/// Gaussian density `(2πt)^{-d/2} exp(−|s|²/2t)`.
pub fn heat_kernel(t: f64, s: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return input("heat kernel time must be positive");
    }
    let r2: f64 = s.iter().map(|x| x * x).sum();
    let d = s.len() as i32;
    Ok((2.0 * std::f64::consts::PI * t).powf(-0.5 * d as f64) * (-r2 / (2.0 * t)).exp())
}

/// Quadrature rule for the Gaussian integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rule {
    /// Gauss–Hermite with the given number of nodes.
    Hermite { order: usize },
    /// Gauss–Legendre panels on `[-c√t, c√t]`, split at tile boundaries,
    /// panel width at most `panel·√t` and 0.25.
    Composite { c: f64, panel: f64, order: usize },
}

impl Default for Rule {
    fn default() -> Self {
        Rule::Composite {
            c: 8.0,
            panel: 0.25,
            order: 8,
        }
    }
}

impl Rule {
    /// Gaussian mass outside the truncation window.
    pub fn truncation_error(&self) -> f64 {
        match self {
            Rule::Hermite { .. } => 0.0,
            Rule::Composite { c, .. } => statrs::function::erf::erfc(c / std::f64::consts::SQRT_2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemigroupEstimate {
    pub value: f64,
    pub error: f64,
    pub method: Method,
    pub n: usize,
}

/// Tile boundaries of the orbit of `base`, relative to `base`, in `[lo, hi]`.
fn breaks(tiling: &Tiling, base: &HullPoint, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let s = base.shift();
    Ok(tiling
        .expand(&base.address, lo + s, hi + s, 0)?
        .iter()
        .map(|t| t.x - s)
        .filter(|&x| x > lo && x < hi)
        .collect())
}

/// Nodes `s_k` and unnormalized weights for `∫ p(t, s − center) g(s) ds`.
fn nodes(rule: &Rule, t: f64, center: f64, cuts: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let sd = t.sqrt();
    match *rule {
        Rule::Hermite { order } => {
            let (x, w) = gauss_hermite_normal(order);
            (x.iter().map(|z| center + sd * z).collect(), w)
        }
        Rule::Composite { c, panel, order } => {
            let (gx, gw) = gauss_legendre(order);
            let (lo, hi) = (center - c * sd, center + c * sd);
            let h = (panel * sd).min(0.25);
            let a = cuts.partition_point(|&x| x <= lo);
            let b = cuts.partition_point(|&x| x < hi);
            let mut edges = Vec::with_capacity(b - a + 2);
            edges.push(lo);
            edges.extend_from_slice(&cuts[a..b]);
            edges.push(hi);
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            for e in edges.windows(2) {
                let len = e[1] - e[0];
                if len <= 0.0 {
                    continue;
                }
                let m = (len / h).ceil().max(1.0) as usize;
                let step = len / m as f64;
                for p in 0..m {
                    let l = e[0] + p as f64 * step;
                    for (x, w) in gx.iter().zip(&gw) {
                        let s = l + 0.5 * step * (x + 1.0);
                        let u = s - center;
                        xs.push(s);
                        ws.push(0.5 * step * w * (-u * u / (2.0 * t)).exp());
                    }
                }
            }
            (xs, ws)
        }
    }
}

fn needs_cuts(rule: &Rule) -> Option<f64> {
    match rule {
        Rule::Composite { c, .. } => Some(*c),
        Rule::Hermite { .. } => None,
    }
}

/// `T_t f` at the orbit points `φ_{s_j}(base)`, by quadrature.
pub fn semigroup_along(
    tiling: &Tiling,
    f: &dyn HullFunction,
    t: f64,
    rule: &Rule,
    base: &HullPoint,
    shifts: &[f64],
) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return input("semigroup time must be positive");
    }
    if shifts.is_empty() {
        return Ok(Vec::new());
    }
    let cuts = match needs_cuts(rule) {
        Some(c) => {
            let lo = shifts.iter().cloned().fold(f64::INFINITY, f64::min) - c * t.sqrt() - 1.0;
            let hi = shifts.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + c * t.sqrt() + 1.0;
            let mut cuts = breaks(tiling, base, lo, hi)?;
            cuts.extend(f.kinks(tiling, base, lo, hi)?);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
            cuts
        }
        None => Vec::new(),
    };
    let mut all = Vec::new();
    let mut spans = Vec::with_capacity(shifts.len());
    let mut weights = Vec::new();
    for &s in shifts {
        let (x, w) = nodes(rule, t, s, &cuts);
        spans.push((all.len(), x.len()));
        all.extend(x);
        weights.extend(w);
    }
    let vals = f.along(tiling, base, &all)?;
    Ok(spans
        .iter()
        .map(|&(a, n)| {
            let num: f64 = (a..a + n).map(|k| vals[k] * weights[k]).sum();
            let den: f64 = weights[a..a + n].iter().sum();
            num / den
        })
        .collect())
}

pub fn semigroup_apply_quadrature(
    tiling: &Tiling,
    f: &dyn HullFunction,
    t: f64,
    p: &HullPoint,
    rule: &Rule,
) -> Result<SemigroupEstimate> {
    let v = semigroup_along(tiling, f, t, rule, p, &[0.0])?[0];
    let n = match *rule {
        Rule::Hermite { order } => order,
        Rule::Composite { .. } => 0,
    };
    Ok(SemigroupEstimate {
        value: v,
        error: rule.truncation_error(),
        method: Method::Quadrature,
        n,
    })
}

/// `T_t f` as a hull function, so semigroups can be nested.
pub struct SemigroupImage<'a> {
    pub f: &'a dyn HullFunction,
    pub t: f64,
    pub rule: Rule,
}

impl HullFunction for SemigroupImage<'_> {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        semigroup_along(tiling, self.f, self.t, &self.rule, base, shifts)
    }
}

/// Koopman operator `(U_τ f)(Λ) = f(φ_τ Λ)`.
pub struct Koopman<'a> {
    pub f: &'a dyn HullFunction,
    pub tau: f64,
}

impl HullFunction for Koopman<'_> {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        let moved: Vec<f64> = shifts.iter().map(|s| s + self.tau).collect();
        self.f.along(tiling, base, &moved)
    }

    fn kinks(&self, tiling: &Tiling, base: &HullPoint, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let k = self.f.kinks(tiling, base, lo + self.tau, hi + self.tau)?;
        Ok(k.into_iter().map(|x| x - self.tau).collect())
    }
}

/// Largest `|U_τ T_t f − T_t U_τ f|` over the given points.
pub fn koopman_commutation_residual(
    tiling: &Tiling,
    f: &dyn HullFunction,
    t: f64,
    tau: f64,
    rule: &Rule,
    points: &[HullPoint],
) -> Result<f64> {
    let tf = SemigroupImage { f, t, rule: *rule };
    let ut = Koopman { f: &tf, tau };
    let uf = Koopman { f, tau };
    let tu = SemigroupImage { f: &uf, t, rule: *rule };
    let res: Vec<Result<f64>> = par::map(points, |p| Ok((ut.at(tiling, p)? - tu.at(tiling, p)?).abs()));
    let mut worst: f64 = 0.0;
    for r in res {
        worst = worst.max(r?);
    }
    Ok(worst)
}

pub(crate) fn chunk_normals(seed: u64, chunk: usize, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Mean of `f(φ_{W_t} Λ)` over `n` seeded draws, with standard error.
pub fn semigroup_apply_mc(
    tiling: &Tiling,
    f: &dyn HullFunction,
    t: f64,
    p: &HullPoint,
    n: usize,
    seed: u64,
) -> Result<SemigroupEstimate> {
    if !(t > 0.0) {
        return input("semigroup time must be positive");
    }
    if n == 0 {
        return input("at least one sample is required");
    }
    let sd = t.sqrt();
    let chunks = n.div_ceil(MC_CHUNK);
    let parts: Vec<Result<(f64, f64)>> = par::map_range(chunks, |c| {
        let len = MC_CHUNK.min(n - c * MC_CHUNK);
        let shifts: Vec<f64> = chunk_normals(seed, c, len).iter().map(|z| sd * z).collect();
        let v = f.along(tiling, p, &shifts)?;
        Ok((v.iter().sum(), v.iter().map(|x| x * x).sum()))
    });
    let (mut s1, mut s2) = (0.0, 0.0);
    for part in parts {
        let (a, b) = part?;
        s1 += a;
        s2 += b;
    }
    let mean = s1 / n as f64;
    let var = if n > 1 {
        ((s2 - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(SemigroupEstimate {
        value: mean,
        error: (var / n as f64).sqrt(),
        method: Method::MonteCarlo,
        n,
    })
}

/// A sampled path `φ_{W_{t_k}}(Λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub seed: u64,
    pub times: Vec<f64>,
    pub states: Vec<HullPoint>,
}

impl PathSample {
    pub fn displacements(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.drift - self.states[0].drift).collect()
    }
}

fn brownian(times: &[f64], normals: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(times.len());
    let mut x = 0.0;
    w.push(0.0);
    for k in 1..times.len() {
        x += (times[k] - times[k - 1]).sqrt() * normals[k - 1];
        w.push(x);
    }
    w
}

pub fn sample_path(p: &HullPoint, times: &[f64], seed: u64) -> Result<PathSample> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return input("time grid must start at 0 and increase strictly");
    }
    let z = chunk_normals(seed, 0, times.len() - 1);
    let w = brownian(times, &z);
    Ok(PathSample {
        seed,
        times: times.to_vec(),
        states: w.iter().map(|&x| p.translate(x)).collect(),
    })
}

/// Terminal displacements of `n` independent paths at time `t`.
pub fn path_endpoints(t: f64, n: usize, seed: u64) -> Vec<f64> {
    let chunks = n.div_ceil(MC_CHUNK);
    let parts = par::map_range(chunks, |c| {
        let len = MC_CHUNK.min(n - c * MC_CHUNK);
        chunk_normals(seed, c, len)
            .into_iter()
            .map(|z| t.sqrt() * z)
            .collect::<Vec<f64>>()
    });
    parts.into_iter().flatten().collect()
}

/// `max_k |T_t f_k(Λ) − ∫ f_k dμ|`.
pub fn equilibrium_distance(
    tiling: &Tiling,
    p: &HullPoint,
    t: f64,
    tests: &[(&dyn HullFunction, f64)],
    rule: &Rule,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (f, mean) in tests {
        let v = semigroup_apply_quadrature(tiling, *f, t, p, rule)?.value;
        worst = worst.max((v - mean).abs());
    }
    Ok(worst)
}

/// `p(t, h_{Λ1}^{-1}(Λ2))` on a common orbit, else 0.
pub fn orbit_heat_kernel(tiling: &Tiling, t: f64, p1: &HullPoint, p2: &HullPoint) -> Result<f64> {
    match orbit_displacement(tiling, p1, p2) {
        None => {
            if !(t > 0.0) {
                return input("heat kernel time must be positive");
            }
            Ok(0.0)
        }
        Some((g, f)) => {
            let x = g.to_f64() + f;
            let x = match tiling {
                // on a torus the orbit map is the covering map; take the
                // nearest lift
                Tiling::Periodic(per) => {
                    let l = per.spacing.to_f64();
                    x - (x / l).round() * l
                }
                _ => x,
            };
            heat_kernel(t, &[x])
        }
    }
}

/// Planar version on a product hull.
pub fn orbit_heat_kernel_plane(tilings: &[Tiling; 2], t: f64, p1: &PlanePoint, p2: &PlanePoint) -> Result<f64> {
    let mut s = [0.0; 2];
    for k in 0..2 {
        match orbit_displacement(&tilings[k], &p1.0[k], &p2.0[k]) {
            None => return Ok(0.0),
            Some((g, f)) => s[k] = g.to_f64() + f,
        }
    }
    heat_kernel(t, &s)
}

/// Indicator of a single orbit.
pub struct OrbitIndicator {
    pub address: Address,
}

impl HullFunction for OrbitIndicator {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        let v = if tiling.orbit_displacement(&base.address, &self.address).is_some() {
            1.0
        } else {
            0.0
        };
        Ok(vec![v; shifts.len()])
    }
}

fn agreement_depth(a: &Address, b: &Address, cap: usize) -> usize {
    (0..cap).find(|&k| a.step(k) != b.step(k)).unwrap_or(cap)
}

/// `1_E(Λ') 1_{B'}(t)` on the chart around the level-`level` cell of a
/// reference point `Λ*`, where `E` holds the transversal points agreeing
/// with `Λ*` through an odd number of steps (at least `level + 1`). The
/// reference point lies on the boundary of `E`.
pub struct BoundaryProbe {
    pub star: Address,
    pub level: usize,
    pub inner: f64,
    pub cap: usize,
}

impl BoundaryProbe {
    pub fn in_e(&self, tiling: &Tiling, a: &Address) -> bool {
        let _ = tiling;
        let d = agreement_depth(a, &self.star, self.cap);
        d > self.level && d < self.cap && d % 2 == 1
    }
}

impl HullFunction for BoundaryProbe {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        if shifts.is_empty() {
            return Ok(Vec::new());
        }
        let s0 = base.shift();
        let lo = shifts.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = shifts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tiles = tiling.expand(&base.address, lo + s0 - 1.0, hi + s0 + 1.0, 0)?;
        let mut centers = Vec::new();
        for t in &tiles {
            let x = t.x - s0;
            if x < lo - self.inner || x > hi + self.inner {
                continue;
            }
            let a = tiling.reroot(&base.address, t.start)?;
            if self.in_e(tiling, &a) {
                centers.push(x);
            }
        }
        Ok(shifts
            .iter()
            .map(|&s| {
                let k = centers.partition_point(|&c| c < s - self.inner);
                if k < centers.len() && (centers[k] - s).abs() < self.inner {
                    1.0
                } else {
                    0.0
                }
            })
            .collect())
    }
}

/// Result of the strong-Feller probe.
#[derive(Clone, Debug, PartialEq)]
pub struct StrongFellerWitness {
    pub t: f64,
    /// ρ-distance between the two evaluation points.
    pub delta: f64,
    pub inside: f64,
    pub outside: f64,
}

/// Evaluates `T_t(1_E ⊗ 1_{B'})` at a point of `E × B'` and at a ρ-close
/// point of `E^c × B'`, halving `t` until inside > 1/3 and outside < 1/9.
pub fn strong_feller_probe(
    tiling: &Tiling,
    probe: &BoundaryProbe,
    depth: usize,
    t_start: f64,
    rule: &Rule,
) -> Result<StrongFellerWitness> {
    let s = match tiling {
        Tiling::Substitution(s) => s,
        _ => return Err(Error::Unsupported("the probe needs a supertile hierarchy".into())),
    };
    if depth <= probe.level || depth + 2 >= probe.cap {
        return input("probe depth must exceed the chart level and stay below the cap");
    }
    // points agreeing with Λ* through an odd and an even number of steps
    let mut a_in = None;
    let mut a_out = None;
    for k in depth..probe.cap - 2 {
        if let Some(a) = diverge_after(s, &probe.star, k) {
            let slot = if k % 2 == 1 { &mut a_in } else { &mut a_out };
            if slot.is_none() {
                *slot = Some(a);
            }
        }
        if a_in.is_some() && a_out.is_some() {
            break;
        }
    }
    let (Some(a_in), Some(a_out)) = (a_in, a_out) else {
        return Err(Error::Diagnostic("could not place points on both sides of E".into()));
    };
    if !probe.in_e(tiling, &a_in) || probe.in_e(tiling, &a_out) {
        return Err(Error::Diagnostic("could not place points on both sides of E".into()));
    }
    let p_in = HullPoint::transversal(a_in);
    let p_out = HullPoint::transversal(a_out);
    let delta = crate::hull::hull_metric(tiling, &p_in, tiling, &p_out, 1e-9)?;
    let mut t = t_start;
    for _ in 0..60 {
        let inside = semigroup_apply_quadrature(tiling, probe, t, &p_in, rule)?.value;
        let outside = semigroup_apply_quadrature(tiling, probe, t, &p_out, rule)?.value;
        if inside > 1.0 / 3.0 && outside < 1.0 / 9.0 {
            return Ok(StrongFellerWitness {
                t,
                delta,
                inside,
                outside,
            });
        }
        t *= 0.5;
    }
    Err(Error::Diagnostic("no time found separating the two points".into()))
}

/// A transversal point sharing exactly the first `k` steps with `star`
/// and following it again from step `k + 1`, if the hierarchy allows one.
fn diverge_after(s: &crate::sets::Substitution, star: &Address, k: usize) -> Option<Address> {
    let parent = star.step(k + 1).letter;
    let here = star.step(k);
    let img = &s.images()[parent as usize];
    for (pos, &x) in img.iter().enumerate() {
        let cand = crate::sets::Step {
            letter: x,
            pos: pos as u16,
        };
        if cand == here {
            continue;
        }
        if k > 0 {
            // step k-1 must still fit inside the new letter
            let below = star.step(k - 1);
            if s.images()[x as usize].get(below.pos as usize) != Some(&below.letter) {
                continue;
            }
        }
        let mut prefix: Vec<_> = (0..k).map(|j| star.step(j)).collect();
        prefix.push(cand);
        let plen = star.prefix.len();
        let tlen = star.tail.len();
        let mut end = (k + 1).max(plen);
        while !(end - plen).is_multiple_of(tlen) {
            end += 1;
        }
        prefix.extend((k + 1..end).map(|j| star.step(j)));
        return Some(
            Address {
                prefix,
                tail: star.tail.clone(),
            }
            .canonical(),
        );
    }
    None
}

/// Itô check `E f(X_t) − f(Λ) − ½ ∫_0^t E Δf(X_s) ds`.
#[derive(Clone, Debug, PartialEq)]
pub struct ItoResidual {
    /// Left-point Euler sum with step `dt`.
    pub coarse: f64,
    /// Same paths with step `dt/2`.
    pub fine: f64,
    /// Richardson combination `2·fine − coarse`.
    pub extrapolated: f64,
    /// Standard error of the extrapolated residual.
    pub sigma: f64,
    pub n: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn ito_residual(
    tiling: &Tiling,
    f: &dyn HullFunction,
    laplacian: &dyn HullFunction,
    p: &HullPoint,
    t: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<ItoResidual> {
    if !(t > 0.0 && dt > 0.0 && dt <= t) || n < 2 {
        return input("ito residual needs 0 < dt <= t and at least two paths");
    }
    let steps = (t / dt).round() as usize;
    if ((steps as f64) * dt - t).abs() > 1e-9 * t {
        return input("t must be a multiple of dt");
    }
    let fine_steps = 2 * steps;
    let h = t / fine_steps as f64;
    let f0 = f.at(tiling, p)?;
    let samples: Vec<Result<(f64, f64, f64)>> = par::map_range(n, |k| {
        let z = chunk_normals(seed, k, fine_steps);
        let mut w = Vec::with_capacity(fine_steps + 1);
        let mut x = 0.0;
        w.push(0.0);
        for zi in &z {
            x += h.sqrt() * zi;
            w.push(x);
        }
        let end = f.along(tiling, p, &[w[fine_steps]])?[0];
        let lap = laplacian.along(tiling, p, &w[..fine_steps])?;
        let fine_int: f64 = lap.iter().sum::<f64>() * h;
        let coarse_int: f64 = lap.iter().step_by(2).sum::<f64>() * 2.0 * h;
        let yc = end - f0 - 0.5 * coarse_int;
        let yf = end - f0 - 0.5 * fine_int;
        Ok((yc, yf, 2.0 * yf - yc))
    });
    let mut vals = Vec::with_capacity(n);
    for s in samples {
        vals.push(s?);
    }
    let mean = |g: &dyn Fn(&(f64, f64, f64)) -> f64| vals.iter().map(g).sum::<f64>() / n as f64;
    let coarse = mean(&|v| v.0);
    let fine = mean(&|v| v.1);
    let extrapolated = mean(&|v| v.2);
    let var = vals.iter().map(|v| (v.2 - extrapolated).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Ok(ItoResidual {
        coarse,
        fine,
        extrapolated,
        sigma: (var / n as f64).sqrt(),
        n,
    })
}

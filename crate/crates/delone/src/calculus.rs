//! Transversally locally constant (tlc) functions and their orbit calculus.
//!
//! A [`TlcFunction`] of level `i` assigns to every level-`i` transversal cell
//! a closed-form profile. The profile is read either in tile coordinates
//! (`u ∈ [0, len)` from the start of the tile) or in a ball around the
//! point (`|u| < radius`, radius at most half the shortest tile, so balls
//! never overlap). Profiles are sums of polynomial and trigonometric terms,
//! which makes every derivative exact.
//!
//! Integrals against μ are computed by disintegration: μ is `1/ℓ̄` times
//! the transversal measure of consecutive cell pairs times Lebesgue
//! measure on the tile, and each piece is integrated by Gauss–Legendre.
//! Knowing the successor cell lets ball profiles spill into the tile on
//! their left.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::hull::{CylinderSet, HullFunction, HullPoint, PlanePoint};
use crate::quad::gauss_legendre;
use crate::sets::{Address, Tiling};

/// One term of a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Term {
    /// `Σ c_k u^k`.
    Poly { coeffs: Vec<f64> },
    /// `amp · R_q(freq·u + phase)` with `R_0 = cos`, `R_1 = −sin`,
    /// `R_2 = −cos`, `R_3 = sin`; differentiation bumps `q`.
    Trig {
        amp: f64,
        freq: f64,
        phase: f64,
        #[serde(default)]
        quarter: u8,
    },
}

impl Term {
    pub fn constant(c: f64) -> Self {
        Term::Poly { coeffs: vec![c] }
    }

    pub fn cos(amp: f64, freq: f64, phase: f64) -> Self {
        Term::Trig {
            amp,
            freq,
            phase,
            quarter: 0,
        }
    }

    pub fn sin(amp: f64, freq: f64, phase: f64) -> Self {
        Term::Trig {
            amp,
            freq,
            phase,
            quarter: 3,
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            Term::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c),
            Term::Trig {
                amp,
                freq,
                phase,
                quarter,
            } => {
                let th = freq * u + phase;
                amp * match quarter % 4 {
                    0 => th.cos(),
                    1 => -th.sin(),
                    2 => -th.cos(),
                    _ => th.sin(),
                }
            }
        }
    }

    pub fn derivative(&self) -> Term {
        match self {
            Term::Poly { coeffs } => Term::Poly {
                coeffs: coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect(),
            },
            Term::Trig {
                amp,
                freq,
                phase,
                quarter,
            } => Term::Trig {
                amp: amp * freq,
                freq: *freq,
                phase: *phase,
                quarter: (quarter + 1) % 4,
            },
        }
    }

    fn scaled(&self, s: f64) -> Term {
        match self {
            Term::Poly { coeffs } => Term::Poly {
                coeffs: coeffs.iter().map(|c| c * s).collect(),
            },
            Term::Trig {
                amp,
                freq,
                phase,
                quarter,
            } => Term::Trig {
                amp: amp * s,
                freq: *freq,
                phase: *phase,
                quarter: *quarter,
            },
        }
    }
}

/// `cos⁴(π(u − c)/2r)`: a bump on `(c − r, c + r)` vanishing to fourth order
/// at the ends, so three derivatives are continuous.
pub fn cos4_bump(center: f64, radius: f64) -> Vec<Term> {
    let w = PI / radius;
    vec![
        Term::constant(0.375),
        Term::cos(0.5, w, -w * center),
        Term::cos(0.125, 2.0 * w, -2.0 * w * center),
    ]
}

/// Profile terms on the half-open interval `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<Term>,
}

impl Piece {
    fn value(&self, u: f64) -> f64 {
        if u >= self.lo && u < self.hi {
            self.terms.iter().map(|t| t.value(u)).sum()
        } else {
            0.0
        }
    }
}

/// Sum of pieces; pieces may overlap.
pub type Profile = Vec<Piece>;

fn profile_value(p: &Profile, u: f64) -> f64 {
    p.iter().map(|q| q.value(u)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Support {
    /// Profiles live on `[0, len)` of the tile.
    Tile,
    /// Profiles live on `(−radius, radius)` around the point.
    Ball { radius: f64 },
}

/// A tlc function: one profile per transversal cell of its level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlcFunction {
    pub level: usize,
    pub support: Support,
    pub profiles: Vec<Profile>,
    /// Number of continuous orbit derivatives.
    pub smoothness: usize,
}

impl TlcFunction {
    /// Checks the profile table against the tiling.
    pub fn new(
        tiling: &Tiling,
        level: usize,
        support: Support,
        profiles: Vec<Profile>,
        smoothness: usize,
    ) -> Result<Self> {
        let cells = tiling.cells(level)?;
        if profiles.len() != cells.len() {
            return input(format!(
                "level {level} has {} cells but {} profiles were given",
                cells.len(),
                profiles.len()
            ));
        }
        let r = tiling.min_tile_length().to_f64();
        for (c, prof) in cells.iter().zip(&profiles) {
            let (lo, hi) = match support {
                Support::Tile => (0.0, tiling.letter_length(c.letter).to_f64()),
                Support::Ball { radius } => {
                    if !(radius > 0.0) || radius > 0.5 * r {
                        return input(format!("ball radius must lie in (0, {}]", 0.5 * r));
                    }
                    (-radius, radius)
                }
            };
            for p in prof {
                if !(p.lo < p.hi) || p.lo < lo - 1e-12 || p.hi > hi + 1e-12 {
                    return input(format!(
                        "profile piece [{}, {}) leaves its domain [{lo}, {hi})",
                        p.lo, p.hi
                    ));
                }
            }
        }
        Ok(TlcFunction {
            level,
            support,
            profiles,
            smoothness,
        })
    }

    pub fn constant(tiling: &Tiling, c: f64) -> Result<Self> {
        Self::on_tiles(tiling, 0, |_| vec![Term::constant(c)], usize::MAX)
    }

    /// Whole-tile profiles given per level-`i` cell.
    pub fn on_tiles(
        tiling: &Tiling,
        level: usize,
        terms: impl Fn(usize) -> Vec<Term>,
        smoothness: usize,
    ) -> Result<Self> {
        let cells = tiling.cells(level)?;
        let profiles = cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                vec![Piece {
                    lo: 0.0,
                    hi: tiling.letter_length(c.letter).to_f64(),
                    terms: terms(k),
                }]
            })
            .collect();
        Self::new(tiling, level, Support::Tile, profiles, smoothness)
    }

    /// Indicator of the tiles of one letter (not continuous).
    pub fn letter_indicator(tiling: &Tiling, letter: char) -> Result<Self> {
        let l = tiling.letter_index(letter)?;
        let cells = tiling.cells(0)?;
        Self::on_tiles(
            tiling,
            0,
            |k| {
                if cells[k].letter == l {
                    vec![Term::constant(1.0)]
                } else {
                    Vec::new()
                }
            },
            0,
        )
    }

    pub fn is_zero(&self) -> bool {
        self.profiles.iter().flatten().flat_map(|q| &q.terms).all(|t| match t {
            Term::Poly { coeffs } => coeffs.iter().all(|&c| c == 0.0),
            Term::Trig { amp, .. } => *amp == 0.0,
        })
    }

    /// `D^k f`, exact.
    pub fn derivative(&self, order: usize) -> Result<Self> {
        if order > self.smoothness {
            return input(format!(
                "derivative of order {order} needs smoothness {order}, have {}",
                self.smoothness
            ));
        }
        let mut out = self.clone();
        for _ in 0..order {
            for prof in &mut out.profiles {
                for piece in prof.iter_mut() {
                    piece.terms = piece.terms.iter().map(Term::derivative).collect();
                }
            }
        }
        out.smoothness = self.smoothness.saturating_sub(order);
        Ok(out)
    }

    /// The same function written at a finer level.
    pub fn lift(&self, tiling: &Tiling, level: usize) -> Result<Self> {
        if level < self.level {
            return input("cannot lift to a coarser level");
        }
        let map = ancestor_map(tiling, level, self.level)?;
        Ok(TlcFunction {
            level,
            support: self.support,
            profiles: map.iter().map(|&a| self.profiles[a as usize].clone()).collect(),
            smoothness: self.smoothness,
        })
    }

    /// `a·f + b·g`; the supports must agree.
    pub fn combine(tiling: &Tiling, a: f64, f: &Self, b: f64, g: &Self) -> Result<Self> {
        if f.support != g.support {
            return Err(Error::Unsupported("sums need a common support type".into()));
        }
        let level = f.level.max(g.level);
        let (f, g) = (f.lift(tiling, level)?, g.lift(tiling, level)?);
        let profiles = f
            .profiles
            .iter()
            .zip(&g.profiles)
            .map(|(p, q)| scale_profile(p, a).into_iter().chain(scale_profile(q, b)).collect())
            .collect();
        Ok(TlcFunction {
            level,
            support: f.support,
            profiles,
            smoothness: f.smoothness.min(g.smoothness),
        })
    }

    /// Break points of the profile of `cell` (own tile) and of the next
    /// point's ball, in the tile coordinate of a tile of length `len`.
    fn breaks(&self, cell: usize, next: usize, len: f64, out: &mut Vec<f64>) {
        match self.support {
            Support::Tile => {
                for p in &self.profiles[cell] {
                    out.extend([p.lo, p.hi]);
                }
            }
            Support::Ball { .. } => {
                for p in &self.profiles[cell] {
                    out.extend([p.lo, p.hi]);
                }
                for p in &self.profiles[next] {
                    out.extend([p.lo + len, p.hi + len]);
                }
            }
        }
    }

    /// Value at tile coordinate `u ∈ [0, len)` of a tile with cell `cell`
    /// followed by a point of cell `next` (cells at this function's level).
    fn tile_value(&self, cell: usize, next: usize, len: f64, u: f64) -> f64 {
        match self.support {
            Support::Tile => profile_value(&self.profiles[cell], u),
            Support::Ball { .. } => {
                profile_value(&self.profiles[cell], u) + profile_value(&self.profiles[next], u - len)
            }
        }
    }
}

fn scale_profile(p: &Profile, s: f64) -> Profile {
    p.iter()
        .map(|q| Piece {
            lo: q.lo,
            hi: q.hi,
            terms: q.terms.iter().map(|t| t.scaled(s)).collect(),
        })
        .collect()
}

/// For each cell at level `from`, its ancestor cell at level `to ≤ from`.
pub fn ancestor_map(tiling: &Tiling, from: usize, to: usize) -> Result<Vec<u32>> {
    if to > from {
        return input("ancestor level must not exceed the cell level");
    }
    let mut map: Vec<u32> = (0..tiling.cell_count(from)? as u32).collect();
    for lvl in (to + 1..=from).rev() {
        let cells = tiling.cells(lvl)?;
        for m in &mut map {
            *m = cells[*m as usize].parent.unwrap_or(0);
        }
    }
    Ok(map)
}

impl HullFunction for TlcFunction {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        if shifts.is_empty() {
            return Ok(Vec::new());
        }
        let s = base.shift();
        let lo = shifts.iter().cloned().fold(f64::INFINITY, f64::min) + s;
        let hi = shifts.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + s;
        let tiles = tiling.expand(&base.address, lo - 1.0, hi + 1.0, self.level)?;
        Ok(shifts
            .iter()
            .map(|&x| {
                let x = x + s;
                let k = tiles.partition_point(|t| t.x <= x);
                if k == 0 {
                    return 0.0;
                }
                let t = &tiles[k - 1];
                let mut v = profile_value(&self.profiles[t.cell as usize], x - t.x);
                if let (Support::Ball { .. }, Some(n)) = (self.support, tiles.get(k)) {
                    v += profile_value(&self.profiles[n.cell as usize], x - n.x);
                }
                v
            })
            .collect())
    }

    fn kinks(&self, tiling: &Tiling, base: &HullPoint, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let s = base.shift();
        let tiles = tiling.expand(&base.address, lo + s - 1.0, hi + s + 1.0, self.level)?;
        let mut out = Vec::new();
        for t in &tiles {
            for p in &self.profiles[t.cell as usize] {
                for e in [t.x - s + p.lo, t.x - s + p.hi] {
                    if e >= lo && e <= hi {
                        out.push(e);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `∫_lo^hi g(φ_t Λ) dt` by Gauss–Legendre panels split at tile boundaries
/// and at every piece edge of the listed tlc functions, where `g` may be
/// non-smooth.
pub fn orbit_integral(
    tiling: &Tiling,
    g: &dyn HullFunction,
    kinks: &[&TlcFunction],
    start: &HullPoint,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let s = start.shift();
    let level = kinks.iter().map(|f| f.level).max().unwrap_or(0);
    let tiles = tiling.expand(&start.address, lo + s - 1.0, hi + s + 1.0, level)?;
    let maps: Vec<Vec<u32>> = kinks
        .iter()
        .map(|f| ancestor_map(tiling, level, f.level))
        .collect::<Result<_>>()?;
    let mut cuts = vec![lo, hi];
    for t in &tiles {
        let x = t.x - s;
        cuts.push(x);
        for (f, m) in kinks.iter().zip(&maps) {
            for p in &f.profiles[m[t.cell as usize] as usize] {
                cuts.extend([x + p.lo, x + p.hi]);
            }
        }
    }
    cuts.retain(|&x| x >= lo && x <= hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    let (gx, gw) = gauss_legendre(ORDER);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for e in cuts.windows(2) {
        let m = ((e[1] - e[0]) / PANEL).ceil().max(1.0) as usize;
        let step = (e[1] - e[0]) / m as f64;
        for p in 0..m {
            let a = e[0] + p as f64 * step;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(a + 0.5 * step * (x + 1.0));
                weights.push(0.5 * step * w);
            }
        }
    }
    let vals = g.along(tiling, start, &nodes)?;
    Ok(vals.iter().zip(&weights).map(|(v, w)| v * w).sum())
}

/// `h_Λ^* f`: the values `f(φ_t Λ)` at the given `t`.
pub fn pullback(tiling: &Tiling, f: &dyn HullFunction, base: &HullPoint, ts: &[f64]) -> Result<Vec<f64>> {
    f.along(tiling, base, ts)
}

/// `Σ_{q ∈ Λ} η(t − q)` computed straight from the point set.
pub fn dirac_comb_convolution(points: &[f64], eps: f64, eta: impl Fn(f64) -> f64, ts: &[f64]) -> Vec<f64> {
    ts.iter()
        .map(|&t| {
            points
                .iter()
                .filter(|&&q| (t - q).abs() < eps)
                .map(|&q| eta(t - q))
                .sum()
        })
        .collect()
}

/// Upper bound `min(1/ε₀, ε₀/2)` on comb radii, `ε₀` the packing radius.
pub fn comb_radius_bound(tiling: &Tiling) -> f64 {
    let e0 = 0.5 * tiling.min_tile_length().to_f64();
    (1.0 / e0).min(0.5 * e0)
}

/// Comb over the selected level-`i` cells: `h^* f = η` on `B_ε` around every
/// point whose cell is selected.
pub fn cell_comb(
    tiling: &Tiling,
    level: usize,
    cells: &[u32],
    eps: f64,
    eta: Vec<Term>,
    smoothness: usize,
) -> Result<TlcFunction> {
    if !(eps > 0.0) || eps >= comb_radius_bound(tiling) {
        return input(format!("comb radius must lie in (0, {})", comb_radius_bound(tiling)));
    }
    let n = tiling.cell_count(level)?;
    if let Some(c) = cells.iter().find(|&&c| c as usize >= n) {
        return input(format!("no cell {c} at level {level}"));
    }
    let profiles = (0..n as u32)
        .map(|c| {
            if cells.contains(&c) {
                vec![Piece {
                    lo: -eps,
                    hi: eps,
                    terms: eta.clone(),
                }]
            } else {
                Vec::new()
            }
        })
        .collect();
    TlcFunction::new(tiling, level, Support::Ball { radius: eps }, profiles, smoothness)
}

/// Comb over a cylinder `C_{Λ,ε}`: `η(t)` at `φ_t(Λ')` for `Λ' ∈ C_{Λ,ε}`
/// and `|t| < ε`, zero elsewhere.
#[derive(Clone, Debug)]
pub struct CylinderComb {
    pub cylinder: CylinderSet,
    pub eta: Vec<Term>,
    pub smoothness: usize,
}

pub fn comb_function(
    tiling: &Tiling,
    center: &Address,
    eps: f64,
    eta: Vec<Term>,
    smoothness: usize,
) -> Result<CylinderComb> {
    if !(eps > 0.0) || eps >= comb_radius_bound(tiling) {
        return input(format!("comb radius must lie in (0, {})", comb_radius_bound(tiling)));
    }
    Ok(CylinderComb {
        cylinder: CylinderSet::new(center.clone(), eps)?,
        eta,
        smoothness,
    })
}

impl HullFunction for CylinderComb {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        let eps = self.cylinder.epsilon;
        let s = base.shift();
        let mut out = Vec::with_capacity(shifts.len());
        for &x in shifts {
            let y = x + s;
            let near = tiling.points(&base.address, y - eps, y + eps)?;
            let mut v = 0.0;
            for q in near {
                let u = y - q.to_f64();
                if u.abs() < eps && self.cylinder.contains(tiling, &tiling.reroot(&base.address, q)?)? {
                    v += self.eta.iter().map(|t| t.value(u)).sum::<f64>();
                }
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// Composite Gauss–Legendre quadrature for `L²(μ)` on tlc functions.
#[derive(Clone, Debug)]
pub struct HullQuadrature {
    pub level: usize,
    nodes: Vec<(u32, u32, f64, f64)>,
    weights: Vec<f64>,
}

const PANEL: f64 = 0.05;
const ORDER: usize = 12;

impl HullQuadrature {
    /// Nodes fine enough for the given functions; the level is the finest
    /// among them.
    pub fn new(tiling: &Tiling, fs: &[&TlcFunction]) -> Result<Self> {
        let level = fs.iter().map(|f| f.level).max().unwrap_or(0);
        let pairs = tiling.cell_pairs(level)?;
        let cells = tiling.cells(level)?;
        let maps: Vec<Vec<u32>> = fs
            .iter()
            .map(|f| ancestor_map(tiling, level, f.level))
            .collect::<Result<_>>()?;
        let (gx, gw) = gauss_legendre(ORDER);
        let ell = tiling.mean_tile_length();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for &(c, n, w) in &pairs {
            let len = tiling.letter_length(cells[c as usize].letter).to_f64();
            let mut cuts = vec![0.0, len];
            for (f, m) in fs.iter().zip(&maps) {
                f.breaks(m[c as usize] as usize, m[n as usize] as usize, len, &mut cuts);
            }
            cuts.retain(|&x| (0.0..=len).contains(&x));
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            for e in cuts.windows(2) {
                let m = ((e[1] - e[0]) / PANEL).ceil().max(1.0) as usize;
                let step = (e[1] - e[0]) / m as f64;
                for p in 0..m {
                    let a = e[0] + p as f64 * step;
                    for (x, gwk) in gx.iter().zip(&gw) {
                        nodes.push((c, n, len, a + 0.5 * step * (x + 1.0)));
                        weights.push(w / ell * 0.5 * step * gwk);
                    }
                }
            }
        }
        Ok(HullQuadrature { level, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Values of `f` at the nodes.
    pub fn values(&self, tiling: &Tiling, f: &TlcFunction) -> Result<Vec<f64>> {
        if f.level > self.level {
            return input("function is finer than the quadrature");
        }
        let map = ancestor_map(tiling, self.level, f.level)?;
        Ok(self
            .nodes
            .iter()
            .map(|&(c, n, len, u)| f.tile_value(map[c as usize] as usize, map[n as usize] as usize, len, u))
            .collect())
    }

    pub fn integrate(&self, vals: &[f64]) -> f64 {
        vals.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn inner(&self, tiling: &Tiling, f: &TlcFunction, g: &TlcFunction) -> Result<f64> {
        let a = self.values(tiling, f)?;
        let b = self.values(tiling, g)?;
        Ok(a.iter().zip(&b).zip(&self.weights).map(|((x, y), w)| x * y * w).sum())
    }
}

/// `⟨f, g⟩_{L²(μ)}`.
pub fn l2_inner(tiling: &Tiling, f: &TlcFunction, g: &TlcFunction) -> Result<f64> {
    HullQuadrature::new(tiling, &[f, g])?.inner(tiling, f, g)
}

/// `(Σ_{j ≤ k} ‖D^j f‖²)^{1/2}`.
pub fn sobolev_norm(tiling: &Tiling, f: &TlcFunction, k: usize) -> Result<f64> {
    let q = HullQuadrature::new(tiling, &[f])?;
    let mut total = 0.0;
    for j in 0..=k {
        let d = f.derivative(j)?;
        let v = q.values(tiling, &d)?;
        total += q.integrate(&v.iter().map(|x| x * x).collect::<Vec<_>>());
    }
    Ok(total.sqrt())
}

/// `|⟨D^α f, g⟩ − (−1)^{|α|} ⟨f, D^α g⟩|`.
pub fn ibp_residual(tiling: &Tiling, f: &TlcFunction, g: &TlcFunction, order: usize) -> Result<f64> {
    let df = f.derivative(order)?;
    let dg = g.derivative(order)?;
    let q = HullQuadrature::new(tiling, &[f, g])?;
    let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok((q.inner(tiling, &df, g)? - sign * q.inner(tiling, f, &dg)?).abs())
}

/// `Φ_i f`: the ν-average of the profiles over the level-`L` cells inside
/// each level-`i` cell. Functions of level at most `i` are returned as is.
pub fn tlc_project(tiling: &Tiling, f: &TlcFunction, level: usize) -> Result<TlcFunction> {
    if level >= f.level {
        return Ok(f.clone());
    }
    let fine = tiling.cells(f.level)?;
    let coarse = tiling.cells(level)?;
    let map = ancestor_map(tiling, f.level, level)?;
    let mut profiles: Vec<Profile> = vec![Vec::new(); coarse.len()];
    for (k, prof) in f.profiles.iter().enumerate() {
        let a = map[k] as usize;
        profiles[a].extend(scale_profile(prof, fine[k].weight / coarse[a].weight));
    }
    Ok(TlcFunction {
        level,
        support: f.support,
        profiles,
        smoothness: f.smoothness,
    })
}

/// The orbit gradient; in one dimension a single component.
pub fn gradient(f: &TlcFunction) -> Result<Vec<TlcFunction>> {
    Ok(vec![f.derivative(1)?])
}

pub fn laplacian(f: &TlcFunction) -> Result<TlcFunction> {
    f.derivative(2)
}

/// `Γ(f, g) = ⟨∇f, ∇g⟩` as a hull function.
pub struct CarreDuChamp {
    df: TlcFunction,
    dg: TlcFunction,
}

pub fn carre_du_champ(f: &TlcFunction, g: &TlcFunction) -> Result<CarreDuChamp> {
    Ok(CarreDuChamp {
        df: f.derivative(1)?,
        dg: g.derivative(1)?,
    })
}

impl HullFunction for CarreDuChamp {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        let a = self.df.along(tiling, base, shifts)?;
        let b = self.dg.along(tiling, base, shifts)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x * y).collect())
    }
}

/// Sum of products `Σ c_k g_k(x) h_k(y)` on a product hull.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductFunction {
    pub terms: Vec<(f64, TlcFunction, TlcFunction)>,
}

impl ProductFunction {
    pub fn product(g: TlcFunction, h: TlcFunction) -> Self {
        ProductFunction {
            terms: vec![(1.0, g, h)],
        }
    }

    pub fn at(&self, tilings: [&Tiling; 2], p: &PlanePoint) -> Result<f64> {
        let mut v = 0.0;
        for (c, g, h) in &self.terms {
            v += c * g.at(tilings[0], &p.0[0])? * h.at(tilings[1], &p.0[1])?;
        }
        Ok(v)
    }

    /// `D^α` for a multi-index `α = (α_x, α_y)`.
    pub fn partial(&self, alpha: [usize; 2]) -> Result<Self> {
        Ok(ProductFunction {
            terms: self
                .terms
                .iter()
                .map(|(c, g, h)| Ok((*c, g.derivative(alpha[0])?, h.derivative(alpha[1])?)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn gradient(&self) -> Result<[ProductFunction; 2]> {
        Ok([self.partial([1, 0])?, self.partial([0, 1])?])
    }

    pub fn laplacian(&self) -> Result<Self> {
        let mut terms = self.partial([2, 0])?.terms;
        terms.extend(self.partial([0, 2])?.terms);
        Ok(ProductFunction { terms })
    }
}

/// Rank of the Gram matrix `(⟨v_i, v_j⟩)`, singular values below
/// `1e-8·σ_max` counted as zero.
pub fn gram_rank(vectors: &[Vec<f64>]) -> usize {
    let n = vectors.len();
    if n == 0 {
        return 0;
    }
    let g = DMatrix::from_fn(n, n, |i, j| {
        vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let sv = g.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-8 * max).count()
}

/// Pointwise rank of `(Γ(f_i, f_j))` on a line hull.
pub fn index_rank_line(tiling: &Tiling, fs: &[TlcFunction], points: &[HullPoint]) -> Result<Vec<usize>> {
    let ds: Vec<TlcFunction> = fs.iter().map(|f| f.derivative(1)).collect::<Result<_>>()?;
    points
        .iter()
        .map(|p| {
            let grads = ds
                .iter()
                .map(|d| Ok(vec![d.at(tiling, p)?]))
                .collect::<Result<Vec<_>>>()?;
            Ok(gram_rank(&grads))
        })
        .collect()
}

/// Pointwise rank of `(Γ(f_i, f_j))` on a product hull.
pub fn index_rank_plane(tilings: [&Tiling; 2], fs: &[ProductFunction], points: &[PlanePoint]) -> Result<Vec<usize>> {
    let grads: Vec<[ProductFunction; 2]> = fs.iter().map(|f| f.gradient()).collect::<Result<_>>()?;
    points
        .iter()
        .map(|p| {
            let vs = grads
                .iter()
                .map(|g| Ok(vec![g[0].at(tilings, p)?, g[1].at(tilings, p)?]))
                .collect::<Result<Vec<_>>>()?;
            Ok(gram_rank(&vs))
        })
        .collect()
}

/// Coordinate-type functions on a line hull: on every tile of length `ℓ`,
/// `ℓ/2π · sin(2πu/ℓ)` and `ℓ/2π · (1 − cos(2πu/ℓ))`, whose derivatives
/// `cos`, `sin` never vanish together.
pub fn coordinate_functions(tiling: &Tiling) -> Result<Vec<TlcFunction>> {
    let cells = tiling.cells(0)?;
    let len = |k: usize| tiling.letter_length(cells[k].letter).to_f64();
    Ok(vec![
        TlcFunction::on_tiles(
            tiling,
            0,
            |k| vec![Term::sin(len(k) / (2.0 * PI), 2.0 * PI / len(k), 0.0)],
            2,
        )?,
        TlcFunction::on_tiles(
            tiling,
            0,
            |k| {
                let l = len(k);
                vec![
                    Term::constant(l / (2.0 * PI)),
                    Term::cos(-l / (2.0 * PI), 2.0 * PI / l, 0.0),
                ]
            },
            1,
        )?,
    ])
}

/// A chart for a partition of unity: translates by less than `radius` of
/// the points `q + center`, `q` running over points of one level-`i` cell.
/// `center = 0` gives a ball around the points, otherwise the chart must
/// sit inside the tile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverChart {
    pub level: usize,
    pub cell: u32,
    pub center: f64,
    pub radius: f64,
}

/// Smooth partition of unity `χ_k = ψ_k / Σ_j ψ_j` built from `cos⁴` bumps.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub bumps: Vec<TlcFunction>,
}

pub fn partition_of_unity(tiling: &Tiling, cover: &[CoverChart]) -> Result<PartitionOfUnity> {
    if cover.is_empty() {
        return input("empty cover");
    }
    let mut bumps = Vec::new();
    for ch in cover {
        let n = tiling.cell_count(ch.level)?;
        if ch.cell as usize >= n {
            return input(format!("no cell {} at level {}", ch.cell, ch.level));
        }
        let (support, lo, hi) = if ch.center == 0.0 {
            (Support::Ball { radius: ch.radius }, -ch.radius, ch.radius)
        } else {
            (Support::Tile, ch.center - ch.radius, ch.center + ch.radius)
        };
        let profiles = (0..n as u32)
            .map(|c| {
                if c == ch.cell {
                    vec![Piece {
                        lo,
                        hi,
                        terms: cos4_bump(ch.center, ch.radius),
                    }]
                } else {
                    Vec::new()
                }
            })
            .collect();
        bumps.push(TlcFunction::new(tiling, ch.level, support, profiles, 3)?);
    }
    Ok(PartitionOfUnity { bumps })
}

impl PartitionOfUnity {
    /// All `χ_k` at the given shifts, `[k][j]`. A point outside every chart
    /// is a cover gap.
    pub fn values(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<Vec<f64>>> {
        let psi: Vec<Vec<f64>> = self
            .bumps
            .iter()
            .map(|b| b.along(tiling, base, shifts))
            .collect::<Result<_>>()?;
        let mut out = vec![vec![0.0; shifts.len()]; psi.len()];
        for j in 0..shifts.len() {
            let total: f64 = psi.iter().map(|p| p[j]).sum();
            if !(total > 1e-300) {
                return Err(Error::Diagnostic(format!(
                    "cover gap at shift {} of the orbit",
                    shifts[j]
                )));
            }
            for k in 0..psi.len() {
                out[k][j] = psi[k][j] / total;
            }
        }
        Ok(out)
    }

    pub fn member(&self, k: usize) -> PartitionMember<'_> {
        PartitionMember { pou: self, k }
    }
}

pub struct PartitionMember<'a> {
    pou: &'a PartitionOfUnity,
    k: usize,
}

impl HullFunction for PartitionMember<'_> {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        Ok(self.pou.values(tiling, base, shifts)?.swap_remove(self.k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden::PHI;
    use crate::sets::DeloneSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fib() -> Tiling {
        DeloneSpec::fibonacci().build_line().unwrap()
    }

    fn torus() -> Tiling {
        DeloneSpec::integers().build_line().unwrap()
    }

    fn interior_point(t: &Tiling) -> HullPoint {
        HullPoint::transversal(t.parse_address(&[], None).unwrap())
    }

    #[test]
    fn letter_indicator_pulls_back_to_the_tile_comb() {
        let f = fib();
        let ind = TlcFunction::letter_indicator(&f, 'a').unwrap();
        let p = HullPoint::origin(&f);
        let ts: Vec<f64> = (0..2000).map(|k| -50.0 + 0.05 * k as f64 + 0.013).collect();
        let vals = pullback(&f, &ind, &p, &ts).unwrap();
        // independent: scan the word and its tile starts
        let word = f.canonical_word(-60.0, 60.0).unwrap();
        let tiles = f.expand(&f.canonical_address(), -60.0, 60.0, 0).unwrap();
        let first = tiles.iter().position(|t| t.x >= -60.0).unwrap();
        let mut starts = Vec::new();
        let mut x = tiles[first].x;
        for &l in &word {
            starts.push((x, l));
            x += if l == 0 { PHI } else { 1.0 };
        }
        for (t, v) in ts.iter().zip(&vals) {
            let k = starts.iter().rposition(|s| s.0 <= *t).unwrap();
            let expect = if starts[k].1 == 0 { 1.0 } else { 0.0 };
            assert_eq!(*v, expect, "at t = {t}");
        }
    }

    #[test]
    fn constant_pulls_back_to_a_constant() {
        let f = fib();
        let c = TlcFunction::constant(&f, 2.5).unwrap();
        let v = c.along(&f, &interior_point(&f), &[-3.0, 0.0, 0.4, 7.7]).unwrap();
        assert!(v.iter().all(|&x| x == 2.5));
        assert!(c.derivative(3).unwrap().is_zero());
    }

    #[test]
    fn comb_matches_direct_convolution() {
        let f = fib();
        let eps = 0.2;
        let comb = cell_comb(&f, 0, &[0, 1], eps, vec![Term::sin(1.0, PI / eps, 0.0)], 0).unwrap();
        let p = interior_point(&f);
        let ts: Vec<f64> = (0..997).map(|k| -20.0 + 0.04 * k as f64).collect();
        let vals = comb.along(&f, &p, &ts).unwrap();
        let pts = p.points(&f, -25.0, 25.0).unwrap();
        let oracle = dirac_comb_convolution(&pts, eps, |u| (PI * u / eps).sin(), &ts);
        for (a, b) in vals.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-13);
        }
        // derivative is the comb of (π/ε)cos(πt/ε)
        let smooth = TlcFunction {
            smoothness: 1,
            ..comb.clone()
        };
        let d = smooth.derivative(1).unwrap().along(&f, &p, &ts).unwrap();
        let od = dirac_comb_convolution(&pts, eps, |u| PI / eps * (PI * u / eps).cos(), &ts);
        for (a, b) in d.iter().zip(&od) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(smooth.derivative(2).is_err());
    }

    #[test]
    fn comb_radius_is_bounded() {
        let f = fib();
        assert!((comb_radius_bound(&f) - 0.25).abs() < 1e-15);
        assert!(cell_comb(&f, 0, &[0], 0.25, cos4_bump(0.0, 0.25), 3).is_err());
        assert!(cell_comb(&f, 0, &[0], 0.0, cos4_bump(0.0, 0.1), 3).is_err());
        let zero = cell_comb(&f, 0, &[0], 0.2, Vec::new(), 3).unwrap();
        assert!(zero
            .along(&f, &interior_point(&f), &[0.0, 0.1])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn cylinder_comb_support() {
        let f = fib();
        let center = f.parse_address(&[], None).unwrap();
        let eps = 0.2;
        let comb = comb_function(&f, &center, eps, cos4_bump(0.0, eps), 3).unwrap();
        let chart = crate::hull::Chart::new(
            &f,
            crate::hull::ChartBase::Cylinder(CylinderSet::new(center.clone(), eps).unwrap()),
            eps,
        )
        .unwrap();
        let base = HullPoint::transversal(center);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut inside = 0;
        for _ in 0..1000 {
            let s: f64 = rng.random_range(-400.0..400.0);
            let q = base.translate(s);
            let v = comb.at(&f, &q).unwrap();
            match chart.decompose(&f, &q) {
                Ok(cp) => {
                    inside += 1;
                    let t = cp.t();
                    assert!((v - (PI * t / (2.0 * eps)).cos().powi(4)).abs() < 1e-12);
                }
                Err(_) => assert_eq!(v, 0.0),
            }
        }
        assert!(inside > 0);
    }

    #[test]
    fn finite_differences_converge_at_second_order() {
        let f = fib();
        let g = cell_comb(&f, 1, &[0, 2], 0.24, cos4_bump(0.0, 0.24), 3).unwrap();
        let d = g.derivative(1).unwrap();
        let p = interior_point(&f);
        let ts = [0.1, -0.05, 0.9 * 0.24, PHI - 0.13, 2.0 * PHI + 1.1];
        let exact = d.along(&f, &p, &ts).unwrap();
        let fd = |h: f64| -> Vec<f64> {
            let plus: Vec<f64> = ts.iter().map(|t| t + h).collect();
            let minus: Vec<f64> = ts.iter().map(|t| t - h).collect();
            let a = g.along(&f, &p, &plus).unwrap();
            let b = g.along(&f, &p, &minus).unwrap();
            a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
        };
        let (e1, e2): (Vec<f64>, Vec<f64>) = (fd(1e-3), fd(5e-4));
        for k in 0..ts.len() {
            let r1 = (e1[k] - exact[k]).abs();
            let r2 = (e2[k] - exact[k]).abs();
            if r1 > 1e-9 {
                let ratio = r1 / r2;
                assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
            }
        }
    }

    #[test]
    fn torus_laplacian_and_carre_du_champ() {
        let z = torus();
        let f = TlcFunction::on_tiles(&z, 0, |_| vec![Term::cos(1.0, 2.0 * PI, 0.0)], usize::MAX).unwrap();
        let lap = laplacian(&f).unwrap();
        let g = carre_du_champ(&f, &f).unwrap();
        let p = HullPoint::origin(&z);
        let ts: Vec<f64> = (0..50).map(|k| -3.0 + 0.123 * k as f64).collect();
        let v = f.along(&z, &p, &ts).unwrap();
        let l = lap.along(&z, &p, &ts).unwrap();
        let gv = g.along(&z, &p, &ts).unwrap();
        for k in 0..ts.len() {
            assert!((l[k] + 4.0 * PI * PI * v[k]).abs() < 1e-10);
            let s = (2.0 * PI * ts[k]).sin();
            assert!((gv[k] - 4.0 * PI * PI * s * s).abs() < 1e-10);
        }
        assert!(gradient(&TlcFunction::constant(&z, 1.0).unwrap()).unwrap()[0].is_zero());
    }

    #[test]
    fn product_laplacian_matches_finite_differences() {
        let z = torus();
        let f = fib();
        let g = TlcFunction::on_tiles(&z, 0, |_| vec![Term::sin(1.0, 2.0 * PI, 0.3)], usize::MAX).unwrap();
        let h = cell_comb(&f, 0, &[0], 0.24, cos4_bump(0.0, 0.24), 3).unwrap();
        let prod = ProductFunction::product(g.clone(), h.clone());
        let lap = prod.laplacian().unwrap();
        let base = PlanePoint([HullPoint::origin(&z), interior_point(&f)]);
        let h0 = 1e-3;
        for &(x, y) in &[(0.1, 0.05), (0.37, -0.12), (0.8, 0.2)] {
            let p = base.translate([x, y]);
            let at = |dx: f64, dy: f64| prod.at([&z, &f], &p.translate([dx, dy])).unwrap();
            let fd = (at(h0, 0.0) + at(-h0, 0.0) + at(0.0, h0) + at(0.0, -h0) - 4.0 * at(0.0, 0.0)) / (h0 * h0);
            let exact = lap.at([&z, &f], &p).unwrap();
            assert!((fd - exact).abs() < 1e-4 * (1.0 + exact.abs()), "{fd} vs {exact}");
            // symbolic form g''h + gh''
            let gpp = g.derivative(2).unwrap().at(&z, &p.0[0]).unwrap();
            let hpp = h.derivative(2).unwrap().at(&f, &p.0[1]).unwrap();
            let sym = gpp * h.at(&f, &p.0[1]).unwrap() + g.at(&z, &p.0[0]).unwrap() * hpp;
            assert!((sym - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_have_norm_of_their_value() {
        let f = fib();
        for c in [1.0, -2.5, 0.0] {
            let k = TlcFunction::constant(&f, c).unwrap();
            for order in 0..4 {
                assert!((sobolev_norm(&f, &k, order).unwrap() - c.abs()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sine_comb_sobolev_norm_closed_form() {
        let f = fib();
        let eps = 0.2;
        let w = PI / eps;
        let comb = TlcFunction {
            smoothness: 2,
            ..cell_comb(&f, 1, &[1], eps, vec![Term::sin(1.0, w, 0.0)], 0).unwrap()
        };
        let nu = f.cells(1).unwrap()[1].weight;
        let ell = f.mean_tile_length();
        // ∫ sin² = ε, each derivative multiplies by (π/ε)²
        let mut acc = 0.0;
        for k in 0..3 {
            acc += nu / ell * eps * w.powi(2 * k);
            let n = sobolev_norm(&f, &comb, k as usize).unwrap();
            assert!((n - acc.sqrt()).abs() < 1e-11 * acc.sqrt(), "k = {k}");
        }
    }

    #[test]
    fn ergodic_average_agrees_with_the_quadrature() {
        let f = fib();
        let g = cell_comb(&f, 2, &[0, 3], 0.2, cos4_bump(0.0, 0.2), 3).unwrap();
        let exact = l2_inner(&f, &g, &TlcFunction::constant(&f, 1.0).unwrap()).unwrap();
        let avg = crate::ergodic::ergodic_average(&f, &g, &interior_point(&f), &[20000.0], 8).unwrap()[0];
        assert!((avg - exact).abs() < 1e-3, "{avg} vs {exact}");
    }

    fn random_comb(f: &Tiling, rng: &mut ChaCha8Rng, level: usize) -> TlcFunction {
        let eps = 0.2;
        let n = f.cell_count(level).unwrap();
        let profiles = (0..n)
            .map(|_| {
                let mut terms = Vec::new();
                for k in 1..4 {
                    let a: f64 = rng.random_range(-1.0..1.0);
                    let kf = k as f64;
                    // vanish with the first derivative at ±ε
                    terms.push(Term::cos(a, kf * PI / eps, 0.0));
                    terms.push(Term::constant(-a * if k % 2 == 0 { 1.0 } else { -1.0 }));
                    let b: f64 = rng.random_range(-1.0..1.0);
                    terms.push(Term::sin(b, kf * PI / eps, 0.0));
                    terms.push(Term::sin(-b * kf / (kf + 2.0), (kf + 2.0) * PI / eps, 0.0));
                }
                vec![Piece {
                    lo: -eps,
                    hi: eps,
                    terms,
                }]
            })
            .collect();
        TlcFunction::new(f, level, Support::Ball { radius: eps }, profiles, 2).unwrap()
    }

    #[test]
    fn integration_by_parts_for_combs() {
        let f = fib();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..6 {
            let a = random_comb(&f, &mut rng, k % 3);
            let b = random_comb(&f, &mut rng, (k + 1) % 3);
            for order in 1..=2 {
                assert!(ibp_residual(&f, &a, &b, order).unwrap() < 1e-10);
            }
        }
        // a constant partner makes both sides vanish
        let c = TlcFunction::constant(&f, 3.0).unwrap();
        let a = random_comb(&f, &mut rng, 1);
        assert!(ibp_residual(&f, &a, &c, 1).unwrap() < 1e-12);
    }

    #[test]
    fn boundary_terms_break_integration_by_parts() {
        // u ↦ u on every tile jumps at tile boundaries; the residual is the
        // boundary term Σ ν [f g]_0^ℓ / ℓ̄ of the one-dimensional formula
        let f = fib();
        let g = TlcFunction::on_tiles(&f, 0, |_| vec![Term::Poly { coeffs: vec![0.0, 1.0] }], 1).unwrap();
        let one = TlcFunction::constant(&f, 1.0).unwrap();
        let r = ibp_residual(&f, &g, &one, 1).unwrap();
        let cells = f.cells(0).unwrap();
        let oracle: f64 = cells
            .iter()
            .map(|c| c.weight * f.letter_length(c.letter).to_f64())
            .sum::<f64>()
            / f.mean_tile_length();
        assert!((r - oracle).abs() < 1e-12);
        assert!(r > 0.5);
    }

    #[test]
    fn projection_recovers_and_contracts() {
        let f = fib();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let g = random_comb(&f, &mut rng, 3);
            for i in 0..=3 {
                let p = tlc_project(&f, &g, i).unwrap();
                let pp = tlc_project(&f, &p, i).unwrap();
                for k in 0..=2 {
                    let a = sobolev_norm(&f, &p, k).unwrap();
                    assert!(a <= sobolev_norm(&f, &g, k).unwrap() + 1e-12);
                    let diff = TlcFunction::combine(&f, 1.0, &p, -1.0, &pp).unwrap();
                    assert!(sobolev_norm(&f, &diff, k).unwrap() < 1e-12);
                }
            }
            let mut prev = f64::INFINITY;
            for i in 0..=3 {
                let p = tlc_project(&f, &g, i).unwrap();
                let d = sobolev_norm(&f, &TlcFunction::combine(&f, 1.0, &g, -1.0, &p).unwrap(), 1).unwrap();
                assert!(d <= prev + 1e-12);
                prev = d;
            }
            assert!(prev < 1e-12);
        }
    }

    #[test]
    fn partition_of_unity_sums_to_one() {
        let f = fib();
        let cover = vec![
            CoverChart {
                level: 0,
                cell: 0,
                center: 0.0,
                radius: 0.5,
            },
            CoverChart {
                level: 0,
                cell: 1,
                center: 0.0,
                radius: 0.5,
            },
            CoverChart {
                level: 0,
                cell: 0,
                center: 0.5 * PHI,
                radius: 0.5,
            },
            CoverChart {
                level: 0,
                cell: 1,
                center: 0.5,
                radius: 0.4,
            },
        ];
        let pou = partition_of_unity(&f, &cover).unwrap();
        let base = interior_point(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ts: Vec<f64> = (0..1000).map(|_| rng.random_range(-300.0..300.0)).collect();
        let v = pou.values(&f, &base, &ts).unwrap();
        for j in 0..ts.len() {
            let s: f64 = v.iter().map(|c| c[j]).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(v.iter().all(|c| c[j] >= 0.0));
        }
        // dropping the b-interior chart leaves a gap at the middle of b-tiles
        let gap = partition_of_unity(&f, &cover[..3]).unwrap();
        let b = f
            .expand(&base.address, 0.0, 10.0, 0)
            .unwrap()
            .into_iter()
            .find(|t| t.letter == 1)
            .unwrap();
        assert!(matches!(gap.values(&f, &base, &[b.x + 0.5]), Err(Error::Diagnostic(_))));
        // a single chart covering everything is identically one
        let z = torus();
        let one = partition_of_unity(
            &z,
            &[CoverChart {
                level: 0,
                cell: 0,
                center: 0.5,
                radius: 0.5,
            }],
        )
        .unwrap();
        let v = one.values(&z, &HullPoint::origin(&z), &[0.3, 0.5, 0.99]).unwrap();
        assert!(v[0].iter().all(|&x| x == 1.0));
    }

    #[test]
    fn partition_members_are_differentiable() {
        let f = fib();
        let cover = vec![
            CoverChart {
                level: 0,
                cell: 0,
                center: 0.0,
                radius: 0.5,
            },
            CoverChart {
                level: 0,
                cell: 1,
                center: 0.0,
                radius: 0.5,
            },
            CoverChart {
                level: 0,
                cell: 0,
                center: 0.5 * PHI,
                radius: 0.5,
            },
            CoverChart {
                level: 0,
                cell: 1,
                center: 0.5,
                radius: 0.4,
            },
        ];
        let pou = partition_of_unity(&f, &cover).unwrap();
        let base = interior_point(&f);
        let chi = pou.member(2);
        // second differences shrink like h² wherever χ is C²
        let ts: Vec<f64> = (0..200).map(|k| -10.0 + 0.1 * k as f64 + 0.003).collect();
        for &t in &ts {
            let d2 = |h: f64| {
                let v = chi.along(&f, &base, &[t - h, t, t + h]).unwrap();
                (v[0] - 2.0 * v[1] + v[2]) / (h * h)
            };
            let (a, b) = (d2(1e-3), d2(5e-4));
            assert!((a - b).abs() < 1e-2 * (1.0 + a.abs()), "kink at {t}: {a} vs {b}");
        }
    }

    #[test]
    fn index_rank_of_coordinate_functions() {
        let f = fib();
        let fs = coordinate_functions(&f).unwrap();
        let base = interior_point(&f);
        let pts: Vec<HullPoint> = (0..50).map(|k| base.translate(0.731 * k as f64 - 17.0)).collect();
        assert!(index_rank_line(&f, &fs, &pts).unwrap().iter().all(|&r| r == 1));
        let consts = vec![
            TlcFunction::constant(&f, 1.0).unwrap(),
            TlcFunction::constant(&f, 2.0).unwrap(),
        ];
        assert!(index_rank_line(&f, &consts, &pts).unwrap().iter().all(|&r| r == 0));

        let one = |t: &Tiling| TlcFunction::constant(t, 1.0).unwrap();
        let mut plane = Vec::new();
        for g in &fs {
            plane.push(ProductFunction::product(g.clone(), one(&f)));
            plane.push(ProductFunction::product(one(&f), g.clone()));
        }
        let b2 = PlanePoint([base.clone(), base.clone()]);
        let pp: Vec<PlanePoint> = (0..50)
            .map(|k| b2.translate([0.731 * k as f64 - 17.0, 1.37 * k as f64 - 30.0]))
            .collect();
        assert!(index_rank_plane([&f, &f], &plane, &pp).unwrap().iter().all(|&r| r == 2));
    }

    proptest! {
        #[test]
        fn derivative_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, t in -50.0f64..50.0) {
            let f = fib();
            let g = cell_comb(&f, 1, &[0, 1], 0.2, cos4_bump(0.0, 0.2), 3).unwrap();
            let h = cell_comb(&f, 0, &[1], 0.2, vec![Term::sin(1.0, 5.0 * PI, 0.0)], 3).unwrap();
            let s = TlcFunction::combine(&f, a, &g, b, &h).unwrap();
            let p = interior_point(&f);
            let lhs = s.derivative(1).unwrap().at(&f, &p.translate(t)).unwrap();
            let rhs = a * g.derivative(1).unwrap().at(&f, &p.translate(t)).unwrap()
                + b * h.derivative(1).unwrap().at(&f, &p.translate(t)).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn carre_du_champ_is_nonnegative_and_symmetric(t in -50.0f64..50.0) {
            let f = fib();
            let fs = coordinate_functions(&f).unwrap();
            let p = interior_point(&f).translate(t);
            let gff = carre_du_champ(&fs[0], &fs[0]).unwrap().at(&f, &p).unwrap();
            prop_assert!(gff >= 0.0);
            let a = carre_du_champ(&fs[0], &fs[1]).unwrap().at(&f, &p).unwrap();
            let b = carre_du_champ(&fs[1], &fs[0]).unwrap().at(&f, &p).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn leibniz_rule(t in -40.0f64..40.0) {
            let f = fib();
            let g = cell_comb(&f, 1, &[0, 2], 0.2, cos4_bump(0.0, 0.2), 3).unwrap();
            let h = TlcFunction::on_tiles(&f, 0, |_| vec![Term::constant(0.5), Term::cos(1.0, 0.7, 0.1)], 3).unwrap();
            let p = interior_point(&f).translate(t);
            let prod = |s: f64| g.at(&f, &p.translate(s)).unwrap() * h.at(&f, &p.translate(s)).unwrap();
            let e = 1e-5;
            let fd = (prod(e) - prod(-e)) / (2.0 * e);
            let exact = g.derivative(1).unwrap().at(&f, &p).unwrap() * h.at(&f, &p).unwrap()
                + g.at(&f, &p).unwrap() * h.derivative(1).unwrap().at(&f, &p).unwrap();
            // skip the jumps of h at tile boundaries
            let near_edge = f.expand(&p.address, p.shift() - 1.0, p.shift() + 1.0, 0).unwrap()
                .iter().any(|tl| (tl.x - p.shift()).abs() < 2.0 * e);
            if !near_edge {
                prop_assert!((fd - exact).abs() < 1e-6);
            }
        }

        #[test]
        fn locality_of_derivatives(t in -0.19f64..0.19) {
            // two functions agreeing on the chart around cell 0 points have
            // equal derivatives there
            let f = fib();
            let g = cell_comb(&f, 0, &[0], 0.2, cos4_bump(0.0, 0.2), 3).unwrap();
            let h = cell_comb(&f, 0, &[0, 1], 0.2, cos4_bump(0.0, 0.2), 3).unwrap();
            let base = interior_point(&f);
            let a_tile = f.expand(&base.address, 0.0, 10.0, 0).unwrap().into_iter().find(|x| x.letter == 0).unwrap();
            let p = base.translate_exact(a_tile.start).translate(t);
            prop_assert_eq!(
                g.derivative(1).unwrap().at(&f, &p).unwrap(),
                h.derivative(1).unwrap().at(&f, &p).unwrap()
            );
        }
    }
}

//! Hull geometry: hull points, the metric ρ, the orbit metric, cylinder
//! sets and the local product charts.
//!
//! A hull point is a transversal point `Λ'` (given by its supertile
//! address) together with a translation `t`, standing for `φ_t(Λ') = Λ' − t`.
//! The translation keeps an exact part in Z[φ] and a floating drift.
//!
//! Computing ρ: feasibility at ε asks for `s, t` in `B_ε` with
//! `B_{1/ε} ∩ (Λ1 − s) = B_{1/ε} ∩ (Λ2 − t)`. Once the ball holds a point,
//! agreement forces `Λ1 − s` and `Λ2 − t` to differ by an exact difference
//! `d = q1 − q2` of points, so the search runs over finitely many `d` and,
//! for each, over the interval of admissible ball centers. Feasibility is
//! monotone in ε, so ρ is found by bisection.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::golden::GoldenNumber;
use crate::sets::{Address, Tiling};

/// `φ_t(Λ')` with `t = offset + drift`.
#[derive(Clone, Debug, PartialEq)]
pub struct HullPoint {
    pub address: Address,
    pub offset: GoldenNumber,
    pub drift: f64,
}

impl HullPoint {
    pub fn transversal(address: Address) -> Self {
        HullPoint {
            address,
            offset: GoldenNumber::ZERO,
            drift: 0.0,
        }
    }

    /// The reference point of a tiling's hull.
    pub fn origin(tiling: &Tiling) -> Self {
        HullPoint::transversal(tiling.canonical_address())
    }

    pub fn shift(&self) -> f64 {
        self.offset.to_f64() + self.drift
    }

    /// `φ_t`, accumulating into the floating drift.
    pub fn translate(&self, t: f64) -> Self {
        HullPoint {
            drift: self.drift + t,
            ..self.clone()
        }
    }

    /// `φ_t` for an exact `t`.
    pub fn translate_exact(&self, t: GoldenNumber) -> Self {
        HullPoint {
            offset: self.offset + t,
            ..self.clone()
        }
    }

    pub fn is_transversal(&self) -> bool {
        self.offset.is_zero() && self.drift == 0.0
    }

    /// Points of `Λ' − t` inside `[lo, hi]`.
    pub fn points(&self, tiling: &Tiling, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let s = self.shift();
        Ok(tiling
            .points(&self.address, lo + s - 1e-9, hi + s + 1e-9)?
            .into_iter()
            .map(|p| p.to_f64() - s)
            .filter(|&x| x >= lo && x <= hi)
            .collect())
    }

    /// Re-expresses the point relative to the tile containing the origin,
    /// leaving a translation in `[0, len)`.
    pub fn normalize(&self, tiling: &Tiling) -> Result<Self> {
        let s = self.shift();
        let tiles = tiling.expand(&self.address, s - 1.0, s + 1.0, 0)?;
        let tile = tiles
            .iter()
            .rev()
            .find(|t| t.x <= s)
            .ok_or_else(|| Error::Diagnostic("no tile below the origin".into()))?;
        let address = tiling.reroot(&self.address, tile.start)?;
        Ok(HullPoint {
            address,
            offset: self.offset - tile.start,
            drift: self.drift,
        })
    }

    pub fn from_json(tiling: &Tiling, value: &serde_json::Value) -> Result<Self> {
        let raw: HullPointJson = serde_json::from_value(value.clone()).map_err(|e| Error::Input(e.to_string()))?;
        let address = tiling.parse_address(&raw.address, raw.tail.as_deref())?;
        let offset = raw.offset.map_or(GoldenNumber::ZERO, |o| GoldenNumber::new(o.a, o.b));
        let drift = raw.drift.unwrap_or(0.0);
        if !drift.is_finite() {
            return input("hull point drift must be finite");
        }
        Ok(HullPoint { address, offset, drift })
    }

    pub fn to_json(&self, tiling: &Tiling) -> serde_json::Value {
        let (address, tail) = tiling.address_tokens(&self.address);
        let raw = HullPointJson {
            address,
            tail: (!tail.is_empty()).then_some(tail),
            offset: Some(OffsetJson {
                a: self.offset.a,
                b: self.offset.b,
            }),
            drift: (self.drift != 0.0).then_some(self.drift),
        };
        serde_json::to_value(raw).expect("hull point serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OffsetJson {
    a: i64,
    b: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HullPointJson {
    #[serde(default)]
    address: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<OffsetJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    drift: Option<f64>,
}

/// A function on the hull, evaluated along orbits: `along(p, s)` returns
/// `f(φ_{s_k}(p))` for every shift `s_k`.
pub trait HullFunction: Sync {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>>;

    fn at(&self, tiling: &Tiling, p: &HullPoint) -> Result<f64> {
        Ok(self.along(tiling, p, &[0.0])?[0])
    }

    /// Shifts in `[lo, hi]` along the orbit of `base`, besides tile
    /// boundaries, where `f` may fail to be smooth. Quadratures split there.
    fn kinks(&self, tiling: &Tiling, base: &HullPoint, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let _ = (tiling, base, lo, hi);
        Ok(Vec::new())
    }
}

/// The constant function.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl HullFunction for Constant {
    fn along(&self, _: &Tiling, _: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.0; shifts.len()])
    }
}

/// `h_Λ(t) = φ_t(Λ)`.
pub fn orbit_map(p: &HullPoint, t: f64) -> HullPoint {
    p.translate(t)
}

/// Exact displacement `D` with `Λ_q = Λ_p − D` when both lie on one orbit;
/// for lattices the value is defined modulo the period.
pub fn orbit_displacement(tiling: &Tiling, p: &HullPoint, q: &HullPoint) -> Option<(GoldenNumber, f64)> {
    let d = tiling.orbit_displacement(&p.address, &q.address)?;
    Some((d + q.offset - p.offset, q.drift - p.drift))
}

/// Whether two representations denote the same hull point.
pub fn same_point(tiling: &Tiling, p: &HullPoint, q: &HullPoint) -> bool {
    match (tiling, orbit_displacement(tiling, p, q)) {
        (_, None) => false,
        (Tiling::Periodic(per), Some((g, f))) => {
            let l = per.spacing.to_f64();
            let x = g.to_f64() + f;
            (x / l).round() * l == x || ((x / l).round() * l - x).abs() < 1e-12 * l.max(x.abs())
        }
        (_, Some((g, f))) => {
            if f == 0.0 {
                g.is_zero()
            } else {
                // an exact displacement can only be cancelled by a drift in
                // floating arithmetic when both parts agree to rounding
                (g.to_f64() + f).abs() <= 4.0 * f64::EPSILON * f.abs().max(1.0)
            }
        }
    }
}

/// Orbit-wise distance; infinite across orbits.
pub fn orbit_metric(tiling: &Tiling, p: &HullPoint, q: &HullPoint) -> f64 {
    match orbit_displacement(tiling, p, q) {
        None => f64::INFINITY,
        Some((g, f)) => {
            let x = g.to_f64() + f;
            match tiling {
                Tiling::Periodic(per) => {
                    let l = per.spacing.to_f64();
                    (x - (x / l).round() * l).abs()
                }
                _ => x.abs(),
            }
        }
    }
}

struct Side<'a> {
    tiling: &'a Tiling,
    point: &'a HullPoint,
}

fn order_key(t: &Tiling, p: &HullPoint) -> (u8, Address, GoldenNumber, u64) {
    let tag = match t {
        Tiling::Substitution(_) => 0,
        Tiling::CutAndProject(_) => 1,
        Tiling::Periodic(_) => 2,
    };
    (tag, p.address.clone(), p.offset, p.drift.to_bits())
}

/// ρ(Λ1, Λ2) within `tol`, capped at 2^{-1/2}. The two points may come
/// from different tilings.
pub fn hull_metric(t1: &Tiling, p1: &HullPoint, t2: &Tiling, p2: &HullPoint, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return input("metric tolerance must be positive");
    }
    let same_tiling = std::ptr::eq(t1, t2);
    if same_tiling && same_point(t1, p1, p2) {
        return Ok(0.0);
    }
    // fixed argument order makes the result exactly symmetric
    let (a, b) = if order_key(t1, p1) <= order_key(t2, p2) {
        (Side { tiling: t1, point: p1 }, Side { tiling: t2, point: p2 })
    } else {
        (Side { tiling: t2, point: p2 }, Side { tiling: t1, point: p1 })
    };
    let exact = |d: GoldenNumber| -> bool {
        if !same_tiling {
            return false;
        }
        match a.tiling {
            Tiling::Periodic(per) => {
                let k = (d.to_f64() / per.spacing.to_f64()).round() as i64;
                per.spacing * k == d
            }
            t => t.orbit_displacement(&a.point.address, &b.point.address) == Some(d),
        }
    };
    if !feasible(&a, &b, FRAC_1_SQRT_2, &exact)? {
        return Ok(FRAC_1_SQRT_2);
    }
    let (mut lo, mut hi) = (0.0, FRAC_1_SQRT_2);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(&a, &b, mid, &exact)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn feasible(a: &Side, b: &Side, eps: f64, exact: &dyn Fn(GoldenNumber) -> bool) -> Result<bool> {
    let r = 1.0 / eps;
    let s1 = a.point.shift();
    let s2 = b.point.shift();
    let delta = s1 - s2;
    // points of Λ1' that can be nearest to an admissible center
    let reach = a.tiling.max_tile_length().to_f64() + eps;
    let q1s = a.tiling.points(&a.point.address, s1 - reach, s1 + reach)?;
    let (Some(first), Some(last)) = (q1s.first(), q1s.last()) else {
        return Ok(false);
    };
    let q2s = b.tiling.points(
        &b.point.address,
        first.to_f64() - delta - 2.0 * eps - 1e-9,
        last.to_f64() - delta + 2.0 * eps + 1e-9,
    )?;
    let mut cands = std::collections::BTreeSet::new();
    for &q1 in &q1s {
        for &q2 in &q2s {
            let d = q1 - q2;
            if (d.to_f64() - delta).abs() <= 2.0 * eps {
                cands.insert(d);
            }
        }
    }
    for d in cands {
        let df = d.to_f64();
        let ilo = (s1 - eps).max(s2 + df - eps);
        let ihi = (s1 + eps).min(s2 + df + eps);
        if ilo > ihi {
            continue;
        }
        if exact(d) {
            return Ok(true);
        }
        let w0 = ilo - r - 1.0;
        let w1 = ihi + r + 1.0;
        let pa = a.tiling.points(&a.point.address, w0, w1)?;
        let pb: Vec<GoldenNumber> = b
            .tiling
            .points(&b.point.address, w0 - df - 1e-9, w1 - df + 1e-9)?
            .into_iter()
            .map(|q| q + d)
            .collect();
        let diff = symmetric_difference(&pa, &pb);
        if center_exists(&diff, ilo, ihi, r) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn symmetric_difference(a: &[GoldenNumber], b: &[GoldenNumber]) -> Vec<f64> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                out.push(x.to_f64());
                i += 1;
            }
            (Some(_), Some(y)) => {
                out.push(y.to_f64());
                j += 1;
            }
            (Some(x), None) => {
                out.push(x.to_f64());
                i += 1;
            }
            (None, Some(y)) => {
                out.push(y.to_f64());
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Is there `u ∈ [lo, hi]` with every disagreement at distance ≥ r?
fn center_exists(diff: &[f64], lo: f64, hi: f64, r: f64) -> bool {
    let clear = |u: f64| {
        let k = diff.partition_point(|&x| x < u);
        let left_ok = k == 0 || u - diff[k - 1] >= r;
        let right_ok = k == diff.len() || diff[k] - u >= r;
        left_ok && right_ok
    };
    if clear(lo) || clear(hi) {
        return true;
    }
    diff.iter()
        .map(|&x| x + r)
        .chain(diff.iter().map(|&x| x - r))
        .any(|u| u >= lo && u <= hi && clear(u))
}

/// Cylinder `C_{Λ,ε}`: transversal points agreeing with `Λ` on `B_{1/ε}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderSet {
    pub center: Address,
    pub epsilon: f64,
}

impl CylinderSet {
    pub fn new(center: Address, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return input("cylinder radius must be positive");
        }
        Ok(CylinderSet { center, epsilon })
    }

    pub fn contains(&self, tiling: &Tiling, q: &Address) -> Result<bool> {
        let r = 1.0 / self.epsilon;
        Ok(tiling.points(&self.center, -r, r)? == tiling.points(q, -r, r)?)
    }
}

/// Radius `1/ε_i` of the ball around the origin covered by the level-`i`
/// supertile of a transversal point.
pub fn supertile_inner_radius(tiling: &Tiling, addr: &Address, level: usize) -> Result<f64> {
    match tiling {
        Tiling::Substitution(s) => {
            let mut left = GoldenNumber::ZERO;
            for j in 0..level {
                let st = addr.step(j);
                let parent = addr.step(j + 1).letter;
                left += s.images()[parent as usize][..st.pos as usize]
                    .iter()
                    .map(|&y| s.supertile_length(j, y))
                    .sum();
            }
            let len = s.supertile_length(level, addr.step(level).letter);
            Ok(left.min(len - left).to_f64())
        }
        _ => Err(Error::Unsupported("supertiles exist for substitution sets only".into())),
    }
}

/// Level-`i` transversal cell of the tile at the origin.
pub fn origin_cell(tiling: &Tiling, addr: &Address, level: usize) -> Result<u32> {
    let tiles = tiling.expand(addr, -0.5, 0.5, level)?;
    tiles
        .iter()
        .find(|t| t.start.is_zero())
        .map(|t| t.cell)
        .ok_or_else(|| Error::Domain("transversal point has no tile at the origin".into()))
}

/// Decomposition `q = φ_t(Λ')` in a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartedPoint {
    pub transversal: HullPoint,
    pub ball: HullPoint,
}

impl ChartedPoint {
    /// Translation part `t` as a real number.
    pub fn t(&self) -> f64 {
        self.ball.shift()
    }
}

/// Chart `O_{Λ,ε}`: translates by less than `radius` of the cylinder
/// `C_{Λ,ε}` (or of a transversal cell).
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub base: ChartBase,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChartBase {
    Cylinder(CylinderSet),
    Cell { level: usize, cell: u32 },
}

impl Chart {
    pub fn new(tiling: &Tiling, base: ChartBase, radius: f64) -> Result<Self> {
        let r = tiling.min_tile_length().to_f64();
        if !(radius > 0.0) || radius > r / 2.0 {
            return Err(Error::Domain(format!("chart radius must lie in (0, r/2] with r = {r}")));
        }
        Ok(Chart { base, radius })
    }

    pub fn base_contains(&self, tiling: &Tiling, q: &Address) -> Result<bool> {
        match &self.base {
            ChartBase::Cylinder(c) => c.contains(tiling, q),
            ChartBase::Cell { level, cell } => Ok(origin_cell(tiling, q, *level)? == *cell),
        }
    }

    pub fn decompose(&self, tiling: &Tiling, q: &HullPoint) -> Result<ChartedPoint> {
        let s = q.shift();
        let near = tiling.points(&q.address, s - self.radius, s + self.radius)?;
        let x = near
            .into_iter()
            .find(|p| (p.to_f64() - s).abs() < self.radius)
            .ok_or_else(|| Error::Domain("point lies outside the chart".into()))?;
        let address = tiling.reroot(&q.address, x)?;
        if !self.base_contains(tiling, &address)? {
            return Err(Error::Domain("point lies outside the chart".into()));
        }
        Ok(ChartedPoint {
            transversal: HullPoint::transversal(address),
            ball: HullPoint {
                address: Address::empty(),
                offset: q.offset - x,
                drift: q.drift,
            },
        })
    }

    pub fn recompose(&self, c: &ChartedPoint) -> HullPoint {
        HullPoint {
            address: c.transversal.address.clone(),
            offset: c.ball.offset,
            drift: c.ball.drift,
        }
    }
}

/// A point of a product hull.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanePoint(pub [HullPoint; 2]);

impl PlanePoint {
    pub fn translate(&self, t: [f64; 2]) -> Self {
        PlanePoint([self.0[0].translate(t[0]), self.0[1].translate(t[1])])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::DeloneSpec;

    fn fib() -> Tiling {
        DeloneSpec::fibonacci().build_line().unwrap()
    }

    #[test]
    fn identity_has_zero_distance() {
        let t = fib();
        let p = HullPoint::origin(&t);
        assert_eq!(hull_metric(&t, &p, &t, &p, 1e-6).unwrap(), 0.0);
        assert_eq!(orbit_metric(&t, &p, &p), 0.0);
    }

    #[test]
    fn small_shifts_are_close() {
        let t = fib();
        let p = HullPoint::origin(&t);
        for s in [0.001, 0.03, 0.1, -0.07] {
            let q = p.translate(s);
            let rho = hull_metric(&t, &p, &t, &q, 1e-7).unwrap();
            assert!(rho <= 2.0 * s.abs() + 1e-7, "s={s} rho={rho}");
            assert!((orbit_metric(&t, &p, &q) - s.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn lattice_against_fibonacci_is_capped() {
        let z = DeloneSpec::integers().build_line().unwrap();
        let f = fib();
        // junction of two long tiles: no lattice-like patch nearby
        let pts = f.points(&f.canonical_address(), 0.0, 50.0).unwrap();
        let aa = pts
            .windows(3)
            .find(|w| w[1] - w[0] == GoldenNumber::PHI && w[2] - w[1] == GoldenNumber::PHI)
            .unwrap()[1];
        let p = HullPoint::transversal(f.reroot(&f.canonical_address(), aa).unwrap());
        let q = HullPoint::origin(&z);
        assert_eq!(hull_metric(&z, &q, &f, &p, 1e-6).unwrap(), FRAC_1_SQRT_2);
        assert_eq!(hull_metric(&f, &p, &z, &q, 1e-6).unwrap(), FRAC_1_SQRT_2);
    }

    #[test]
    fn lattice_metric_is_half_the_torus_distance() {
        let z = DeloneSpec::integers().build_line().unwrap();
        let p = HullPoint::origin(&z);
        let q = p.translate(0.3);
        let rho = hull_metric(&z, &p, &z, &q, 1e-9).unwrap();
        assert!((rho - 0.15).abs() < 2e-9);
        assert!((orbit_metric(&z, &p, &p.translate(0.9)) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn translation_group_law() {
        let t = fib();
        let p = HullPoint::origin(&t);
        let a = p.translate_exact(GoldenNumber::PHI).translate_exact(GoldenNumber::ONE);
        let b = p.translate_exact(GoldenNumber::new(1, 1));
        assert_eq!(a.points(&t, -10.0, 10.0).unwrap(), b.points(&t, -10.0, 10.0).unwrap());
        let moved = p.translate_exact(GoldenNumber::PHI).points(&t, -5.0, 5.0).unwrap();
        let direct: Vec<f64> = t
            .points(
                &p.address,
                GoldenNumber::PHI.to_f64() - 5.0,
                GoldenNumber::PHI.to_f64() + 5.0,
            )
            .unwrap()
            .iter()
            .map(|x| (*x - GoldenNumber::PHI).to_f64())
            .collect();
        assert_eq!(moved, direct);
    }

    #[test]
    fn cylinder_from_shared_supertile() {
        let t = fib();
        let c0 = t.canonical_address();
        let p = t.points(&c0, 10.0, 12.0).unwrap()[0];
        let a = t.reroot(&c0, p).unwrap();
        let level = 6;
        let r = supertile_inner_radius(&t, &a, level).unwrap();
        assert!(r > 2.0);
        // same first steps through the level-6 supertile, different tail
        let (pre, _) = t.address_tokens(&a);
        let tail: Vec<String> = ["a", "a", "a", "b"].iter().map(|s| s.to_string()).collect();
        let b = t.parse_address(&pre[..=level], Some(&tail)).unwrap();
        assert_eq!(t.orbit_displacement(&a, &b), None);
        let c = CylinderSet::new(a.clone(), 1.0 / r).unwrap();
        assert!(c.contains(&t, &a).unwrap());
        assert!(c.contains(&t, &b).unwrap());
        // a neighbour whose origin tile has the other letter
        let here = t.expand(&a, -0.1, 0.1, 0).unwrap();
        let letter = here.iter().find(|x| x.start.is_zero()).unwrap().letter;
        let other = t
            .expand(&a, 0.0, 6.0, 0)
            .unwrap()
            .into_iter()
            .find(|x| x.letter != letter)
            .unwrap();
        let far = t.reroot(&a, other.start).unwrap();
        assert!(!c.contains(&t, &far).unwrap());
    }

    #[test]
    fn chart_round_trip() {
        let t = fib();
        let base = t.canonical_address();
        let chart = Chart::new(
            &t,
            ChartBase::Cylinder(CylinderSet::new(base.clone(), 0.5).unwrap()),
            0.5,
        )
        .unwrap();
        let q = HullPoint::transversal(base.clone()).translate(0.3);
        let c = chart.decompose(&t, &q).unwrap();
        assert!((c.t() - 0.3).abs() < 1e-15);
        assert_eq!(c.transversal.address, base);
        assert!(same_point(&t, &chart.recompose(&c), &q));
        assert!(chart.decompose(&t, &q.translate(0.4)).is_err());
        assert!(Chart::new(&t, chart.base.clone(), 0.6).is_err());
    }

    #[test]
    fn normalize_keeps_the_point() {
        let t = fib();
        let p = HullPoint::origin(&t).translate(7.3);
        let n = p.normalize(&t).unwrap();
        assert!(same_point(&t, &p, &n));
        assert!(n.shift() >= 0.0 && n.shift() < 1.7);
    }

    #[test]
    fn json_round_trip() {
        let t = fib();
        let p = HullPoint::origin(&t)
            .translate_exact(GoldenNumber::new(2, -1))
            .translate(0.25);
        let v = p.to_json(&t);
        let q = HullPoint::from_json(&t, &v).unwrap();
        assert_eq!(p, q);
        let bad = serde_json::json!({"address": ["a"], "offsets": {"a": 0, "b": 0}});
        assert!(HullPoint::from_json(&t, &bad).is_err());
    }
}

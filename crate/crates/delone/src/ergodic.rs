//! Cluster counting and frequencies, the transversal measure, cylinder
//! measures of charts, and ergodic averages along orbits.
//!
//! Frequencies are reported per unit length; per-tile values divide by the
//! number of points in the same window instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Error, Result};
use crate::hull::{Chart, ChartBase, HullFunction, HullPoint};
use crate::quad::gauss_legendre;
use crate::sets::{occurrences, Cluster, Tiling};

/// Number of `t` with `P + t ⊂ [lo, hi) ∩ Λ` for the reference set.
pub fn cluster_count(tiling: &Tiling, cluster: &Cluster, lo: f64, hi: f64) -> Result<usize> {
    if hi <= lo {
        return Ok(0);
    }
    let d = cluster.diameter();
    // half-open window: drop occurrences whose last point reaches `hi`
    Ok(occurrences(tiling, cluster, lo, hi)?
        .into_iter()
        .filter(|p| p.to_f64() + d < hi)
        .count())
}

/// One window of a frequency estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowEstimate {
    pub window: f64,
    pub count: usize,
    pub points: usize,
    pub volume: f64,
    /// Per unit length.
    pub frequency: f64,
    /// Per point of the set.
    pub per_tile: f64,
}

/// Frequency of one cluster over a Følner sequence of centered windows.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyEntry {
    pub label: String,
    pub estimates: Vec<WindowEstimate>,
    /// `|estimate(L_n) − estimate(L_{n-1})|` for the last two windows.
    pub diagnostic: f64,
}

impl FrequencyEntry {
    pub fn frequency(&self) -> f64 {
        self.estimates.last().map_or(0.0, |e| e.frequency)
    }

    pub fn per_tile(&self) -> f64 {
        self.estimates.last().map_or(0.0, |e| e.per_tile)
    }
}

pub fn cluster_frequency(tiling: &Tiling, label: &str, cluster: &Cluster, windows: &[f64]) -> Result<FrequencyEntry> {
    if windows.is_empty() {
        return input("at least one window length is required");
    }
    if windows.windows(2).any(|w| w[1] <= w[0]) || windows[0] <= 0.0 {
        return input("window lengths must be positive and increasing");
    }
    let single = Cluster::line(vec![crate::GoldenNumber::ZERO]);
    let mut estimates = Vec::new();
    for &l in windows {
        let (lo, hi) = (-0.5 * l, 0.5 * l);
        let count = cluster_count(tiling, cluster, lo, hi)?;
        let points = cluster_count(tiling, &single, lo, hi)?;
        estimates.push(WindowEstimate {
            window: l,
            count,
            points,
            volume: l,
            frequency: count as f64 / l,
            per_tile: count as f64 / points.max(1) as f64,
        });
    }
    let n = estimates.len();
    let diagnostic = if n >= 2 {
        (estimates[n - 1].frequency - estimates[n - 2].frequency).abs()
    } else {
        f64::NAN
    };
    Ok(FrequencyEntry {
        label: label.to_string(),
        estimates,
        diagnostic,
    })
}

/// Frequencies of several clusters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrequencyTable {
    pub entries: Vec<FrequencyEntry>,
}

impl FrequencyTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cluster,window,count,volume,frequency,per_tile\n");
        for e in &self.entries {
            for w in &e.estimates {
                s.push_str(&format!(
                    "{},{:.16e},{},{:.16e},{:.16e},{:.16e}\n",
                    e.label, w.window, w.count, w.volume, w.frequency, w.per_tile
                ));
            }
        }
        s
    }
}

/// Transversal measure of the level-`i` cells (per-tile normalization).
#[derive(Clone, Debug, PartialEq)]
pub struct TransversalMeasure {
    pub level: usize,
    pub weights: Vec<f64>,
    pub parents: Vec<Option<u32>>,
}

pub fn transversal_measure(tiling: &Tiling, level: usize) -> Result<TransversalMeasure> {
    let cells = tiling.cells(level)?;
    Ok(TransversalMeasure {
        level,
        weights: cells.iter().map(|c| c.weight).collect(),
        parents: cells.iter().map(|c| c.parent).collect(),
    })
}

impl TransversalMeasure {
    /// Largest mismatch between parent weights and the sums of their
    /// children.
    pub fn refinement_defect(&self, coarse: &TransversalMeasure) -> f64 {
        let mut sums = vec![0.0; coarse.weights.len()];
        for (w, p) in self.weights.iter().zip(&self.parents) {
            if let Some(p) = p {
                sums[*p as usize] += w;
            }
        }
        sums.iter()
            .zip(&coarse.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-volume frequency of the chart base (cell or patch).
pub fn base_frequency(tiling: &Tiling, base: &ChartBase, window: f64) -> Result<f64> {
    match base {
        ChartBase::Cell { level, cell } => {
            let cells = tiling.cells(*level)?;
            let c = cells
                .get(*cell as usize)
                .ok_or_else(|| Error::Input(format!("no cell {cell} at level {level}")))?;
            Ok(c.weight / tiling.mean_tile_length())
        }
        ChartBase::Cylinder(c) => {
            // points of the reference set whose 1/ε-patch matches the center
            let r = 1.0 / c.epsilon;
            let pts = tiling.points(&tiling.canonical_address(), -0.5 * window - r, 0.5 * window + r)?;
            let target = tiling.points(&c.center, -r, r)?;
            let mut count = 0usize;
            for &p in pts.iter().filter(|p| p.to_f64().abs() < 0.5 * window) {
                let pf = p.to_f64();
                let lo = pts.partition_point(|x| x.to_f64() < pf - r - 1e-9);
                let hi = pts.partition_point(|x| x.to_f64() <= pf + r + 1e-9);
                let local: Vec<_> = pts[lo..hi]
                    .iter()
                    .filter(|x| (x.to_f64() - pf).abs() <= r)
                    .map(|&x| x - p)
                    .collect();
                if local == target {
                    count += 1;
                }
            }
            Ok(count as f64 / window)
        }
    }
}

/// `μ(O) = freq · 2ε` for a chart of translation radius ε.
pub fn cylinder_measure(tiling: &Tiling, chart: &Chart, window: f64) -> Result<f64> {
    let r = tiling.min_tile_length().to_f64();
    if chart.radius > r / 2.0 {
        return Err(Error::Domain("chart overlaps itself".into()));
    }
    Ok(base_frequency(tiling, &chart.base, window)? * 2.0 * chart.radius)
}

/// Indicator of a chart along the orbit of `start`, for sorted shifts.
fn chart_indicator(tiling: &Tiling, chart: &Chart, start: &HullPoint, lo: f64, hi: f64) -> Result<Vec<(f64, bool)>> {
    let s = start.shift();
    let eps = chart.radius;
    let margin = match &chart.base {
        ChartBase::Cylinder(c) => 1.0 / c.epsilon,
        ChartBase::Cell { .. } => 0.0,
    } + eps
        + 1.0;
    let level = match &chart.base {
        ChartBase::Cell { level, .. } => *level,
        ChartBase::Cylinder(_) => 0,
    };
    let tiles = tiling.expand(&start.address, lo + s - margin, hi + s + margin, level)?;
    let target = match &chart.base {
        ChartBase::Cylinder(c) => Some((
            tiling.points(&c.center, -1.0 / c.epsilon, 1.0 / c.epsilon)?,
            1.0 / c.epsilon,
        )),
        ChartBase::Cell { .. } => None,
    };
    let xs: Vec<f64> = tiles.iter().map(|t| t.x).collect();
    let mut marks = Vec::new();
    for t in &tiles {
        let x = t.x - s;
        if x < lo - eps || x > hi + eps {
            continue;
        }
        let inside = match (&chart.base, &target) {
            (ChartBase::Cell { cell, .. }, _) => t.cell == *cell,
            (ChartBase::Cylinder(_), Some((pts, r))) => {
                let a = xs.partition_point(|&y| y < t.x - r - 1e-9);
                let b = xs.partition_point(|&y| y <= t.x + r + 1e-9);
                let local: Vec<_> = tiles[a..b]
                    .iter()
                    .filter(|u| (u.x - t.x).abs() <= *r)
                    .map(|u| u.start - t.start)
                    .collect();
                &local == pts
            }
            _ => unreachable!(),
        };
        marks.push((x, inside));
    }
    Ok(marks)
}

/// Fraction of the orbit segment `[0, length]` of `start` spent in the
/// chart, computed exactly from the tile decomposition.
pub fn occupation_fraction(tiling: &Tiling, chart: &Chart, start: &HullPoint, length: f64) -> Result<f64> {
    let marks = chart_indicator(tiling, chart, start, 0.0, length)?;
    let eps = chart.radius;
    let mut total = 0.0;
    for (x, inside) in marks {
        if inside {
            let a = (x - eps).max(0.0);
            let b = (x + eps).min(length);
            if b > a {
                total += b - a;
            }
        }
    }
    Ok(total / length)
}

/// Monte Carlo occupation: `n` uniform times on `[0, length]`.
pub fn occupation_monte_carlo(
    tiling: &Tiling,
    chart: &Chart,
    start: &HullPoint,
    length: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let marks = chart_indicator(tiling, chart, start, 0.0, length)?;
    let centers: Vec<f64> = marks.iter().filter(|m| m.1).map(|m| m.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = chart.radius;
    let mut hits = 0usize;
    for _ in 0..n {
        let t: f64 = rng.random::<f64>() * length;
        let k = centers.partition_point(|&c| c < t - eps);
        if k < centers.len() && (centers[k] - t).abs() < eps {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    Ok((p, (p * (1.0 - p) / n as f64).sqrt()))
}

/// Averages `(1/|A_n|) ∫_{A_n} f(φ_t Λ) dt` over centered windows, with
/// Gauss–Legendre panels on each tile of the orbit.
pub fn ergodic_average(
    tiling: &Tiling,
    f: &dyn HullFunction,
    start: &HullPoint,
    windows: &[f64],
    order: usize,
) -> Result<Vec<f64>> {
    if windows.windows(2).any(|w| w[1] <= w[0]) || windows.first().is_some_and(|&w| w <= 0.0) {
        return input("window lengths must be positive and increasing");
    }
    let (gx, gw) = gauss_legendre(order);
    let s = start.shift();
    let mut out = Vec::new();
    for &l in windows {
        let (lo, hi) = (-0.5 * l, 0.5 * l);
        let tiles = tiling.expand(&start.address, lo + s, hi + s, 0)?;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for t in &tiles {
            let a = (t.x - s).max(lo);
            let b = (t.x + t.width - s).min(hi);
            if b <= a {
                continue;
            }
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(0.5 * (a + b) + 0.5 * (b - a) * x);
                weights.push(0.5 * (b - a) * w);
            }
        }
        let vals = f.along(tiling, start, &nodes)?;
        let num: f64 = vals.iter().zip(&weights).map(|(v, w)| v * w).sum();
        let den: f64 = weights.iter().sum();
        out.push(num / den);
    }
    Ok(out)
}

//! Harmonic functions and the one-dimensional Helmholtz–Hodge
//! decomposition on truncated function spaces.
//!
//! The glued space at level `(i, J)` holds the constants, a `cos⁴` bump
//! around the points of every level-`i` cell (radius half the shortest
//! tile) and the bubbles `sin(jπu/ℓ)`, `j ≤ J`, on the tiles of every cell.
//! All of these are continuous along orbits, so the orbit derivative is a
//! true weak derivative. The unglued control swaps the bumps for tile
//! indicators, whose jumps the piecewise derivative does not see.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::calculus::{cos4_bump, HullQuadrature, Piece, Support, Term, TlcFunction};
use crate::diffusion::{chunk_normals, MC_CHUNK};
use crate::error::{input, Error, Result};
use crate::hull::{HullFunction, HullPoint};
use crate::par;
use crate::quad::composite_legendre;
use crate::sets::Tiling;

/// Finite-dimensional subspace of `L²(Ω, μ)` with its Gram and energy
/// matrices.
#[derive(Clone, Debug)]
pub struct DiscreteL2Space {
    pub level: usize,
    pub modes: usize,
    pub glued: bool,
    pub functions: Vec<TlcFunction>,
}

fn bubbles(tiling: &Tiling, level: usize, modes: usize) -> Result<Vec<TlcFunction>> {
    let cells = tiling.cells(level)?;
    let mut out = Vec::new();
    for c in 0..cells.len() {
        for j in 1..=modes {
            out.push(TlcFunction::on_tiles(
                tiling,
                level,
                |k| {
                    if k == c {
                        let l = tiling.letter_length(cells[k].letter).to_f64();
                        vec![Term::sin(1.0, j as f64 * PI / l, 0.0)]
                    } else {
                        Vec::new()
                    }
                },
                1,
            )?);
        }
    }
    Ok(out)
}

impl DiscreteL2Space {
    pub fn glued(tiling: &Tiling, level: usize, modes: usize) -> Result<Self> {
        let n = tiling.cell_count(level)?;
        let h = 0.5 * tiling.min_tile_length().to_f64();
        let mut functions = vec![TlcFunction::constant(tiling, 1.0)?];
        for c in 0..n {
            let profiles = (0..n)
                .map(|k| {
                    if k == c {
                        vec![Piece {
                            lo: -h,
                            hi: h,
                            terms: cos4_bump(0.0, h),
                        }]
                    } else {
                        Vec::new()
                    }
                })
                .collect();
            functions.push(TlcFunction::new(
                tiling,
                level,
                Support::Ball { radius: h },
                profiles,
                3,
            )?);
        }
        functions.extend(bubbles(tiling, level, modes)?);
        Ok(DiscreteL2Space {
            level,
            modes,
            glued: true,
            functions,
        })
    }

    /// Negative control: tile indicators instead of glued bumps.
    pub fn unglued(tiling: &Tiling, level: usize, modes: usize) -> Result<Self> {
        let n = tiling.cell_count(level)?;
        let mut functions = Vec::new();
        for c in 0..n {
            functions.push(TlcFunction::on_tiles(
                tiling,
                level,
                |k| if k == c { vec![Term::constant(1.0)] } else { Vec::new() },
                1,
            )?);
        }
        functions.extend(bubbles(tiling, level, modes)?);
        Ok(DiscreteL2Space {
            level,
            modes,
            glued: false,
            functions,
        })
    }

    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    fn refs(&self) -> Vec<&TlcFunction> {
        self.functions.iter().collect()
    }

    /// `(G, A)`: Gram matrix and Dirichlet-form matrix `½⟨f_k′, f_l′⟩`.
    pub fn matrices(&self, tiling: &Tiling) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let q = HullQuadrature::new(tiling, &self.refs())?;
        let vals = self.values(tiling, &q, 0)?;
        let ders = self.values(tiling, &q, 1)?;
        Ok((gram(&vals, &vals, q.weights()), gram(&ders, &ders, q.weights()) * 0.5))
    }

    /// Node values of every basis function (or its derivative) as columns.
    fn values(&self, tiling: &Tiling, q: &HullQuadrature, order: usize) -> Result<DMatrix<f64>> {
        let cols: Vec<Vec<f64>> = par::map(&self.functions, |f| {
            f.derivative(order).and_then(|d| q.values(tiling, &d))
        })
        .into_iter()
        .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(q.len(), cols.len(), |r, c| cols[c][r]))
    }

    /// The function with coefficients `a` in this basis.
    pub fn combination(&self, a: &[f64]) -> Combination<'_> {
        Combination {
            space: self,
            coeffs: a.to_vec(),
        }
    }
}

fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let wb = DMatrix::from_fn(b.nrows(), b.ncols(), |r, c| b[(r, c)] * w[r]);
    a.transpose() * wb
}

/// `Σ a_k f_k` as a hull function.
pub struct Combination<'a> {
    space: &'a DiscreteL2Space,
    pub coeffs: Vec<f64>,
}

impl HullFunction for Combination<'_> {
    fn along(&self, tiling: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; shifts.len()];
        for (f, a) in self.space.functions.iter().zip(&self.coeffs) {
            if *a == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(f.along(tiling, base, shifts)?) {
                *o += a * v;
            }
        }
        Ok(out)
    }

    fn kinks(&self, tiling: &Tiling, base: &HullPoint, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (f, a) in self.space.functions.iter().zip(&self.coeffs) {
            if *a != 0.0 {
                out.extend(f.kinks(tiling, base, lo, hi)?);
            }
        }
        Ok(out)
    }
}

/// Result of the kernel computation for the Dirichlet-form matrix.
#[derive(Clone, Debug)]
pub struct KernelReport {
    pub dimension: usize,
    /// Generalized eigenvalues of `A v = λ G v`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Kernel vectors in the original basis.
    pub kernel: Vec<Vec<f64>>,
}

/// `G^{-1/2}`-whitening factor `L` with `G = L Lᵀ`.
fn cholesky(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    g.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Diagnostic("Gram matrix is not positive definite".into()))
}

/// Dimension of the kernel of the assembled Dirichlet form, eigenvalues
/// below `1e-8·λ_max` counted as zero.
pub fn liouville_kernel_dim(tiling: &Tiling, space: &DiscreteL2Space) -> Result<KernelReport> {
    let (g, a) = space.matrices(tiling)?;
    let l = cholesky(&g)?;
    let li = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Diagnostic("singular Gram factor".into()))?;
    let m = &li * a * li.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let zero: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] < 1e-8 * max)
        .collect();
    let lti = li.transpose();
    let kernel = zero
        .iter()
        .map(|&i| (&lti * eig.eigenvectors.column(i)).iter().copied().collect())
        .collect();
    Ok(KernelReport {
        dimension: zero.len(),
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        kernel,
    })
}

/// Orthogonal complement of `∇V` inside a field space `W`.
#[derive(Clone, Debug)]
pub struct HodgeReport {
    pub dimension: usize,
    /// Ratio of the smallest retained to the largest discarded singular
    /// value (infinite if the discarded ones vanish).
    pub gap_ratio: f64,
    pub singular_values: Vec<f64>,
    /// Orthonormal complement, as coefficients in the field basis.
    pub complement: Vec<Vec<f64>>,
}

/// Singular value decomposition of the projection of `∇V` onto `W`, in a
/// `W`-orthonormal frame; the complement is cut at the largest ratio
/// between consecutive singular values.
pub fn hodge_complement_dim(
    tiling: &Tiling,
    fields: &DiscreteL2Space,
    potentials: &DiscreteL2Space,
) -> Result<HodgeReport> {
    let mut all = fields.refs();
    all.extend(potentials.refs());
    let q = HullQuadrature::new(tiling, &all)?;
    let w = fields.values(tiling, &q, 0)?;
    let dv = potentials.values(tiling, &q, 1)?;
    let gw = gram(&w, &w, q.weights());
    let c = gram(&w, &dv, q.weights());
    let l = cholesky(&gw)?;
    let li = l
        .try_inverse()
        .ok_or_else(|| Error::Diagnostic("singular Gram factor".into()))?;
    let p = &li * c;
    let n = p.nrows();
    // left singular vectors from the symmetric matrix P Pᵀ
    let eig = SymmetricEigen::new(&p * p.transpose());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let sv: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let (mut cut, mut best) = (n, 0.0);
    for k in 0..n.saturating_sub(1) {
        let next = sv[k + 1];
        let ratio = if next > 0.0 { sv[k] / next } else { f64::INFINITY };
        if sv[k] > 0.0 && ratio > best {
            best = ratio;
            cut = k + 1;
        }
    }
    let lti = li.transpose();
    let complement = order[cut..]
        .iter()
        .map(|&i| {
            let u: DVector<f64> = eig.eigenvectors.column(i).into_owned();
            (&lti * u).iter().copied().collect()
        })
        .collect();
    Ok(HodgeReport {
        dimension: n - cut,
        gap_ratio: best,
        singular_values: sv,
        complement,
    })
}

/// The Hodge star for the reference form `ω₀ = dt` of unit fiber norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HodgeStar {
    pub dimension: usize,
}

impl HodgeStar {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension != 1 {
            return Err(Error::Unsupported("the Hodge star is implemented for d = 1".into()));
        }
        Ok(HodgeStar { dimension })
    }

    /// `⋆(f ω₀) = f` on coefficient vectors of a field.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    /// `⋆∇f = f′`.
    pub fn star_gradient(&self, f: &TlcFunction) -> Result<TlcFunction> {
        f.derivative(1)
    }
}

/// `max |f(Λ) − (1/2r)∫_{−r}^{r} f(φ_t Λ) dt|` over points and radii.
pub fn harmonic_check_meanvalue(
    tiling: &Tiling,
    f: &dyn HullFunction,
    points: &[HullPoint],
    radii: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in points {
        let centre = f.at(tiling, p)?;
        for &r in radii {
            if !(r > 0.0) {
                return input("radii must be positive");
            }
            let pieces = ((2.0 * r) / 0.02).ceil().max(1.0) as usize;
            let (x, w) = composite_legendre(-r, r, pieces, 12);
            let v = f.along(tiling, p, &x)?;
            let avg: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / (2.0 * r);
            worst = worst.max((centre - avg).abs());
        }
    }
    Ok(worst)
}

/// Monte Carlo martingale test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MartingaleResidual {
    pub residual: f64,
    pub sigma: f64,
    pub n: usize,
}

/// `|E f(X_{t∧τ}) − f(Λ)|` with `τ` the exit time of the orbit ball
/// `φ_{(−R, R)}(Λ)`. Paths are Euler walks of `steps` increments, stopped
/// at the boundary when they cross it.
#[allow(clippy::too_many_arguments)]
pub fn martingale_residual(
    tiling: &Tiling,
    f: &dyn HullFunction,
    start: &HullPoint,
    radius: f64,
    t: f64,
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<MartingaleResidual> {
    if !(radius > 0.0) || !(t > 0.0) || n < 2 || steps == 0 {
        return input("martingale test needs R > 0, t > 0, n ≥ 2 and at least one step");
    }
    let sd = (t / steps as f64).sqrt();
    let chunks = n.div_ceil(MC_CHUNK);
    let ends: Vec<f64> = par::map_range(chunks, |c| {
        let len = MC_CHUNK.min(n - c * MC_CHUNK);
        let z = chunk_normals(seed, c, len * steps);
        (0..len)
            .map(|k| {
                let mut x = 0.0f64;
                for s in 0..steps {
                    x += sd * z[k * steps + s];
                    if x.abs() >= radius {
                        return radius.copysign(x);
                    }
                }
                x
            })
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let vals = f.along(tiling, start, &ends)?;
    let f0 = f.at(tiling, start)?;
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(MartingaleResidual {
        residual: (mean - f0).abs(),
        sigma: (var / n as f64).sqrt(),
        n,
    })
}

/// Largest variance of `h` along sampled orbit segments, relative to the
/// mean square of `h`.
pub fn orbit_variance(
    tiling: &Tiling,
    h: &dyn HullFunction,
    starts: &[HullPoint],
    span: f64,
    samples: usize,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in starts {
        let ts: Vec<f64> = (0..samples).map(|k| span * k as f64 / samples as f64).collect();
        let v = h.along(tiling, p, &ts)?;
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
        let ms = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        worst = worst.max(if ms > 0.0 { var / ms } else { 0.0 });
    }
    Ok(worst)
}

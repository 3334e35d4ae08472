//! Truncated bases of `L²(O, μ)` on a chart `O = C × B_ε`, the local
//! Dirichlet Laplacian and its spectral calculus, the Dirichlet form, and
//! the Fourier–Bohr scan for Koopman eigenvalues.
//!
//! The transversal factor uses the per-volume measure `ν_C = weight/ℓ̄`, so
//! that `ν_C × Lebesgue` is exactly μ on the chart. The generator is `½Δ`,
//! hence `L^O b_ij = −½λ_j b_ij` and `ℰ(f, g) = ½∫⟨∇f, ∇g⟩ dμ`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::calculus::{carre_du_champ, orbit_integral, HullQuadrature, Piece, Support, Term, TlcFunction};
use crate::error::{input, Error, Result};
use crate::hull::{HullFunction, HullPoint};
use crate::quad::gauss_legendre;
use crate::sets::Tiling;

/// Haar-type orthonormal family in `L²(C, ν_C)`, constant on level-`i`
/// cells. `vectors[k][c]` is the value of the `k`-th vector on cell `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct CantorBasis {
    pub level: usize,
    pub weights: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Constants first, then weighted differences among the children of each
/// cell, level by level down the supertile tree.
pub fn cantor_basis(tiling: &Tiling, level: usize) -> Result<CantorBasis> {
    let ell = tiling.mean_tile_length();
    let cells = tiling.cells(level)?;
    let weights: Vec<f64> = cells.iter().map(|c| c.weight / ell).collect();
    if let Some(k) = weights.iter().position(|&w| !(w > 0.0)) {
        return input(format!("cell {k} at level {level} has zero weight"));
    }
    let n = weights.len();
    // groups: the letters at level 0, then the children of each cell
    let mut groups: Vec<Vec<Vec<usize>>> = Vec::new();
    for lvl in 0..=level {
        let map = crate::calculus::ancestor_map(tiling, level, lvl)?;
        let here = tiling.cells(lvl)?;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); here.len()];
        for (c, &a) in map.iter().enumerate() {
            members[a as usize].push(c);
        }
        let parent_of: Vec<usize> = here.iter().map(|c| c.parent.unwrap_or(0) as usize).collect();
        let nparents = if lvl == 0 { 1 } else { tiling.cell_count(lvl - 1)? };
        let mut by_parent: Vec<Vec<Vec<usize>>> = vec![Vec::new(); nparents];
        for (k, m) in members.into_iter().enumerate() {
            let p = if lvl == 0 { 0 } else { parent_of[k] };
            by_parent[p].push(m);
        }
        groups.extend(by_parent.into_iter().filter(|g| g.len() > 1));
    }
    let inner = |a: &[f64], b: &[f64]| -> f64 { (0..n).map(|c| weights[c] * a[c] * b[c]).sum() };
    let total: f64 = weights.iter().sum();
    let mut vectors = vec![vec![1.0 / total.sqrt(); n]];
    for g in groups {
        // children A_1..A_m of one parent: v_k = (Σ_{j<k} A_j)/ν(<k) − A_k/ν(A_k)
        let mass: Vec<f64> = g.iter().map(|a| a.iter().map(|&c| weights[c]).sum()).collect();
        for k in 1..g.len() {
            let before: f64 = mass[..k].iter().sum();
            let mut v = vec![0.0; n];
            for a in &g[..k] {
                for &c in a {
                    v[c] = 1.0 / before;
                }
            }
            for &c in &g[k] {
                v[c] = -1.0 / mass[k];
            }
            let norm = inner(&v, &v).sqrt();
            vectors.push(v.iter().map(|x| x / norm).collect());
        }
    }
    Ok(CantorBasis {
        level,
        weights,
        vectors,
    })
}

impl CantorBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.vectors.len();
        DMatrix::from_fn(m, m, |i, j| {
            self.weights
                .iter()
                .zip(&self.vectors[i])
                .zip(&self.vectors[j])
                .map(|((w, a), b)| w * a * b)
                .sum()
        })
    }
}

/// Dirichlet eigenfunctions `b_j(t) = ε^{-1/2} sin(jπ(t + ε)/2ε)` of `−Δ`
/// on `(−ε, ε)`, `j = 1..=J`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallBasis {
    pub eps: f64,
    pub modes: usize,
}

pub fn ball_dirichlet_basis(eps: f64, modes: usize) -> Result<BallBasis> {
    if !(eps > 0.0) || modes == 0 {
        return input("ball basis needs ε > 0 and at least one mode");
    }
    Ok(BallBasis { eps, modes })
}

impl BallBasis {
    /// `λ_j = (jπ/2ε)²`.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let k = j as f64 * PI / (2.0 * self.eps);
        k * k
    }

    pub fn terms(&self, j: usize) -> Term {
        let k = j as f64 * PI / (2.0 * self.eps);
        Term::sin(self.eps.powf(-0.5), k, k * self.eps)
    }

    pub fn value(&self, j: usize, t: f64) -> f64 {
        if t.abs() >= self.eps {
            return 0.0;
        }
        self.terms(j).value(t)
    }
}

/// `b_ij = b_i^C ⊗ b_j^B`; coefficients are stored `[i][j-1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductEigenbasis {
    pub cantor: CantorBasis,
    pub ball: BallBasis,
}

/// Coefficients in a product eigenbasis.
pub type Coefficients = Vec<Vec<f64>>;

impl ProductEigenbasis {
    pub fn new(tiling: &Tiling, level: usize, eps: f64, modes: usize) -> Result<Self> {
        Ok(ProductEigenbasis {
            cantor: cantor_basis(tiling, level)?,
            ball: ball_dirichlet_basis(eps, modes)?,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.cantor.len(), self.ball.modes)
    }

    fn check(&self, c: &[Vec<f64>]) -> Result<()> {
        let (m, j) = self.shape();
        if c.len() != m || c.iter().any(|r| r.len() != j) {
            return input(format!("coefficients must form a {m}×{j} array"));
        }
        Ok(())
    }

    /// The function `Σ c_ij b_ij` on the hull. Its profiles vanish at the
    /// edge of the ball, so it has one (weak) orbit derivative in `L²`.
    pub fn function(&self, tiling: &Tiling, c: &[Vec<f64>]) -> Result<TlcFunction> {
        self.check(c)?;
        let ncell = self.cantor.weights.len();
        let eps = self.ball.eps;
        let profiles = (0..ncell)
            .map(|cell| {
                let mut terms = Vec::new();
                for (i, row) in c.iter().enumerate() {
                    let v = self.cantor.vectors[i][cell];
                    for (j, &x) in row.iter().enumerate() {
                        if x != 0.0 && v != 0.0 {
                            let t = self.ball.terms(j + 1);
                            terms.push(match t {
                                Term::Trig {
                                    amp,
                                    freq,
                                    phase,
                                    quarter,
                                } => Term::Trig {
                                    amp: amp * v * x,
                                    freq,
                                    phase,
                                    quarter,
                                },
                                other => other,
                            });
                        }
                    }
                }
                if terms.is_empty() {
                    Vec::new()
                } else {
                    vec![Piece {
                        lo: -eps,
                        hi: eps,
                        terms,
                    }]
                }
            })
            .collect();
        TlcFunction::new(tiling, self.cantor.level, Support::Ball { radius: eps }, profiles, 1)
    }

    pub fn unit(&self, i: usize, j: usize) -> Coefficients {
        let (m, jj) = self.shape();
        let mut c = vec![vec![0.0; jj]; m];
        c[i][j - 1] = 1.0;
        c
    }
}

pub fn norm(c: &[Vec<f64>]) -> f64 {
    c.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn complex_norm(c: &[Vec<Complex64>]) -> f64 {
    c.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn coefficient_inner(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x * y).sum()
}

/// A function of the local Laplacian, diagonal in the product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralOperator {
    pub basis: ProductEigenbasis,
    /// Eigenvalue of `b_ij`, depending on `j` only.
    pub symbol: Vec<f64>,
}

/// `L^O` with `L^O b_ij = −½ λ_j b_ij`.
pub fn local_laplacian(basis: &ProductEigenbasis) -> SpectralOperator {
    SpectralOperator {
        basis: basis.clone(),
        symbol: (1..=basis.ball.modes)
            .map(|j| -0.5 * basis.ball.eigenvalue(j))
            .collect(),
    }
}

impl SpectralOperator {
    pub fn apply(&self, c: &[Vec<f64>]) -> Result<Coefficients> {
        self.basis.check(c)?;
        Ok(c.iter()
            .map(|r| r.iter().zip(&self.symbol).map(|(x, s)| x * s).collect())
            .collect())
    }

    /// Distinct eigenvalues with multiplicities, in mode order.
    pub fn spectrum(&self) -> Vec<(f64, usize)> {
        self.symbol.iter().map(|&s| (s, self.basis.cantor.len())).collect()
    }

    pub fn spectrum_csv(&self) -> String {
        let mut s = String::from("j,multiplicity,eigenvalue\n");
        for (j, (v, m)) in self.spectrum().iter().enumerate() {
            s.push_str(&format!("{},{},{:.16e}\n", j + 1, m, v));
        }
        s
    }
}

/// `ℰ(f, g) = ½ ∫ f′ g′ dμ` by quadrature.
pub fn dirichlet_energy(tiling: &Tiling, f: &TlcFunction, g: &TlcFunction) -> Result<f64> {
    let (df, dg) = (f.derivative(1)?, g.derivative(1)?);
    let q = HullQuadrature::new(tiling, &[f, g])?;
    Ok(0.5 * q.inner(tiling, &df, &dg)?)
}

/// `(1/2|A_n|) ∫_{A_n} (h^*f)′ (h^*g)′ dt` over centered windows.
pub fn energy_by_ergodic_average(
    tiling: &Tiling,
    f: &TlcFunction,
    g: &TlcFunction,
    start: &HullPoint,
    windows: &[f64],
) -> Result<Vec<f64>> {
    let gamma = carre_du_champ(f, g)?;
    windows
        .iter()
        .map(|&l| Ok(0.5 * orbit_integral(tiling, &gamma, &[f, g], start, -0.5 * l, 0.5 * l)? / l))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareCheck {
    pub holds: bool,
    /// `½λ_1 ∫f² / ℰ(f)`, at most 1 when the inequality holds.
    pub ratio: f64,
    pub l2: f64,
    pub energy: f64,
}

/// Checks `∫_O f² dμ ≤ (½λ_1)^{-1} ℰ^O(f)` with `10⁻¹⁰` slack, both sides
/// by quadrature.
pub fn poincare_check(tiling: &Tiling, basis: &ProductEigenbasis, c: &[Vec<f64>]) -> Result<PoincareCheck> {
    let f = basis.function(tiling, c)?;
    let q = HullQuadrature::new(tiling, &[&f])?;
    let l2 = q.inner(tiling, &f, &f)?;
    let energy = dirichlet_energy(tiling, &f, &f)?;
    let half = 0.5 * basis.ball.eigenvalue(1);
    Ok(PoincareCheck {
        holds: l2 <= energy / half + 1e-10,
        ratio: if energy > 0.0 { half * l2 / energy } else { 0.0 },
        l2,
        energy,
    })
}

/// Heat flow `e^{tL^O}`, coefficientwise `e^{−½λ_j t}`.
pub fn heat_evolve_spectral(basis: &ProductEigenbasis, c: &[Vec<f64>], t: f64) -> Result<Coefficients> {
    if !(t >= 0.0) {
        return input("heat evolution needs t ≥ 0");
    }
    let op = local_laplacian(basis);
    op.basis.check(c)?;
    Ok(c.iter()
        .map(|r| r.iter().zip(&op.symbol).map(|(x, s)| x * (s * t).exp()).collect())
        .collect())
}

/// Schrödinger flow `e^{itL^O}`, coefficientwise `e^{−i½λ_j t}`.
pub fn schrodinger_evolve(basis: &ProductEigenbasis, c: &[Vec<f64>], t: f64) -> Result<Vec<Vec<Complex64>>> {
    if !t.is_finite() {
        return input("Schrödinger evolution needs a finite time");
    }
    let op = local_laplacian(basis);
    op.basis.check(c)?;
    Ok(c.iter()
        .map(|r| {
            r.iter()
                .zip(&op.symbol)
                .map(|(x, s)| Complex64::from_polar(*x, s * t))
                .collect()
        })
        .collect())
}

/// Fourier–Bohr amplitudes `|(1/L) ∫_0^L e^{−2πiαt} g(φ_t Λ) dt|`.
pub fn koopman_eigen_search(
    tiling: &Tiling,
    g: &dyn HullFunction,
    start: &HullPoint,
    alphas: &[f64],
    window: f64,
) -> Result<Vec<f64>> {
    if !(window > 0.0) {
        return input("window must be positive");
    }
    let (gx, gw) = gauss_legendre(10);
    let s = start.shift();
    let tiles = tiling.expand(&start.address, s, s + window, 0)?;
    let mut cuts: Vec<f64> = vec![0.0];
    cuts.extend(tiles.iter().map(|t| t.x - s).filter(|&x| x > 0.0 && x < window));
    cuts.push(window);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for e in cuts.windows(2) {
        let m = ((e[1] - e[0]) / 0.25).ceil().max(1.0) as usize;
        let h = (e[1] - e[0]) / m as f64;
        for p in 0..m {
            let a = e[0] + p as f64 * h;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(a + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
    }
    let vals = g.along(tiling, start, &nodes)?;
    let out = crate::par::map(alphas, |&a| {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((t, v), w) in nodes.iter().zip(&vals).zip(&weights) {
            acc += Complex64::from_polar(w * v, -2.0 * PI * a * t);
        }
        acc.norm() / window
    });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite Fourier–Bohr coefficient".into()));
    }
    Ok(out)
}

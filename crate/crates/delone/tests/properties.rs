//! Property tests for the structural invariants of each module.

mod common;

use common::{fib, interior};
use delone::calculus::{cell_comb, cos4_bump, sobolev_norm, tlc_project, TlcFunction};
use delone::diffusion::{sample_path, semigroup_apply_quadrature, Rule};
use delone::ergodic::{cluster_count, cylinder_measure};
use delone::hull::{
    hull_metric, orbit_displacement, orbit_metric, origin_cell, Chart, ChartBase, CylinderSet, HullFunction, HullPoint,
};
use delone::sets::{clusters_in_window, patch, Address, Cluster, DeloneSet, Tiling};
use delone::spectral::{coefficient_inner, dirichlet_energy, heat_evolve_spectral, local_laplacian, ProductEigenbasis};
use delone::GoldenNumber;
use proptest::prelude::*;

const CAP: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Transversal point at the `k`-th point right of the reference origin.
fn transversal(t: &Tiling, k: usize) -> Address {
    let base = interior(t);
    let pts = t.points(&base.address, 0.0, 3.0 * (k as f64 + 2.0)).unwrap();
    t.reroot(&base.address, pts[k % pts.len()]).unwrap()
}

fn tails(t: &Tiling) -> Vec<Address> {
    ["aab", "aaab", "aabab", "aaaab"]
        .iter()
        .map(|s| {
            let toks: Vec<String> = s.chars().map(|c| c.to_string()).collect();
            t.parse_address(&[], Some(&toks)).unwrap()
        })
        .collect()
}

fn sample_point(t: &Tiling, tail: usize, k: usize, drift: f64) -> HullPoint {
    let base = HullPoint::transversal(tails(t)[tail % 4].clone());
    let pts = t.points(&base.address, 0.0, 40.0).unwrap();
    HullPoint::transversal(t.reroot(&base.address, pts[k % pts.len()]).unwrap()).translate(drift)
}

fn comb(t: &Tiling) -> TlcFunction {
    cell_comb(t, 1, &[0, 2], 0.2, cos4_bump(0.0, 0.2), 3).unwrap()
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn golden_coordinates_are_exact(a in -10_000i64..10_000, b in -10_000i64..10_000) {
        let x = GoldenNumber::new(a, b);
        prop_assert_eq!((x + x) - x, x);
        prop_assert_eq!(x.to_string().parse::<GoldenNumber>().unwrap(), x);
    }

    #[test]
    fn metric_axioms(
        i in (0usize..4, 0usize..30, -0.3f64..0.3),
        j in (0usize..4, 0usize..30, -0.3f64..0.3),
        k in (0usize..4, 0usize..30, -0.3f64..0.3),
    ) {
        let t = fib();
        let tol = 1e-9;
        let p = [i, j, k].map(|(a, b, c)| sample_point(&t, a, b, c));
        let d = |x: &HullPoint, y: &HullPoint| hull_metric(&t, x, &t, y, tol).unwrap();
        let (pq, qp) = (d(&p[0], &p[1]), d(&p[1], &p[0]));
        prop_assert_eq!(pq, qp);
        let (qr, pr) = (d(&p[1], &p[2]), d(&p[0], &p[2]));
        prop_assert!(pr <= pq + qr + 2.0 * tol, "{pr} > {pq} + {qr}");
        for v in [pq, qr, pr] {
            prop_assert!((0.0..=CAP).contains(&v));
        }
    }

    #[test]
    fn metric_is_dominated_by_orbit_distance(k in 0usize..30, s in -0.4f64..0.4) {
        let t = fib();
        let p = sample_point(&t, 0, k, 0.0);
        let q = p.translate(s);
        let rho = hull_metric(&t, &p, &t, &q, 1e-9).unwrap();
        prop_assert!(rho <= 2.0 * orbit_metric(&t, &p, &q) + 1e-9);
    }

    #[test]
    fn charts_are_bijective(k in 0usize..40, u in -0.45f64..0.45) {
        let t = fib();
        let a = transversal(&t, k);
        let chart = Chart::new(&t, ChartBase::Cell { level: 1, cell: origin_cell(&t, &a, 1).unwrap() }, 0.5).unwrap();
        let q = HullPoint::transversal(a).translate(u);
        let c = chart.decompose(&t, &q).unwrap();
        prop_assert!((c.t() - u).abs() < 1e-15);
        let back = chart.recompose(&c);
        prop_assert_eq!(&back, &q);
        prop_assert_eq!(chart.decompose(&t, &back).unwrap(), c);
    }

    #[test]
    fn cylinders_grow_with_epsilon(k in 0usize..60, e1 in 0.02f64..0.5, e2 in 0.02f64..0.5) {
        let t = fib();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let center = transversal(&t, 0);
        // agreement on the larger ball B_{1/lo} implies agreement on B_{1/hi}
        let narrow = CylinderSet::new(center.clone(), lo).unwrap();
        let wide = CylinderSet::new(center, hi).unwrap();
        let q = transversal(&t, k);
        if narrow.contains(&t, &q).unwrap() {
            prop_assert!(wide.contains(&t, &q).unwrap());
        }
    }

    #[test]
    fn frequencies_are_translation_invariant(x in -5000.0f64..5000.0, l in 200.0f64..2000.0, w in 0usize..3) {
        let t = fib();
        let word = ["a", "ab", "aab"][w];
        let c = Cluster::from_word(&t, word).unwrap();
        let f = |lo: f64, len: f64| cluster_count(&t, &c, lo, lo + len).unwrap() as f64 / len;
        // bounded discrepancy of the Fibonacci word: O(1/L), shrinking as L doubles
        prop_assert!((f(x, l) - f(0.0, l)).abs() <= 6.0 / l);
        prop_assert!((f(x, 2.0 * l) - f(0.0, 2.0 * l)).abs() <= 6.0 / (2.0 * l));
    }

    #[test]
    fn child_charts_partition_their_parent(radius in 0.05f64..0.5) {
        let t = fib();
        let parents = t.cells(0).unwrap();
        let children = t.cells(1).unwrap();
        let anc = delone::calculus::ancestor_map(&t, 1, 0).unwrap();
        for (pc, _) in parents.iter().enumerate() {
            let whole = cylinder_measure(&t, &Chart::new(&t, ChartBase::Cell { level: 0, cell: pc as u32 }, radius).unwrap(), 1e4).unwrap();
            let parts: f64 = (0..children.len())
                .filter(|&c| anc[c] as usize == pc)
                .map(|c| cylinder_measure(&t, &Chart::new(&t, ChartBase::Cell { level: 1, cell: c as u32 }, radius).unwrap(), 1e4).unwrap())
                .sum();
            prop_assert!((whole - parts).abs() < 1e-10, "{whole} vs {parts}");
        }
    }

    #[test]
    fn semigroup_is_conservative_and_positive(k in 0usize..30, s in -1.0f64..1.0, time in 0.01f64..4.0) {
        let t = fib();
        let p = sample_point(&t, 1, k, s);
        let one = TlcFunction::constant(&t, 1.0).unwrap();
        prop_assert_eq!(semigroup_apply_quadrature(&t, &one, time, &p, &Rule::default()).unwrap().value, 1.0);
        let f = comb(&t);
        let v = semigroup_apply_quadrature(&t, &f, time, &p, &Rule::default()).unwrap().value;
        prop_assert!((-1e-15..=1.0 + 1e-12).contains(&v), "{v}");
        // order preservation: f ≤ f + h with h ≥ 0 ⇒ T_t f ≤ T_t(f + h)
        let h = cell_comb(&t, 1, &[1], 0.2, cos4_bump(0.0, 0.2), 3).unwrap();
        let g = TlcFunction::combine(&t, 1.0, &f, 1.0, &h).unwrap();
        let w = semigroup_apply_quadrature(&t, &g, time, &p, &Rule::default()).unwrap().value;
        prop_assert!(w >= v - 1e-14);
    }

    #[test]
    fn semigroup_law(k in 0usize..30, s in 0.05f64..0.6, u in 0.05f64..0.6) {
        let t = fib();
        let f = comb(&t);
        let p = sample_point(&t, 2, k, 0.1);
        let r = Rule::default();
        let inner = delone::diffusion::SemigroupImage { f: &f, t: u, rule: r };
        let nested = semigroup_apply_quadrature(&t, &inner, s, &p, &r).unwrap().value;
        let direct = semigroup_apply_quadrature(&t, &f, s + u, &p, &r).unwrap().value;
        prop_assert!((nested - direct).abs() < 1e-6, "{nested} vs {direct}");
    }

    #[test]
    fn semigroup_is_lipschitz_along_orbits(k in 0usize..30, d in 1e-4f64..1e-2, time in 0.05f64..1.0) {
        let t = fib();
        let f = comb(&t);
        let p = sample_point(&t, 3, k, 0.0);
        let grid: Vec<f64> = (0..=20_000).map(|i| -10.0 + i as f64 * 1e-3).collect();
        let lip = f.derivative(1).unwrap().along(&t, &p, &grid).unwrap().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let r = Rule::default();
        let a = semigroup_apply_quadrature(&t, &f, time, &p, &r).unwrap().value;
        let b = semigroup_apply_quadrature(&t, &f, time, &p.translate(d), &r).unwrap().value;
        prop_assert!((a - b).abs() <= 1.01 * lip * d + 1e-12);
    }

    #[test]
    fn paths_stay_on_their_orbit(seed in any::<u64>(), k in 0usize..30) {
        let t = fib();
        let p = sample_point(&t, 0, k, 0.3);
        let path = sample_path(&p, &[0.0, 0.5, 1.0, 5.0], seed).unwrap();
        for q in &path.states {
            prop_assert_eq!(&q.address, &p.address);
            prop_assert!(orbit_displacement(&t, &p, q).is_some());
        }
    }

    #[test]
    fn pullback_intertwines_derivatives(k in 0usize..30, s in -3.0f64..3.0) {
        let t = fib();
        let f = comb(&t);
        let df = f.derivative(1).unwrap();
        let p = sample_point(&t, 1, k, 0.0);
        let h = 1e-5;
        let v = f.along(&t, &p, &[s - h, s + h]).unwrap();
        let fd = (v[1] - v[0]) / (2.0 * h);
        prop_assert!((fd - df.along(&t, &p, &[s]).unwrap()[0]).abs() < 1e-6 * (1.0 + fd.abs()) * 1e2);
    }

    #[test]
    fn projection_contracts_sobolev_norms(cells in proptest::collection::btree_set(0u32..5, 1..5), level in 0usize..3) {
        let t = fib();
        let cells: Vec<u32> = cells.into_iter().collect();
        let f = cell_comb(&t, 2, &cells, 0.2, cos4_bump(0.0, 0.2), 3).unwrap();
        let g = tlc_project(&t, &f, level).unwrap();
        for k in 0..=2 {
            prop_assert!(sobolev_norm(&t, &g, k).unwrap() <= sobolev_norm(&t, &f, k).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn local_laplacian_is_self_adjoint_and_matches_energy(
        a in proptest::collection::vec(-1.0f64..1.0, 12),
        b in proptest::collection::vec(-1.0f64..1.0, 12),
    ) {
        let t = fib();
        let basis = ProductEigenbasis::new(&t, 1, 0.3, 4).unwrap();
        let (m, n) = basis.shape();
        prop_assume!(m * n <= 12);
        let shape = |v: &[f64]| -> Vec<Vec<f64>> { (0..m).map(|i| v[i * n..(i + 1) * n].to_vec()).collect() };
        let (ca, cb) = (shape(&a), shape(&b));
        let op = local_laplacian(&basis);
        let lhs = coefficient_inner(&op.apply(&ca).unwrap(), &cb);
        let rhs = coefficient_inner(&ca, &op.apply(&cb).unwrap());
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        let f = basis.function(&t, &ca).unwrap();
        let e = dirichlet_energy(&t, &f, &f).unwrap();
        let spectral = -coefficient_inner(&op.apply(&ca).unwrap(), &ca);
        prop_assert!((e - spectral).abs() < 1e-8 * (1.0 + e.abs()), "{e} vs {spectral}");
    }

    #[test]
    fn heat_symbol_is_multiplicative(a in proptest::collection::vec(-1.0f64..1.0, 12), s in 0.0f64..2.0, u in 0.0f64..2.0) {
        let t = fib();
        let basis = ProductEigenbasis::new(&t, 1, 0.3, 4).unwrap();
        let (m, n) = basis.shape();
        prop_assume!(m * n <= 12);
        let c: Vec<Vec<f64>> = (0..m).map(|i| a[i * n..(i + 1) * n].to_vec()).collect();
        let two = heat_evolve_spectral(&basis, &heat_evolve_spectral(&basis, &c, s).unwrap(), u).unwrap();
        let one = heat_evolve_spectral(&basis, &c, s + u).unwrap();
        for (x, y) in two.iter().flatten().zip(one.iter().flatten()) {
            prop_assert!((x - y).abs() <= 1e-15 * (1.0 + y.abs()) * 4.0);
        }
    }
}

#[test]
fn cluster_classes_stabilize_with_the_scan_window() {
    let t = fib();
    for radius in [1.0, 2.5, 4.0] {
        let counts: Vec<usize> = [200.0, 400.0, 800.0]
            .iter()
            .map(|&scan| clusters_in_window(&t, radius, scan).unwrap().len())
            .collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]), "radius {radius}: {counts:?}");
    }
}

#[test]
fn fibonacci_has_no_return_vector_up_to_twenty() {
    let t = fib();
    let set = DeloneSet::Line(t.clone());
    let base = patch(&set, &[0.0], 50.0).unwrap();
    let Cluster::Line(pts) = &base else {
        panic!("line patch")
    };
    let mut candidates: Vec<GoldenNumber> = Vec::new();
    for p in pts {
        for q in pts {
            let d = *q - *p;
            if !d.is_zero() && d.to_f64().abs() <= 20.0 {
                candidates.push(d);
            }
        }
    }
    candidates.sort();
    candidates.dedup();
    assert!(!candidates.is_empty());
    for d in candidates {
        let shifted = patch(&set, &[d.to_f64()], 50.0).unwrap();
        let Cluster::Line(q) = &shifted else {
            panic!("line patch")
        };
        let back: Vec<GoldenNumber> = q.iter().map(|&x| x - d).collect();
        assert_ne!(&back, pts, "return vector {d}");
    }
}

#![allow(dead_code)]

use std::f64::consts::PI;

use delone::calculus::{Piece, Support, Term, TlcFunction};
use delone::hull::{HullFunction, HullPoint};
use delone::sets::{DeloneSpec, Tiling};
use delone::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fib() -> Tiling {
    DeloneSpec::fibonacci().build_line().unwrap()
}

pub fn torus() -> Tiling {
    DeloneSpec::integers().build_line().unwrap()
}

/// A point whose address follows the periodic path, so its origin sits
/// deep inside supertiles of every level.
pub fn interior(t: &Tiling) -> HullPoint {
    HullPoint::transversal(t.parse_address(&[], None).unwrap())
}

/// `cos(2πx)` on the lattice orbit, `amp` times, plus `offset`.
pub struct TorusMode {
    pub offset: f64,
    pub amp: f64,
}

impl HullFunction for TorusMode {
    fn along(&self, _: &Tiling, base: &HullPoint, shifts: &[f64]) -> Result<Vec<f64>> {
        let s = base.shift();
        Ok(shifts
            .iter()
            .map(|x| self.offset + self.amp * (2.0 * PI * (x + s)).cos())
            .collect())
    }
}

/// A ball-supported tlc function whose value and first derivative vanish
/// at `±ε`, with random trigonometric profiles per cell.
pub fn random_comb(f: &Tiling, rng: &mut ChaCha8Rng, level: usize) -> TlcFunction {
    let eps = 0.2;
    let n = f.cell_count(level).unwrap();
    let profiles = (0..n)
        .map(|_| {
            let mut terms = Vec::new();
            for k in 1..4 {
                let a: f64 = rng.random_range(-1.0..1.0);
                let kf = k as f64;
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

/// Substitution `a → ab, b → a` applied `n` times to `a`, by string
/// rewriting.
pub fn fibonacci_word(n: usize) -> String {
    let mut w = String::from("a");
    for _ in 0..n {
        w = w.chars().map(|c| if c == 'a' { "ab" } else { "a" }).collect();
    }
    w
}

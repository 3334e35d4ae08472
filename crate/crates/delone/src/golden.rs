//! Exact arithmetic in the ring Z[φ], φ = (1+√5)/2.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PHI: f64 = 1.618_033_988_749_895;
// Low word of φ so that PHI + PHI_LO carries ~106 bits.
const PHI_LO: f64 = -5.432_115_203_682_506e-17;

/// The number `a + b·φ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoldenNumber {
    pub a: i64,
    pub b: i64,
}

impl GoldenNumber {
    pub const ZERO: GoldenNumber = GoldenNumber { a: 0, b: 0 };
    pub const ONE: GoldenNumber = GoldenNumber { a: 1, b: 0 };
    pub const PHI: GoldenNumber = GoldenNumber { a: 0, b: 1 };

    pub const fn new(a: i64, b: i64) -> Self {
        GoldenNumber { a, b }
    }

    pub const fn int(a: i64) -> Self {
        GoldenNumber { a, b: 0 }
    }

    /// Galois conjugate `a + b·φ'` with φ' = 1 − φ.
    pub fn conjugate(self) -> Self {
        GoldenNumber::new(self.a + self.b, -self.b)
    }

    /// Field norm `(a + bφ)(a + bφ')`.
    pub fn norm(self) -> i64 {
        self.a * self.a + self.a * self.b - self.b * self.b
    }

    pub fn signum(self) -> i32 {
        // a + bφ = ((2a + b) + b√5) / 2
        let u = 2 * self.a as i128 + self.b as i128;
        let v = self.b as i128;
        let su = u.signum();
        let sv = v.signum();
        if su == 0 {
            return sv as i32;
        }
        if sv == 0 || su == sv {
            return su as i32;
        }
        let lhs = u * u;
        let rhs = 5 * v * v;
        match lhs.cmp(&rhs) {
            Ordering::Greater => su as i32,
            Ordering::Less => sv as i32,
            Ordering::Equal => 0,
        }
    }

    pub fn is_zero(self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn abs(self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self
        }
    }

    /// Nearest double, computed in double-double so the map is monotone.
    pub fn to_f64(self) -> f64 {
        let b = self.b as f64;
        let p = b * PHI;
        let p_err = b.mul_add(PHI, -p);
        let lo = b.mul_add(PHI_LO, p_err);
        let a = self.a as f64;
        let s = a + p;
        let bb = s - a;
        let s_err = (a - (s - bb)) + (p - bb);
        s + (s_err + lo)
    }

    pub fn pow(self, n: u32) -> Self {
        let mut acc = GoldenNumber::ONE;
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }

    /// φ^n for any integer n, using φ^-1 = φ - 1.
    pub fn phi_pow(n: i32) -> Self {
        if n >= 0 {
            GoldenNumber::PHI.pow(n as u32)
        } else {
            GoldenNumber::new(-1, 1).pow((-n) as u32)
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl Ord for GoldenNumber {
    fn cmp(&self, other: &Self) -> Ordering {
        (*self - *other).signum().cmp(&0)
    }
}

impl PartialOrd for GoldenNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for GoldenNumber {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        GoldenNumber::new(self.a + o.a, self.b + o.b)
    }
}

impl Sub for GoldenNumber {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        GoldenNumber::new(self.a - o.a, self.b - o.b)
    }
}

impl Neg for GoldenNumber {
    type Output = Self;
    fn neg(self) -> Self {
        GoldenNumber::new(-self.a, -self.b)
    }
}

impl Mul for GoldenNumber {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        // φ² = φ + 1
        let bb = self.b * o.b;
        GoldenNumber::new(self.a * o.a + bb, self.a * o.b + self.b * o.a + bb)
    }
}

impl Mul<i64> for GoldenNumber {
    type Output = Self;
    fn mul(self, k: i64) -> Self {
        GoldenNumber::new(self.a * k, self.b * k)
    }
}

impl AddAssign for GoldenNumber {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for GoldenNumber {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl std::iter::Sum for GoldenNumber {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(GoldenNumber::ZERO, |x, y| x + y)
    }
}

impl fmt::Display for GoldenNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a, self.b) {
            (a, 0) => write!(f, "{a}"),
            (0, 1) => write!(f, "phi"),
            (0, -1) => write!(f, "-phi"),
            (0, b) => write!(f, "{b}phi"),
            (a, 1) => write!(f, "{a}+phi"),
            (a, -1) => write!(f, "{a}-phi"),
            (a, b) if b > 0 => write!(f, "{a}+{b}phi"),
            (a, b) => write!(f, "{a}{b}phi"),
        }
    }
}

/// Parses forms like `1`, `phi`, `-2phi`, `3+2phi`, `1-phi`, `2*phi`.
impl FromStr for GoldenNumber {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("not an element of Z[phi]: {s:?}"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(bad());
        }
        let mut terms = Vec::new();
        let mut start = 0;
        for (i, c) in t.char_indices() {
            if i > 0 && (c == '+' || c == '-') {
                terms.push(&t[start..i]);
                start = i;
            }
        }
        terms.push(&t[start..]);
        let mut out = GoldenNumber::ZERO;
        for term in terms {
            let (sign, body) = match term.strip_prefix('-') {
                Some(rest) => (-1, rest),
                None => (1, term.strip_prefix('+').unwrap_or(term)),
            };
            if let Some(coef) = body.strip_suffix("phi") {
                let coef = coef.strip_suffix('*').unwrap_or(coef);
                let k: i64 = if coef.is_empty() {
                    1
                } else {
                    coef.parse().map_err(|_| bad())?
                };
                out.b += sign * k;
            } else {
                let k: i64 = body.parse().map_err(|_| bad())?;
                out.a += sign * k;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phi_squared_is_phi_plus_one() {
        let p = GoldenNumber::PHI;
        assert_eq!(p * p, p + GoldenNumber::ONE);
    }

    #[test]
    fn sign_of_near_cancellation() {
        // F(n+1) - F(n)·φ alternates in sign and shrinks
        let x = GoldenNumber::new(17711, -10946);
        assert_eq!(x.signum(), -1);
        let y = GoldenNumber::new(28657, -17711);
        assert_eq!(y.signum(), 1);
        assert_eq!(GoldenNumber::ZERO.signum(), 0);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["1", "phi", "-2phi", "3+2phi", "1-phi", "-4-7phi", "0"] {
            let g: GoldenNumber = s.parse().unwrap();
            let again: GoldenNumber = g.to_string().parse().unwrap();
            assert_eq!(g, again);
        }
        assert_eq!("2*phi".parse::<GoldenNumber>().unwrap(), GoldenNumber::new(0, 2));
        assert!("x".parse::<GoldenNumber>().is_err());
    }

    #[test]
    fn negative_powers() {
        let inv = GoldenNumber::phi_pow(-1);
        assert_eq!(inv * GoldenNumber::PHI, GoldenNumber::ONE);
        assert!((GoldenNumber::phi_pow(-3).to_f64() - 0.236_067_977_499_789_7).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ring_laws(a in -1000i64..1000, b in -1000i64..1000, c in -1000i64..1000,
                     d in -1000i64..1000, e in -1000i64..1000, f in -1000i64..1000) {
            let x = GoldenNumber::new(a, b);
            let y = GoldenNumber::new(c, d);
            let z = GoldenNumber::new(e, f);
            prop_assert_eq!(x * (y + z), x * y + x * z);
            prop_assert_eq!((x * y) * z, x * (y * z));
            prop_assert_eq!(x * y, y * x);
            prop_assert_eq!((x * y).norm(), x.norm() * y.norm());
        }

        #[test]
        fn order_matches_reals(a in -100000i64..100000, b in -100000i64..100000,
                               c in -100000i64..100000, d in -100000i64..100000) {
            let x = GoldenNumber::new(a, b);
            let y = GoldenNumber::new(c, d);
            let exact = x.cmp(&y);
            // to_f64 is monotone: never reverses a strict exact order
            match exact {
                Ordering::Less => prop_assert!(x.to_f64() <= y.to_f64()),
                Ordering::Greater => prop_assert!(x.to_f64() >= y.to_f64()),
                Ordering::Equal => prop_assert_eq!(x.to_f64(), y.to_f64()),
            }
            let approx = (a as f64 + b as f64 * 1.618_033_988_749_895) - (c as f64 + d as f64 * 1.618_033_988_749_895);
            if approx.abs() > 1e-6 {
                prop_assert_eq!(exact, approx.partial_cmp(&0.0).unwrap());
            }
        }
    }
}

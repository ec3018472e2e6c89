//! Scalar arithmetic back ends for the divided-difference kernels: plain
//! doubles with compensated sums, and binary multiprecision floats.

use std::f64::consts::LN_2;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

/// Binary multiprecision float with round-half-even.
pub type Mp = FBig<HalfEven, 2>;

/// Operations the divided-difference kernels need from a scalar type.
pub trait Arith {
    type T: Clone + std::fmt::Debug;

    fn from_f64(&self, x: f64) -> Self::T;
    fn add(&self, a: &Self::T, b: &Self::T) -> Self::T;
    fn sub(&self, a: &Self::T, b: &Self::T) -> Self::T;
    fn mul(&self, a: &Self::T, b: &Self::T) -> Self::T;
    fn div(&self, a: &Self::T, b: &Self::T) -> Self::T;
    fn neg(&self, a: &Self::T) -> Self::T;
    fn abs(&self, a: &Self::T) -> Self::T;
    fn is_zero(&self, a: &Self::T) -> bool;
    /// Nearest double; may under- or overflow.
    fn to_f64(&self, a: &Self::T) -> f64;
    /// `ln |a|` without leaving double range; `-inf` for zero.
    fn ln_abs(&self, a: &Self::T) -> f64;
    /// Sign as -1, 0 or 1.
    fn signum(&self, a: &Self::T) -> i8;
    /// `ln` of the unit roundoff.
    fn ln_unit_roundoff(&self) -> f64;
    /// Sum of a slice, compensated where the back end needs it.
    fn sum(&self, terms: &[Self::T]) -> Self::T;

    fn zero(&self) -> Self::T {
        self.from_f64(0.0)
    }

    fn one(&self) -> Self::T {
        self.from_f64(1.0)
    }
}

/// IEEE doubles; sums use Neumaier compensation.
#[derive(Debug, Clone, Copy, Default)]
pub struct F64Arith;

/// Compensated (Neumaier) sum.
pub fn neumaier_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for t in terms {
        let u = s + t;
        if s.abs() >= t.abs() {
            c += (s - u) + t;
        } else {
            c += (t - u) + s;
        }
        s = u;
    }
    s + c
}

impl Arith for F64Arith {
    type T = f64;

    fn from_f64(&self, x: f64) -> f64 {
        x
    }
    fn add(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }
    fn sub(&self, a: &f64, b: &f64) -> f64 {
        a - b
    }
    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a * b
    }
    fn div(&self, a: &f64, b: &f64) -> f64 {
        a / b
    }
    fn neg(&self, a: &f64) -> f64 {
        -a
    }
    fn abs(&self, a: &f64) -> f64 {
        a.abs()
    }
    fn is_zero(&self, a: &f64) -> bool {
        *a == 0.0
    }
    fn to_f64(&self, a: &f64) -> f64 {
        *a
    }
    fn ln_abs(&self, a: &f64) -> f64 {
        a.abs().ln()
    }
    fn signum(&self, a: &f64) -> i8 {
        if *a > 0.0 {
            1
        } else if *a < 0.0 {
            -1
        } else {
            0
        }
    }
    fn ln_unit_roundoff(&self) -> f64 {
        (f64::EPSILON / 2.0).ln()
    }
    fn sum(&self, terms: &[f64]) -> f64 {
        neumaier_sum(terms.iter().copied())
    }
}

/// Multiprecision floats carrying `bits` significant bits.
#[derive(Debug, Clone, Copy)]
pub struct MpArith {
    bits: usize,
}

impl MpArith {
    pub fn new(bits: usize) -> Self {
        Self { bits: bits.max(64) }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// `ln x` at working precision; `x > 0`.
    pub fn ln(&self, x: &Mp) -> Mp {
        x.ln()
    }

    pub fn exp(&self, x: &Mp) -> Mp {
        x.exp()
    }

    pub fn from_int(&self, n: i64) -> Mp {
        Mp::from(n).with_precision(self.bits).value()
    }
}

impl Arith for MpArith {
    type T = Mp;

    fn from_f64(&self, x: f64) -> Mp {
        Mp::try_from(x)
            .expect("finite double")
            .with_precision(self.bits)
            .value()
    }
    fn add(&self, a: &Mp, b: &Mp) -> Mp {
        a + b
    }
    fn sub(&self, a: &Mp, b: &Mp) -> Mp {
        a - b
    }
    fn mul(&self, a: &Mp, b: &Mp) -> Mp {
        a * b
    }
    fn div(&self, a: &Mp, b: &Mp) -> Mp {
        a / b
    }
    fn neg(&self, a: &Mp) -> Mp {
        -a.clone()
    }
    fn abs(&self, a: &Mp) -> Mp {
        if self.signum(a) < 0 {
            -a.clone()
        } else {
            a.clone()
        }
    }
    fn is_zero(&self, a: &Mp) -> bool {
        a.repr().is_zero()
    }
    fn to_f64(&self, a: &Mp) -> f64 {
        a.to_f64().value()
    }
    fn ln_abs(&self, a: &Mp) -> f64 {
        let repr = a.repr();
        if repr.is_zero() {
            return f64::NEG_INFINITY;
        }
        // a = m * 2^shift with |m| in [1/2, 1)
        let shift = repr.exponent() + repr.digits() as isize;
        let m = a.clone() >> shift;
        m.to_f64().value().abs().ln() + shift as f64 * LN_2
    }
    fn signum(&self, a: &Mp) -> i8 {
        if a.repr().is_zero() {
            0
        } else if *a < Mp::ZERO {
            -1
        } else {
            1
        }
    }
    fn ln_unit_roundoff(&self) -> f64 {
        -(self.bits as f64) * LN_2
    }
    fn sum(&self, terms: &[Mp]) -> Mp {
        terms.iter().fold(self.zero(), |acc, t| &acc + t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_bits() {
        let s = neumaier_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn mp_round_trip_and_logs() {
        let a = MpArith::new(256);
        let x = a.from_f64(0.3);
        assert_eq!(a.to_f64(&x), 0.3);
        assert!((a.ln_abs(&x) - 0.3f64.ln()).abs() < 1e-15);
        let tiny = a.from_f64(1e-300);
        let tinier = a.mul(&tiny, &tiny);
        assert_eq!(a.to_f64(&tinier), 0.0);
        assert!((a.ln_abs(&tinier) - 2.0 * 1e-300f64.ln()).abs() < 1e-12);
        assert_eq!(a.ln_abs(&a.zero()), f64::NEG_INFINITY);
        assert_eq!(a.signum(&a.neg(&x)), -1);
        assert_eq!(a.to_f64(&a.abs(&a.neg(&x))), 0.3);
    }

    #[test]
    fn mp_keeps_bits_that_doubles_lose() {
        let a = MpArith::new(200);
        let big = a.from_f64(1e30);
        let one = a.one();
        let back = a.sub(&a.add(&big, &one), &big);
        assert_eq!(a.to_f64(&back), 1.0);
        assert!(a.ln_unit_roundoff() < -138.0);
    }
}

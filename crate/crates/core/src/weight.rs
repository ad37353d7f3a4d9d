//! Measure weights: fast 64-bit floats or exact rationals for oracle tests.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::ops::{Add, Div, Mul, Sub};

pub trait Weight:
    Clone
    + PartialEq
    + PartialOrd
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    /// Exact arithmetic gets exact comparisons; floats get an epsilon.
    fn is_exact() -> bool;
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_exact() -> bool {
        false
    }
}

impl Weight for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            ToPrimitive::to_f64(self.numer()).unwrap_or(f64::NAN)
                / ToPrimitive::to_f64(self.denom()).unwrap_or(f64::NAN)
        })
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_exact() -> bool {
        true
    }
}

/// Clamp tiny negative float results of subtraction back to zero.
pub fn clamp_nonneg<W: Weight>(w: W) -> W {
    if w < W::zero() {
        W::zero()
    } else {
        w
    }
}

pub fn rational_abs(x: &BigRational) -> BigRational {
    x.abs()
}

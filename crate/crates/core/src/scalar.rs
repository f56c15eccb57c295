//! Floating point scalar abstraction shared by datasets, models and trainers.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Real scalar used for parameters and features: `f32` or `f64`.
///
/// Energy bookkeeping always happens in `f64` regardless of the model
/// scalar, so `to_f64` is lossless for both implementors.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Short name used in manifests and checkpoints.
    const NAME: &'static str;

    fn from_f64_lossy(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// `Σ_i |a_i − b_i|` accumulated in `f64`.
pub fn l1_distance<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x.as_f64() - y.as_f64()).abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_distance_is_sum_of_abs_differences() {
        let a = [1.0f64, -2.0, 0.5];
        let b = [0.0f64, 1.0, 0.5];
        assert_eq!(l1_distance(&a, &b), 4.0);
        assert_eq!(l1_distance::<f32>(&[], &[]), 0.0);
    }

    #[test]
    fn f32_widening_is_exact() {
        let v = 0.1f32;
        assert_eq!(v.as_f64(), 0.1f32 as f64);
        assert_eq!(f32::from_f64_lossy(0.25), 0.25f32);
    }
}

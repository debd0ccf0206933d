use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::Float;

/// Floating-point scalar backing the monitor's statistical state.
///
/// Implemented for `f32` and `f64`. The library's tight numerical contracts
/// (normal-CDF accuracy, recursion/oracle agreement) are stated for `f64`;
/// the `f32` instantiation trades precision for footprint.
pub trait Real: Float + AddAssign + Sum + Debug + Display + Send + Sync + 'static {
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Natural logarithm of the gamma function (positive arguments only).
    fn ln_gamma(self) -> Self;

    /// Conversion from `f64` (identity for `f64`, rounding for `f32`).
    fn from_f64(x: f64) -> Self;

    /// Widening conversion to `f64`.
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    #[inline]
    fn ln_gamma(self) -> Self {
        libm::lgamma_r(self).0
    }

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    #[inline]
    fn ln_gamma(self) -> Self {
        libm::lgammaf_r(self).0
    }

    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

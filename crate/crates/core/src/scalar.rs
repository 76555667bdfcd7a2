//! Floating-point abstraction shared by every module.
//!
//! All geometry and linear algebra is written against [`Scalar`], which is
//! implemented for `f32` and `f64`. Tolerances are derived from the type's
//! machine epsilon so the same code paths stay meaningful at both precisions.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into this type.
    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    /// Lossy widening to `f64`, used for reports and error payloads.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Default tolerance on unit row norms: `1e-10`, floored at `64·eps`.
    fn feas_tol() -> Self {
        Self::lit(1e-10).max(Self::epsilon() * Self::lit(64.0))
    }

    /// Default relative tolerance for PSD and criticality verdicts: `1e-9`,
    /// floored at `1024·eps`.
    fn verdict_tol() -> Self {
        Self::lit(1e-9).max(Self::epsilon() * Self::lit(1024.0))
    }

    /// Relative symmetry tolerance for cost matrices: `1e-12`, floored at `16·eps`.
    fn sym_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(16.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `max(1, x)`, the scale used by every relative tolerance.
#[inline]
pub fn scale_of<T: Scalar>(x: T) -> T {
    x.max(T::one())
}

/// `sin(x)/x` with a Taylor fallback near zero.
pub fn sinc<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(1e-8) {
        T::one() - x * x / T::lit(6.0)
    } else {
        x.sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances_respect_precision() {
        assert_eq!(f64::feas_tol(), 1e-10);
        assert_eq!(f64::verdict_tol(), 1e-9);
        assert!(f32::feas_tol() > 1e-6);
        assert!(f32::verdict_tol() >= 1024.0 * f32::EPSILON);
    }

    #[test]
    fn sinc_is_smooth_at_zero() {
        assert_eq!(sinc(0.0f64), 1.0);
        let below = sinc(0.999e-8f64);
        let above = sinc(1.001e-8f64);
        assert!((below - above).abs() < 1e-15);
        assert!((sinc(1.0f64) - 1.0f64.sin()).abs() < 1e-16);
    }
}

//! Scalar abstraction shared by the analytic (non-sampling) parts of the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Floating point type the potential / state-evolution machinery is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are tuned for
/// `f64`; the `f32` instantiation is useful for quick scans but the root finders
/// bottom out at single precision.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exponent arguments are clipped to this magnitude before `exp`.
pub const EXP_CLIP: f64 = 700.0;

/// `exp` with the argument clipped to `±EXP_CLIP`.
#[inline]
pub fn clipped_exp<T: Real>(x: T) -> T {
    let c = T::lit(EXP_CLIP);
    x.max(-c).min(c).exp()
}

/// Numerically stable `ln Σ exp(x_i)`; returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let s = xs.iter().fold(T::zero(), |acc, &x| acc + clipped_exp(x - max));
    max + s.ln()
}

//! Scalar abstraction over the floating-point sample type.

use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar the whole pipeline is generic over: `f32` or `f64`.
///
/// The persisted dictionary format stores 64-bit reals regardless of the
/// in-memory scalar; the `f64` instantiation is the reference configuration.
pub trait Scalar:
    Float + FloatConst + NumAssign + FromPrimitive + ToPrimitive + Sum + FftNum
{
}

impl<T> Scalar for T where
    T: Float + FloatConst + NumAssign + FromPrimitive + ToPrimitive + Sum + FftNum
{
}

/// Shorthand for converting literals and intermediate `f64` values into `T`.
#[inline]
pub(crate) fn fromf<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 representable in scalar type")
}

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftNum;

/// Floating-point scalar the whole crate is generic over.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + FftNum + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant, rounding if needed.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Converts from the `f32` storage type used in weight files.
    fn from_storage(x: f32) -> Self;

    fn to_storage(self) -> f32;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn from_storage(x: f32) -> Self {
                x as $t
            }
            #[inline]
            fn to_storage(self) -> f32 {
                self as f32
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

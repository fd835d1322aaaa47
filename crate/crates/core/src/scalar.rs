use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, NumCast};

/// Any number the metric code can run on: floats, or exact rationals in tests.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug {}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug {}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + NumCast + Debug + Display + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

use std::fmt;

use num_traits::{Float, FromPrimitive};

/// Scalar type the kernel machinery is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Converts a usize exactly enough for index-derived weights like `1/n`.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

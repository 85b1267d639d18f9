//! Scalar abstractions.
//!
//! Geometry (projections, PCA, cosine distances) is written against
//! [`Scalar`], implemented for `f32` and `f64`. Rate tables for the
//! equality-difference metrics are written against [`RateScalar`], which
//! additionally admits exact rationals such as `Ratio<i64>`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, NumAssign, Signed};

/// Floating point scalar used by the embedding geometry.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Scalar used for error rates and equality differences.
///
/// Any signed field works; `f64` is the usual choice and `Ratio<i64>`
/// gives exact arithmetic for hand-checked tables.
pub trait RateScalar: Clone + Num + Signed + PartialOrd + FromPrimitive + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

impl<T> RateScalar for T where T: Clone + Num + Signed + PartialOrd + FromPrimitive + Debug {}

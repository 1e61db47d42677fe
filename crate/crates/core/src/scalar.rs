use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used by the u-value data model and the pure
/// arithmetic statistics (ECDFs, Anderson–Darling, Cauchy combination,
/// multiple-testing adjustments). Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Distance from 0 and 1 used when clamping computed u-values.
    fn unit_eps() -> Self;

    /// Clamp bound applied to p-values before the Cauchy tangent transform.
    fn pvalue_eps() -> Self;

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable as float")
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }
}

impl Scalar for f64 {
    fn unit_eps() -> Self {
        1e-12
    }

    fn pvalue_eps() -> Self {
        1e-15
    }
}

// 1e-12 rounds 1 - eps to 1.0 in single precision.
impl Scalar for f32 {
    fn unit_eps() -> Self {
        1e-6
    }

    fn pvalue_eps() -> Self {
        1e-7
    }
}

//! Scalar abstraction shared by the geometry and closed-form intensity code.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, NumCast};

/// Real scalar used by geometric primitives and intensity formulas.
///
/// Implemented for `f32` and `f64`. Simulation code runs on `f64`
/// through the aliases at the crate root.
pub trait Scalar: Float + FloatConst + Debug + Default + Send + Sync + 'static {
    /// Converts an `f64` literal. Panics only if the target cannot
    /// represent a finite value at all, which no implementor does.
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("scalar literal out of range")
    }

    fn from_usize(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("integer out of scalar range")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Float + FloatConst + Debug + Default + Send + Sync + 'static {}

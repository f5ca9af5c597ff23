//! Scalar abstraction for the numeric core.
//!
//! All math in this crate is generic over [`Real`]; the pipeline instantiates
//! it at `f64` (see the aliases at the crate root). `f32` works too and is
//! exercised in tests, at correspondingly looser tolerances.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the numeric core runs on: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; used to bring constant tables into `Self`.
    fn cast(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 constant")
    }

    /// Lossless (for f32/f64) widening used when emitting values.
    fn widen(self) -> f64;
}

impl Real for f32 {
    fn widen(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn widen(self) -> f64 {
        self
    }
}

//! Floating-point scalar abstraction for the numeric core.
//!
//! Models, features and the training loop are written once against
//! [`Scalar`] and instantiated at `f32` (storage and wire precision) or
//! `f64` (gradient checks and tight-tolerance invariant tests).

use std::fmt;

use num_traits::{Float, NumAssignOps};

/// Scalar type the numeric core can run in.
pub trait Scalar: Float + NumAssignOps + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    fn from_usize(v: usize) -> Self {
        Self::from_f64(v as f64)
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

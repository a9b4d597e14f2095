//! Dense/sparse numeric kernels with tape-based reverse-mode
//! differentiation, deterministic RNG, Adam, and a finite-difference
//! gradient checker.
//!
//! Training arithmetic runs in `f32`; gradient checks instantiate the same
//! code in `f64`. Both go through the [`Real`] trait. Differentiation is a
//! recorded-tape reverse pass over the fixed per-step computation: every
//! forward op appends a node to a [`Tape`], and [`Tape::backward`] walks
//! the record once in reverse. There is no graph rewriting or fusion —
//! determinism and checkability over raw speed.

pub mod adam;
pub mod check;
pub mod params;
pub mod rng;
pub mod tape;

pub use adam::Adam;
pub use check::{grad_check, GradCheckReport};
pub use params::ModelParams;
pub use rng::RngStream;
pub use tape::{Backprop, NodeId, Tape};

use thiserror::Error;

/// Scalar type for all model arithmetic: `f32` in training, `f64` in
/// gradient checks and evaluation statistics.
pub trait Real:
    ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Lossless-enough conversion from `f64` literals into the working scalar.
pub fn scalar<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("scalar conversion")
}

/// Back to `f64` for reporting.
pub fn to_f64<F: Real>(x: F) -> f64 {
    num_traits::ToPrimitive::to_f64(&x).expect("f64 conversion")
}

#[derive(Debug, Error)]
pub enum NumericError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("softmax row {row} has empty support")]
    EmptySupport { row: usize },
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("backward root must be a 1x1 scalar, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },
    #[error("unknown parameter {name:?}")]
    UnknownParam { name: String },
    #[error("duplicate parameter {name:?}")]
    DuplicateParam { name: String },
    #[error("flat view length mismatch: expected {expected}, got {got}")]
    FlatLenMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, NumericError>;

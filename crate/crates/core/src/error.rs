//! Crate-wide error type for the model, training, and evaluation layers.
//!
//! The foundation layers keep their own focused enums ([`HinError`],
//! [`NumericError`], [`ConfigError`]) so their tests can match precisely;
//! everything above them returns [`GramiError`], which wraps those and adds
//! the failure modes that only exist once a model is in play.

use thiserror::Error;

use crate::config::ConfigError;
use crate::hin::HinError;
use crate::numeric::NumericError;

#[derive(Debug, Error)]
pub enum GramiError {
    #[error(transparent)]
    Hin(#[from] HinError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("type {ty:?} carries no raw attributes; raw reconstruction is undefined for it")]
    NotAttributedType { ty: String },
    #[error("no reconstruction provided for attributed type {ty:?}")]
    MissingType { ty: String },
    #[error("non-finite loss at epoch {epoch} in component {component:?}")]
    NonFiniteLoss { epoch: usize, component: String },
    #[error("parameter {name:?} has shape {got:?}, expected {expected:?} for this graph")]
    ParamShape {
        name: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("parameter set does not match this graph/config: {detail}")]
    ParamSetMismatch { detail: String },
    #[error("corrupt checkpoint {path}: {detail}")]
    CorruptCheckpoint { path: String, detail: String },
    #[error("i/o error on {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("link evaluation needs at least one scored test edge")]
    EmptyTestSet,
    #[error("classification needs at least two distinct classes, found {found}")]
    SingleClass { found: usize },
    #[error("too few samples: {detail}")]
    TooFewSamples { detail: String },
    #[error("type {ty:?} has no labels")]
    MissingLabels { ty: String },
}

pub type Result<T> = std::result::Result<T, GramiError>;

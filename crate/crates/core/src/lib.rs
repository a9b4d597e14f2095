//! GraMI: a variational graph autoencoder for heterogeneous information
//! networks whose node attributes may be missing or inaccurate.
//!
//! The crate is layered bottom-up:
//!
//! - [`sparse`], [`numeric`]: CSR adjacency, the reverse-mode tape, RNG
//!   streams, Adam, and gradient checking;
//! - [`hin`]: the typed-graph data model, on-disk format, corruption and
//!   edge splits;
//! - [`config`]: training hyperparameters and their validation;
//! - [`feature_init`], [`encoder`], [`decoder`], [`loss`]: the model
//!   stages over the tape;
//! - [`model`]: parameter initialization and the assembled training
//!   objective / deterministic inference pass.

pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod feature_init;
pub mod hin;
pub mod loss;
pub mod model;
pub mod numeric;
pub mod sparse;
pub mod trainer;

pub use config::{TrainConfig, ValMetric};
pub use error::{GramiError, Result};
pub use hin::{HinError, HinGraph};
pub use model::{GraphTensors, Inference, ModelDims};
pub use numeric::{ModelParams, NodeId, Real, RngStream, Tape};
pub use trainer::TrainedModel;

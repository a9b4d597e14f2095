//! Typed heterogeneous graph data model and dataset plumbing.
//!
//! A heterogeneous information network (HIN) couples several node types
//! through binary relations. Some types carry observed attribute matrices
//! (`T+`), the rest are attribute-free (`T-`) and are treated as implicit
//! one-hot identities by the projection layer — their identity matrices are
//! never materialized.
//!
//! The submodules cover the full data lifecycle:
//! - [`types`]: immutable in-memory graph ([`HinGraph`] and friends),
//! - [`io`]: dataset directory ingestion and export,
//! - [`split`]: train/validation/test edge partitioning with negative
//!   sampling for link prediction,
//! - [`corrupt`]: Gaussian feature corruption for noise-robustness studies.

pub mod corrupt;
pub mod io;
pub mod split;
pub mod types;

pub use corrupt::corrupt_features;
pub use io::{load_dataset, write_dataset};
pub use split::{sample_negatives, split_edges, EdgeSplit, RelationSplit};
pub use types::{
    toy_hin, FeatureFormat, FeatureTable, HinGraph, NodeTypeSchema, RelationMatrix, RelationSpec,
};

use thiserror::Error;

/// Errors raised while constructing, loading, splitting, or corrupting a
/// graph. File-backed variants name the offending file and (1-based) line.
#[derive(Debug, Error)]
pub enum HinError {
    #[error("missing file: {path}")]
    MissingFile { path: String },
    #[error("i/o error on {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("{file}:{line}: index {index} exceeds {ty} count {count}")]
    IndexOutOfRange {
        file: String,
        line: usize,
        index: usize,
        ty: String,
        count: usize,
    },
    #[error("{file}:{line}: duplicate edge ({src}, {dst})")]
    DuplicateEdge {
        file: String,
        line: usize,
        src: usize,
        dst: usize,
    },
    #[error("{file}:{line}: non-finite feature value")]
    NonFiniteFeature { file: String, line: usize },
    #[error("{file}: {detail}")]
    SchemaMismatch { file: String, detail: String },
    /// Programmatic construction violated a structural invariant. The
    /// loader's per-file checks fire first, so this names no file.
    #[error("invalid graph: {detail}")]
    InvalidGraph { detail: String },
    #[error("graph has no attributed node type")]
    NoAttributedType,
    #[error("relation {relation}: {found} edges, need at least {min} to split")]
    RelationTooSmall {
        relation: String,
        found: usize,
        min: usize,
    },
    #[error("relation {relation}: negative sampling exhausted after {attempts} attempts")]
    NegativeSamplingExhausted { relation: String, attempts: usize },
    #[error("split ratios must be positive and sum to 1, got {ratios:?}")]
    BadSplitRatios { ratios: (f64, f64, f64) },
}

pub type Result<T> = std::result::Result<T, HinError>;

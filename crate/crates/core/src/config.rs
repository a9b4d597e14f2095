//! Training configuration and its validation.
//!
//! Hyperparameters live in one flat struct that serializes to the JSON
//! config file the CLI accepts. Values are checked against the supported
//! search grids by [`TrainConfig::validate`]; everything downstream may
//! assume a validated config.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Depth of the node encoder's relation-attention stack (fixed).
pub const ENCODER_LAYERS: usize = 2;

/// Grids accepted by [`TrainConfig::validate`].
pub const LR_GRID: [f64; 4] = [0.001, 0.005, 0.01, 0.05];
pub const DROPOUT_GRID: [f64; 2] = [0.0, 0.3];
pub const HEADS_GRID: [usize; 4] = [1, 2, 4, 8];
pub const LATENT_GRID: [usize; 4] = [32, 64, 128, 256];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field {field}: {detail}")]
    InvalidField { field: &'static str, detail: String },
    #[error("cannot read config {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("cannot parse config: {detail}")]
    Parse { detail: String },
    #[error("hidden_dim {hidden} must be smaller than feature_dim {feature_dim} of attributed type {ty}")]
    HiddenDimTooLarge {
        hidden: usize,
        feature_dim: usize,
        ty: String,
    },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

/// Validation criterion scored each epoch for early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValMetric {
    /// Mean binary cross-entropy on held-out edges (lower is better).
    #[default]
    Bce,
    /// ROC AUC on held-out edges (higher is better).
    Auc,
}

/// All knobs of a training run. Field names double as the JSON keys of the
/// CLI config file; omitted keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Shared hidden width every type is projected into. Must stay below
    /// each attributed type's raw feature dimension (checked at model
    /// initialization, where the graph is known).
    pub hidden_dim: usize,
    /// Latent width of node and attribute embeddings.
    pub latent_dim: usize,
    /// Attention heads per relation.
    pub heads: usize,
    /// Depth of the decoder's refinement stack (0 disables refinement).
    pub decoder_layers: usize,
    /// Width of the noise block appended to node features (0 disables,
    /// degenerating the node encoder to a plain variational one).
    pub noise_dim_node: usize,
    /// Width of the noise block appended to attribute rows.
    pub noise_dim_attr: usize,
    /// Independent noise draws averaged per training step.
    pub noise_samples: usize,
    pub lr: f64,
    /// Dropout on attention inputs during training.
    pub dropout: f64,
    /// Weight of the hidden-attribute reconstruction term.
    pub lambda1: f64,
    /// Weight of the raw-attribute RMSE term.
    pub lambda2: f64,
    /// Weight of the edge term (BCE + node KL). 1.0 is the full model;
    /// 0.0 ablates link reconstruction entirely.
    pub edge_weight: f64,
    pub epochs: usize,
    /// Early-stopping window: stop once validation has not improved for
    /// this many consecutive epochs.
    pub patience: usize,
    pub seed: u64,
    /// Train/validation/test edge fractions.
    pub split: [f64; 3],
    /// Early-stopping criterion on the validation edges.
    pub val_metric: ValMetric,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            hidden_dim: 64,
            latent_dim: 32,
            heads: 2,
            decoder_layers: 1,
            noise_dim_node: 16,
            noise_dim_attr: 16,
            noise_samples: 4,
            lr: 0.01,
            dropout: 0.0,
            lambda1: 0.1,
            lambda2: 0.2,
            edge_weight: 1.0,
            epochs: 2000,
            patience: 100,
            seed: 42,
            split: [0.85, 0.05, 0.10],
            val_metric: ValMetric::Bce,
        }
    }
}

impl TrainConfig {
    pub fn from_json_str(raw: &str) -> Result<TrainConfig> {
        serde_json::from_str(raw).map_err(|e| ConfigError::Parse {
            detail: e.to_string(),
        })
    }

    pub fn from_file<P: AsRef<std::path::Path>>(path: P) -> Result<TrainConfig> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Self::from_json_str(&raw)
    }

    /// Check every field against its supported range or grid.
    pub fn validate(&self) -> Result<()> {
        fn fail(field: &'static str, detail: String) -> Result<()> {
            Err(ConfigError::InvalidField { field, detail })
        }
        if self.hidden_dim == 0 {
            return fail("hidden_dim", "must be at least 1".into());
        }
        if !LATENT_GRID.contains(&self.latent_dim) {
            return fail(
                "latent_dim",
                format!("{} not in {:?}", self.latent_dim, LATENT_GRID),
            );
        }
        if !HEADS_GRID.contains(&self.heads) {
            return fail("heads", format!("{} not in {:?}", self.heads, HEADS_GRID));
        }
        if self.decoder_layers > 2 {
            return fail(
                "decoder_layers",
                format!("{} not in {{0, 1, 2}}", self.decoder_layers),
            );
        }
        if !LR_GRID.contains(&self.lr) {
            return fail("lr", format!("{} not in {:?}", self.lr, LR_GRID));
        }
        if !DROPOUT_GRID.contains(&self.dropout) {
            return fail(
                "dropout",
                format!("{} not in {:?}", self.dropout, DROPOUT_GRID),
            );
        }
        for (field, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("edge_weight", self.edge_weight),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return fail(field, format!("{v} outside [0, 1]"));
            }
        }
        if self.noise_samples == 0 {
            return fail("noise_samples", "must be at least 1".into());
        }
        if self.patience == 0 {
            return fail("patience", "must be at least 1".into());
        }
        let [t, v, w] = self.split;
        let sum = t + v + w;
        if !(t > 0.0 && v > 0.0 && w > 0.0 && (sum - 1.0).abs() <= 1e-9) {
            return fail(
                "split",
                format!("fractions {:?} must be positive and sum to 1", self.split),
            );
        }
        Ok(())
    }
}

//! The full-batch training loop.
//!
//! Each epoch redraws negative edges and every noise block, builds the
//! objective on a fresh tape, takes one Adam step over all parameters,
//! then scores the held-out validation edges with a noise-free forward
//! pass (means only, fixed negatives from the split). The parameters from
//! the best validation epoch are the ones returned; training stops early
//! once `patience` epochs pass without improvement.
//!
//! Everything downstream of the seed is deterministic: the split, the
//! initialization, the per-epoch draws, and Adam arithmetic, so two runs
//! with equal inputs produce bit-identical parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::{TrainConfig, ValMetric};
use crate::error::{GramiError, Result};
use crate::eval::metrics::auc;
use crate::hin::{split_edges, EdgeSplit, HinGraph};
use crate::loss::{LossReport, LossWeights};
use crate::model::{self, init_params, GraphTensors, Inference, ModelDims, StepInputs};
use crate::numeric::{Adam, ModelParams, Real, RngStream, Tape};

/// One epoch of history: the training-loss breakdown after the step and
/// the validation metric (edge BCE by default, edge AUC when configured;
/// the training total when the split holds no validation edges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossReport,
    pub val: f64,
}

/// A trained model: best-epoch parameters, the exact configuration and
/// edge split they were produced under, and the per-epoch history.
#[derive(Debug, Clone)]
pub struct TrainedModel<F: Real> {
    pub params: ModelParams<F>,
    pub config: TrainConfig,
    pub split: EdgeSplit,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl<F: Real> TrainedModel<F> {
    /// Noise-free forward pass with the same train-edge message passing
    /// used during optimization, so held-out edges never leak into their
    /// own scores.
    pub fn inference(&self, g: &HinGraph) -> Result<Inference<F>> {
        let gt: GraphTensors<F> = GraphTensors::new(g, Some(&self.split));
        let dims = ModelDims::from_config(&self.config);
        model::infer(&self.params, &gt, &dims)
    }

    /// Write parameters, config, and best epoch to a checkpoint file.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.params, &self.config, self.best_epoch)
    }
}

/// Split the graph's edges per the config and train on the result.
pub fn train<F: Real>(g: &HinGraph, cfg: &TrainConfig) -> Result<TrainedModel<F>> {
    cfg.validate()?;
    let split = split_edges(g, (cfg.split[0], cfg.split[1], cfg.split[2]), cfg.seed)?;
    train_with_split(g, cfg, split)
}

/// Train against an existing split (reused when several configurations
/// must see identical data, as in ablation comparisons).
pub fn train_with_split<F: Real>(
    g: &HinGraph,
    cfg: &TrainConfig,
    split: EdgeSplit,
) -> Result<TrainedModel<F>> {
    cfg.validate()?;
    let gt: GraphTensors<F> = GraphTensors::new(g, Some(&split));
    let dims = ModelDims::from_config(cfg);
    let weights = LossWeights::from_config(cfg);
    let mut params: ModelParams<F> = init_params(g, cfg)?;
    let mut rng = RngStream::new(cfg.seed).fork(2);
    let mut adam: Adam<F> = Adam::new(cfg.lr, params.flat_len());

    let mut history = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_score = f64::INFINITY;
    let mut best_flat = params.to_flat();

    for epoch in 0..cfg.epochs {
        let step = StepInputs::draw(g, &gt, &dims, cfg.noise_samples, cfg.dropout, &mut rng)?;
        let mut tape: Tape<F> = Tape::new();
        let nodes = model::training_loss(&mut tape, &params, &gt, &step, &weights, &dims)?;
        let report = nodes.report(&tape);
        ensure_finite(&report, epoch)?;
        let bp = tape.backward(nodes.total)?;
        let grads = tape.flat_param_grads(&bp, &params);
        let mut flat = params.to_flat();
        adam.step(&mut flat, &grads)?;
        params.set_flat(&flat)?;

        let val = match validation_metric(&params, &gt, &dims, &split, cfg.val_metric)? {
            Some(v) => v,
            None => report.total,
        };
        if !val.is_finite() {
            return Err(GramiError::NonFiniteLoss {
                epoch,
                component: "validation".into(),
            });
        }
        history.push(EpochRecord {
            epoch,
            loss: report,
            val,
        });

        // Lower is better; AUC flips sign. Improvement must be strict.
        let score = match cfg.val_metric {
            ValMetric::Bce => val,
            ValMetric::Auc => -val,
        };
        if score < best_score {
            best_score = score;
            best_epoch = epoch;
            best_flat = params.to_flat();
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    params.set_flat(&best_flat)?;
    Ok(TrainedModel {
        params,
        config: cfg.clone(),
        split,
        history,
        best_epoch,
    })
}

/// Error out on the first non-finite loss component, naming it.
fn ensure_finite(report: &LossReport, epoch: usize) -> Result<()> {
    let components = [
        ("total", report.total),
        ("edge_bce", report.edge_bce),
        ("edge_kl", report.edge_kl),
        ("attr_recon", report.attr_recon),
        ("attr_kl", report.attr_kl),
        ("rmse", report.rmse),
        ("hidden_norm", report.hidden_norm),
    ];
    for (name, value) in components {
        if !value.is_finite() {
            return Err(GramiError::NonFiniteLoss {
                epoch,
                component: name.into(),
            });
        }
    }
    Ok(())
}

/// Numerically stable binary cross-entropy of one logit against label y.
fn bce_term(logit: f64, y: f64) -> f64 {
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

/// Score the validation edges with a noise-free pass: BCE averaged within
/// each relation and summed across them (mirroring the training edge
/// term), or AUC averaged over relations. `None` when no relation has any
/// validation pair.
fn validation_metric<F: Real>(
    params: &ModelParams<F>,
    gt: &GraphTensors<F>,
    dims: &ModelDims,
    split: &EdgeSplit,
    metric: ValMetric,
) -> Result<Option<f64>> {
    let inf = model::infer(params, gt, dims)?;
    let mut total = 0.0;
    let mut scored_relations = 0usize;
    for (r, rs) in split.relations.iter().enumerate() {
        let (s, d) = gt.endpoints[r];
        let pos: Vec<f64> = rs
            .val_pos
            .iter()
            .map(|&(u, v)| inf.edge_logit(s, u, d, v))
            .collect();
        let neg: Vec<f64> = rs
            .val_neg
            .iter()
            .map(|&(u, v)| inf.edge_logit(s, u, d, v))
            .collect();
        match metric {
            ValMetric::Bce => {
                if pos.is_empty() && neg.is_empty() {
                    continue;
                }
                let sum: f64 = pos.iter().map(|&l| bce_term(l, 1.0)).sum::<f64>()
                    + neg.iter().map(|&l| bce_term(l, 0.0)).sum::<f64>();
                total += sum / (pos.len() + neg.len()) as f64;
            }
            ValMetric::Auc => {
                if pos.is_empty() || neg.is_empty() {
                    continue;
                }
                total += auc(&pos, &neg);
            }
        }
        scored_relations += 1;
    }
    if scored_relations == 0 {
        return Ok(None);
    }
    Ok(Some(match metric {
        ValMetric::Bce => total,
        ValMetric::Auc => total / scored_relations as f64,
    }))
}

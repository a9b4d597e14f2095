//! Loss components and their weighted combination.
//!
//! The objective is
//! `w_e·(edge_bce + edge_kl) + λ₁·(attr_recon + attr_kl) + λ₂·rmse`,
//! where the edge BCE is averaged within each relation and summed across
//! relations, both KL terms are per-row means summed over types, the
//! hidden reconstruction error covers every type, and the raw RMSE only
//! the attributed ones.

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::encoder::GaussianLatent;
use crate::numeric::{scalar, NodeId, Real, Result, Tape};

/// Scalar weights of the three objective groups. `edge` is 1 in the full
/// model; setting it to 0 ablates the link reconstruction entirely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub edge: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl LossWeights {
    pub fn from_config(cfg: &TrainConfig) -> LossWeights {
        LossWeights {
            edge: cfg.edge_weight,
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
        }
    }
}

/// One epoch's loss values, read off the tape. The reported `edge_bce`
/// and `edge_kl` already include the edge weight, while the attribute
/// terms are raw, so
/// `total = edge_bce + edge_kl + λ₁·(attr_recon + attr_kl) + λ₂·rmse`
/// holds as stated. `per_relation_bce` is unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub edge_bce: f64,
    pub edge_kl: f64,
    pub attr_recon: f64,
    pub attr_kl: f64,
    pub rmse: f64,
    pub per_relation_bce: Vec<f64>,
    /// Frobenius norm of the projected hidden features — the moving
    /// target of the reconstruction losses, logged to expose collapse.
    pub hidden_norm: f64,
}

/// Per-relation binary cross-entropy over positive and sampled negative
/// logits, averaged within each relation and summed across them.
///
/// Each entry is `Some((pos, neg))` with `(m × 1)` logit columns —
/// `neg = None` when the relation is complete and no negatives exist —
/// or `None` for a relation with no training positives at all. Returns
/// the summed loss plus one node per relation (zero for `None` entries).
pub fn edge_loss<F: Real>(
    tape: &mut Tape<F>,
    rel_terms: &[Option<(NodeId, Option<NodeId>)>],
) -> Result<(NodeId, Vec<NodeId>)> {
    let mut per_rel = Vec::with_capacity(rel_terms.len());
    let mut total: Option<NodeId> = None;
    for term in rel_terms {
        let Some((pos, neg)) = term else {
            per_rel.push(tape.constant(Array2::zeros((1, 1))));
            continue;
        };
        let n_pos = tape.shape(*pos).0;
        let (logits, n_neg) = match neg {
            Some(n) => (tape.concat_rows(*pos, *n)?, tape.shape(*n).0),
            None => (*pos, 0),
        };
        let labels = Array2::from_shape_fn((n_pos + n_neg, 1), |(i, _)| {
            if i < n_pos {
                scalar(1.0)
            } else {
                scalar(0.0)
            }
        });
        let bce = tape.bce_with_logits_mean(logits, Arc::new(labels))?;
        per_rel.push(bce);
        total = Some(match total {
            None => bce,
            Some(t) => tape.add(t, bce)?,
        });
    }
    let total = match total {
        Some(t) => t,
        None => tape.constant(Array2::zeros((1, 1))),
    };
    Ok((total, per_rel))
}

/// KL divergence of a diagonal Gaussian from the standard normal,
/// `½ Σ (exp(logvar) + μ² − 1 − logvar)`, normalized by the number of
/// rows (nodes or attributes). Non-negative up to rounding.
pub fn gaussian_kl<F: Real>(tape: &mut Tape<F>, lat: &GaussianLatent) -> Result<NodeId> {
    let rows = tape.shape(lat.mu).0;
    let ev = tape.exp(lat.logvar);
    let mu2 = tape.mul(lat.mu, lat.mu)?;
    let s = tape.add(ev, mu2)?;
    let s = tape.add_scalar(s, scalar(-1.0));
    let s = tape.sub(s, lat.logvar)?;
    let sum = tape.sum_all(s);
    Ok(tape.scale(sum, scalar(0.5 / rows as f64)))
}

/// Hidden-feature reconstruction error: the sum over all types of the
/// mean squared difference between reconstruction and (projected) target.
pub fn attr_loss<F: Real>(
    tape: &mut Tape<F>,
    recon: &[NodeId],
    target: &[NodeId],
) -> Result<NodeId> {
    let mut total: Option<NodeId> = None;
    for (&r, &t) in recon.iter().zip(target.iter()) {
        let d = tape.sub(r, t)?;
        let sq = tape.mul(d, d)?;
        let m = tape.mean_all(sq);
        total = Some(match total {
            None => m,
            Some(acc) => tape.add(acc, m)?,
        });
    }
    Ok(total.unwrap_or_else(|| tape.constant(Array2::zeros((1, 1)))))
}

/// Raw-feature error: one square root over the type-averaged squared
/// Frobenius norms, `sqrt(Σ_i ‖X'_i − X_i‖²_F / |pairs|)`. An empty pair
/// list (no attributed types) contributes zero.
pub fn rmse_loss<F: Real>(tape: &mut Tape<F>, pairs: &[(NodeId, NodeId)]) -> Result<NodeId> {
    if pairs.is_empty() {
        return Ok(tape.constant(Array2::zeros((1, 1))));
    }
    let mut total: Option<NodeId> = None;
    for &(pred, target) in pairs {
        let d = tape.sub(pred, target)?;
        let sq = tape.mul(d, d)?;
        let s = tape.sum_all(sq);
        total = Some(match total {
            None => s,
            Some(acc) => tape.add(acc, s)?,
        });
    }
    let mean = tape.scale(total.expect("non-empty"), scalar(1.0 / pairs.len() as f64));
    Ok(tape.sqrt(mean))
}

/// The five component nodes entering the weighted total.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub edge_bce: NodeId,
    pub edge_kl: NodeId,
    pub attr_recon: NodeId,
    pub attr_kl: NodeId,
    pub rmse: NodeId,
}

/// The combined objective and the component nodes as they enter the
/// report: edge terms carry their weight, attribute terms stay raw.
#[derive(Debug, Clone, Copy)]
pub struct ScaledTerms {
    pub total: NodeId,
    pub edge_bce: NodeId,
    pub edge_kl: NodeId,
    pub attr_recon: NodeId,
    pub attr_kl: NodeId,
    pub rmse: NodeId,
}

/// Combine the component losses into the training objective.
pub fn total_loss<F: Real>(
    tape: &mut Tape<F>,
    terms: &LossTerms,
    weights: &LossWeights,
) -> Result<ScaledTerms> {
    let edge_bce = tape.scale(terms.edge_bce, scalar(weights.edge));
    let edge_kl = tape.scale(terms.edge_kl, scalar(weights.edge));
    let attr_sum = tape.add(terms.attr_recon, terms.attr_kl)?;
    let attr_term = tape.scale(attr_sum, scalar(weights.lambda1));
    let rmse_term = tape.scale(terms.rmse, scalar(weights.lambda2));
    let t = tape.add(edge_bce, edge_kl)?;
    let t = tape.add(t, attr_term)?;
    let total = tape.add(t, rmse_term)?;
    Ok(ScaledTerms {
        total,
        edge_bce,
        edge_kl,
        attr_recon: terms.attr_recon,
        attr_kl: terms.attr_kl,
        rmse: terms.rmse,
    })
}

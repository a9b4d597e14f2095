//! Train/validation/test edge partitioning with negative sampling.
//!
//! Link prediction hides a fraction of each relation's edges from training
//! and scores them against an equal number of sampled non-edges. Same-type
//! relations are partitioned over undirected pairs (stored canonically as
//! `(min, max)`) so an edge can never leak across partitions through its
//! mirror image.

use std::collections::HashSet;

use crate::numeric::RngStream;

use super::types::{HinGraph, RelationMatrix};
use super::{HinError, Result};

/// Split for one relation, aligned with `HinGraph::relations`. Pairs of a
/// same-type relation are canonical `(min, max)`; consumers that need both
/// directions (message passing) symmetrize per partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSplit {
    pub train_pos: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

impl RelationSplit {
    pub fn positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.train_pos
            .iter()
            .chain(&self.val_pos)
            .chain(&self.test_pos)
            .copied()
    }
}

/// Deterministic per-relation edge split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSplit {
    pub seed: u64,
    pub relations: Vec<RelationSplit>,
}

/// Partition every relation's edges at `ratios` (largest-remainder
/// rounding) and sample one negative non-edge per positive, per partition.
/// Deterministic for a fixed `(graph, ratios, seed)` triple.
pub fn split_edges(g: &HinGraph, ratios: (f64, f64, f64), seed: u64) -> Result<EdgeSplit> {
    let (t, v, w) = ratios;
    if !(t > 0.0 && v > 0.0 && w > 0.0 && (t + v + w - 1.0).abs() <= 1e-9) {
        return Err(HinError::BadSplitRatios { ratios });
    }
    let mut relations = Vec::with_capacity(g.relations.len());
    for (r_idx, rel) in g.relations.iter().enumerate() {
        let mut positives: Vec<(usize, usize)> = if rel.is_same_type() {
            rel.adj.edges().filter(|&(a, b)| a <= b).collect()
        } else {
            rel.adj.edges().collect()
        };
        if positives.len() < 3 {
            return Err(HinError::RelationTooSmall {
                relation: rel.name.clone(),
                found: positives.len(),
                min: 3,
            });
        }
        // Independent streams per relation, and separate streams for the
        // shuffle and the rejection sampler, so neither consumption count
        // perturbs the other.
        let mut shuffle_rng = RngStream::new(seed).fork(2 * r_idx as u64);
        let mut neg_rng = RngStream::new(seed).fork(2 * r_idx as u64 + 1);
        shuffle(&mut positives, &mut shuffle_rng);
        let sizes = largest_remainder(positives.len(), [t, v, w]);
        let test_pos = positives.split_off(sizes[0] + sizes[1]);
        let val_pos = positives.split_off(sizes[0]);
        let train_pos = positives;

        let negatives = sample_negatives(rel, g, sizes.iter().sum(), &mut neg_rng)?;
        let (train_neg, rest) = negatives.split_at(sizes[0]);
        let (val_neg, test_neg) = rest.split_at(sizes[1]);

        relations.push(RelationSplit {
            train_pos,
            val_pos,
            test_pos,
            train_neg: train_neg.to_vec(),
            val_neg: val_neg.to_vec(),
            test_neg: test_neg.to_vec(),
        });
    }
    Ok(EdgeSplit { seed, relations })
}

fn shuffle(pairs: &mut [(usize, usize)], rng: &mut RngStream) {
    for i in (1..pairs.len()).rev() {
        let j = rng.below(i + 1);
        pairs.swap(i, j);
    }
}

/// Apportion `n` items over three partitions by largest remainder: floor
/// each quota, then hand the leftover units to the largest fractional
/// parts (ties broken toward the earlier partition).
fn largest_remainder(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut fracs = [(0.0f64, 0usize); 3];
    let mut used = 0;
    for i in 0..3 {
        let quota = ratios[i] * n as f64;
        out[i] = quota.floor() as usize;
        used += out[i];
        fracs[i] = (quota - out[i] as f64, i);
    }
    fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, i) in fracs.iter().take(n - used) {
        out[i] += 1;
    }
    out
}

/// Rejection-sample `needed` distinct non-edges uniformly. Same-type
/// relations draw canonical off-diagonal pairs. Aborts once attempts reach
/// `100 * needed`, which only a near-complete relation can trigger.
/// Also used by the trainer to redraw training negatives every epoch.
pub fn sample_negatives(
    rel: &RelationMatrix,
    g: &HinGraph,
    needed: usize,
    rng: &mut RngStream,
) -> Result<Vec<(usize, usize)>> {
    let n_src = g.n_nodes(rel.src_type);
    let n_dst = g.n_nodes(rel.dst_type);
    let cap = needed.saturating_mul(100);
    let mut out = Vec::with_capacity(needed);
    let mut seen = HashSet::with_capacity(needed);
    let mut attempts = 0usize;
    while out.len() < needed {
        if attempts >= cap {
            return Err(HinError::NegativeSamplingExhausted {
                relation: rel.name.clone(),
                attempts,
            });
        }
        attempts += 1;
        let mut u = rng.below(n_src);
        let mut v = rng.below(n_dst);
        if rel.is_same_type() {
            if u == v {
                continue;
            }
            if u > v {
                std::mem::swap(&mut u, &mut v);
            }
        }
        if rel.adj.contains(u, v) || !seen.insert((u, v)) {
            continue;
        }
        out.push((u, v));
    }
    Ok(out)
}

//! Attribute-completion export and quality summary.
//!
//! The trained model's deterministic reconstructions become a derived
//! dataset: attributed types get their raw-space reconstructions, the rest
//! get their completed hidden features, and every type is marked attributed
//! so the directory loads back as an ordinary dataset. The summary reports
//! per-type reconstruction RMSE and — for labeled non-attributed types —
//! how a downstream probe fares on the completed features against the
//! classical neighbor-average baseline.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::classify::{classify, RatioF1};
use crate::hin::{write_dataset, FeatureFormat, FeatureTable, HinGraph, RelationSpec};
use crate::numeric::{to_f64, Real};
use crate::trainer::TrainedModel;

/// Labeled fraction used by the completion probes.
pub const COMPLETION_PROBE_RATIO: f64 = 0.4;

/// Stratified splits per probe.
pub const COMPLETION_PROBE_RUNS: usize = 10;

/// Root-mean-square reconstruction error for one attributed type,
/// normalized per entry: ‖X′ − X‖_F / √(n·d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRmse {
    pub type_name: String,
    pub rmse: f64,
}

/// Probe outcome for one labeled non-attributed type: the same classifier
/// protocol on completed hidden features and on neighbor-averaged raw
/// attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionProbe {
    pub type_name: String,
    pub completed: RatioF1,
    pub baseline: RatioF1,
}

/// Everything `completion_quality` measures alongside its export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionReport {
    pub rmse: Vec<TypeRmse>,
    pub probes: Vec<CompletionProbe>,
}

/// Run deterministic inference, export the completed dataset to `out_dir`,
/// and summarize reconstruction quality. Probe errors (too few labels,
/// a single class) propagate unchanged.
pub fn completion_quality<F: Real>(
    model: &TrainedModel<F>,
    g: &HinGraph,
    out_dir: &Path,
) -> Result<CompletionReport> {
    let inf = model.inference(g)?;
    let dense = |m: &Array2<F>| m.mapv(to_f64);

    // Derived dataset: reconstructions in raw space where attributes exist,
    // completed hidden features elsewhere.
    let mut schema = g.schema.clone();
    let mut features = Vec::with_capacity(schema.len());
    for (i, t) in schema.iter_mut().enumerate() {
        let matrix = match &inf.recon_raw[i] {
            Some(rr) => dense(rr),
            None => dense(&inf.recon_hidden[i]),
        };
        t.attributed = true;
        t.feature_dim = matrix.ncols();
        features.push(Some(FeatureTable {
            type_id: i,
            matrix,
            format: FeatureFormat::Csv,
        }));
    }
    let relations: Vec<RelationSpec> = g
        .relations
        .iter()
        .map(|r| RelationSpec {
            name: r.name.clone(),
            src_type: r.src_type,
            dst_type: r.dst_type,
            edges: if r.is_same_type() {
                r.adj.edges().filter(|&(u, v)| u <= v).collect()
            } else {
                r.adj.edges().collect()
            },
        })
        .collect();
    let derived = HinGraph::new(schema, relations, features, g.labels.clone())?;
    write_dataset(&derived, out_dir)?;

    let mut rmse = Vec::new();
    for (i, t) in g.schema.iter().enumerate() {
        let (Some(table), Some(rr)) = (&g.features[i], &inf.recon_raw[i]) else {
            continue;
        };
        let diff = dense(rr) - &table.matrix;
        let sq: f64 = diff.iter().map(|d| d * d).sum();
        rmse.push(TypeRmse {
            type_name: t.name.clone(),
            rmse: (sq / diff.len() as f64).sqrt(),
        });
    }

    let mut probes = Vec::new();
    for (i, t) in g.schema.iter().enumerate() {
        if t.attributed {
            continue;
        }
        let Some(labels) = &g.labels[i] else {
            continue;
        };
        let ratios = [COMPLETION_PROBE_RATIO];
        let seed = model.config.seed;
        let completed = classify(
            &dense(&inf.recon_hidden[i]),
            labels,
            &ratios,
            COMPLETION_PROBE_RUNS,
            seed,
        )?;
        let baseline = classify(
            &neighbor_average(g, i),
            labels,
            &ratios,
            COMPLETION_PROBE_RUNS,
            seed,
        )?;
        probes.push(CompletionProbe {
            type_name: t.name.clone(),
            completed: completed.ratios[0].clone(),
            baseline: baseline.ratios[0].clone(),
        });
    }

    Ok(CompletionReport { rmse, probes })
}

/// The classical completion baseline: each node of type `t` averages the
/// raw attributes of its neighbors, one block per attributed type in type
/// order, zeros where a node has no neighbors of that type. Neighbors are
/// pooled across every relation touching the pair of types.
pub fn neighbor_average(g: &HinGraph, t: usize) -> Array2<f64> {
    let n = g.schema[t].count;
    let attributed: Vec<usize> = (0..g.schema.len())
        .filter(|&s| g.schema[s].attributed)
        .collect();
    let mut col_start = vec![0usize; attributed.len() + 1];
    for (slot, &s) in attributed.iter().enumerate() {
        col_start[slot + 1] = col_start[slot] + g.schema[s].feature_dim;
    }
    let mut out = Array2::zeros((n, *col_start.last().unwrap()));
    let mut counts = Array2::<f64>::zeros((n, attributed.len()));

    let mut accumulate = |pairs: &mut dyn Iterator<Item = (usize, usize)>, other: usize| {
        let Some(slot) = attributed.iter().position(|&s| s == other) else {
            return;
        };
        let x = &g.features[other].as_ref().expect("attributed type").matrix;
        for (u, v) in pairs {
            for j in 0..x.ncols() {
                out[(u, col_start[slot] + j)] += x[(v, j)];
            }
            counts[(u, slot)] += 1.0;
        }
    };
    for rel in &g.relations {
        if rel.src_type == t {
            accumulate(&mut rel.adj.edges(), rel.dst_type);
        }
        if rel.dst_type == t && !rel.is_same_type() {
            accumulate(&mut rel.adj.edges().map(|(u, v)| (v, u)), rel.src_type);
        }
    }
    for u in 0..n {
        for (slot, _) in attributed.iter().enumerate() {
            let c = counts[(u, slot)];
            if c > 0.0 {
                for j in col_start[slot]..col_start[slot + 1] {
                    out[(u, j)] /= c;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainConfig;
    use crate::eval::synthetic::{make_synthetic_hin, SyntheticSpec};
    use crate::hin::{load_dataset, toy_hin, EdgeSplit, RelationSplit};
    use crate::numeric::ModelParams;
    use crate::trainer::{train_with_split, TrainedModel};

    fn full_train_split(g: &HinGraph) -> EdgeSplit {
        EdgeSplit {
            seed: 0,
            relations: g
                .relations
                .iter()
                .map(|rel| RelationSplit {
                    train_pos: if rel.is_same_type() {
                        rel.adj.edges().filter(|&(u, v)| u <= v).collect()
                    } else {
                        rel.adj.edges().collect()
                    },
                    val_pos: Vec::new(),
                    test_pos: Vec::new(),
                    train_neg: Vec::new(),
                    val_neg: Vec::new(),
                    test_neg: Vec::new(),
                })
                .collect(),
        }
    }

    fn toy_model() -> (HinGraph, TrainedModel<f32>) {
        let g = toy_hin();
        let cfg = TrainConfig {
            hidden_dim: 2,
            latent_dim: 32,
            heads: 1,
            decoder_layers: 1,
            noise_dim_node: 2,
            noise_dim_attr: 2,
            epochs: 0,
            ..TrainConfig::default()
        };
        let split = full_train_split(&g);
        let tm = train_with_split::<f32>(&g, &cfg, split).unwrap();
        (g, tm)
    }

    #[test]
    fn zero_decoder_rmse_is_the_feature_norm_scale() {
        let (g, mut tm) = toy_model();
        let mut zeroed = ModelParams::new();
        for (name, v) in tm.params.iter() {
            let arr = if name.starts_with("recon/")
                && (name.ends_with("/w2") || name.ends_with("/b2"))
            {
                Array2::zeros(v.dim())
            } else {
                v.clone()
            };
            zeroed.insert(name.to_string(), arr).unwrap();
        }
        tm.params = zeroed;
        let dir = tempfile::tempdir().unwrap();
        let report = completion_quality(&tm, &g, dir.path()).unwrap();
        assert_eq!(report.rmse.len(), 2);
        for tr in &report.rmse {
            let i = g.schema.iter().position(|t| t.name == tr.type_name).unwrap();
            let x = &g.features[i].as_ref().unwrap().matrix;
            let expect = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
            assert!(
                (tr.rmse - expect).abs() < 1e-7,
                "{}: {} vs {}",
                tr.type_name,
                tr.rmse,
                expect
            );
        }
        // Venue carries no labels, so no probe runs on the toy graph.
        assert!(report.probes.is_empty());
    }

    #[test]
    fn export_round_trips_through_the_dataset_loader() {
        let (g, tm) = toy_model();
        let dir = tempfile::tempdir().unwrap();
        completion_quality(&tm, &g, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert!(back.schema.iter().all(|t| t.attributed));
        let inf = tm.inference(&g).unwrap();
        for i in 0..3 {
            let expect = match &inf.recon_raw[i] {
                Some(rr) => rr.mapv(to_f64),
                None => inf.recon_hidden[i].mapv(to_f64),
            };
            let got = &back.features[i].as_ref().unwrap().matrix;
            assert_eq!(got, &expect, "type {i}");
        }
        assert_eq!(back.labels[0], g.labels[0]);
        assert_eq!(back.relations[1].adj, g.relations[1].adj);
    }

    #[test]
    fn neighbor_average_matches_hand_arithmetic() {
        let g = toy_hin();
        // Venue: paper neighbors {0, 1, 2}, no author neighbors.
        let venue = neighbor_average(&g, 2);
        assert_eq!(venue.dim(), (1, 7));
        let px = &g.features[0].as_ref().unwrap().matrix;
        for j in 0..4 {
            let mean = (px[(0, j)] + px[(1, j)] + px[(2, j)]) / 3.0;
            assert!((venue[(0, j)] - mean).abs() < 1e-12);
        }
        assert_eq!(venue[(0, 4)], 0.0);
        assert_eq!(venue[(0, 6)], 0.0);

        // Papers: P-P peers plus P-A authors; the venue block never forms
        // because venues are unattributed.
        let papers = neighbor_average(&g, 0);
        assert_eq!(papers.dim(), (3, 7));
        let ax = &g.features[1].as_ref().unwrap().matrix;
        for j in 0..4 {
            assert!((papers[(0, j)] - px[(1, j)]).abs() < 1e-12);
            let mid = (px[(0, j)] + px[(2, j)]) / 2.0;
            assert!((papers[(1, j)] - mid).abs() < 1e-12);
        }
        for j in 0..3 {
            assert!((papers[(0, 4 + j)] - ax[(0, j)]).abs() < 1e-12);
            assert!((papers[(2, 4 + j)] - ax[(1, j)]).abs() < 1e-12);
        }
    }

    #[test]
    fn probes_run_on_labeled_unattributed_types() {
        let g = make_synthetic_hin(&SyntheticSpec {
            papers: 40,
            authors: 20,
            intra_prob: 0.3,
            seed: 3,
            ..SyntheticSpec::default()
        });
        let cfg = TrainConfig {
            hidden_dim: 4,
            latent_dim: 32,
            heads: 1,
            decoder_layers: 1,
            noise_dim_node: 4,
            noise_dim_attr: 4,
            epochs: 3,
            ..TrainConfig::default()
        };
        let split = crate::hin::split_edges(&g, (0.85, 0.05, 0.10), cfg.seed).unwrap();
        let tm = train_with_split::<f32>(&g, &cfg, split).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let report = completion_quality(&tm, &g, dir.path()).unwrap();
        assert_eq!(report.rmse.len(), 1);
        assert_eq!(report.probes.len(), 1);
        let probe = &report.probes[0];
        assert_eq!(probe.type_name, "author");
        assert_eq!(probe.completed.ratio, COMPLETION_PROBE_RATIO);
        for f1 in [
            probe.completed.macro_f1.mean,
            probe.baseline.macro_f1.mean,
        ] {
            assert!((0.0..=1.0).contains(&f1));
        }
    }
}

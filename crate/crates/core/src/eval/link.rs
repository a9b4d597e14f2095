//! Link-prediction evaluation over a held-out edge split.
//!
//! Test positives and negatives are scored with the deterministic forward
//! pass (noise zeroed, latents at their means) against train-edge message
//! passing only, then ranked per relation into AUC and average precision.
//! One call scores one trained model; reports from models trained under
//! different seeds aggregate with [`aggregate_link_reports`].

use serde::{Deserialize, Serialize};

use crate::error::{GramiError, Result};
use crate::eval::classify::Summary;
use crate::eval::metrics::{auc, average_precision, mean_std};
use crate::hin::{EdgeSplit, HinGraph};
use crate::model::{self, GraphTensors, ModelDims};
use crate::numeric::Real;
use crate::trainer::TrainedModel;

/// Ranking quality for one relation's held-out edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationLink {
    pub relation: String,
    pub auc: Summary,
    pub ap: Summary,
}

/// Per-relation AUC/AP, aggregated over `runs` trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub runs: usize,
    pub relations: Vec<RelationLink>,
}

/// Score `split`'s test edges under `model`. Relations whose test partition
/// is missing a side are skipped; if that leaves nothing scoreable the call
/// fails with [`GramiError::EmptyTestSet`].
pub fn link_eval<F: Real>(
    model: &TrainedModel<F>,
    g: &HinGraph,
    split: &EdgeSplit,
) -> Result<LinkReport> {
    let gt: GraphTensors<F> = GraphTensors::new(g, Some(split));
    let dims = ModelDims::from_config(&model.config);
    let inf = model::infer(&model.params, &gt, &dims)?;

    let mut relations = Vec::new();
    for (r, rel) in g.relations.iter().enumerate() {
        let part = &split.relations[r];
        if part.test_pos.is_empty() || part.test_neg.is_empty() {
            continue;
        }
        let score = |pairs: &[(usize, usize)]| -> Vec<f64> {
            pairs
                .iter()
                .map(|&(u, v)| inf.edge_prob(rel.src_type, u, rel.dst_type, v))
                .collect()
        };
        let pos = score(&part.test_pos);
        let neg = score(&part.test_neg);
        relations.push(RelationLink {
            relation: rel.name.clone(),
            auc: Summary {
                mean: auc(&pos, &neg),
                std: 0.0,
            },
            ap: Summary {
                mean: average_precision(&pos, &neg),
                std: 0.0,
            },
        });
    }
    if relations.is_empty() {
        return Err(GramiError::EmptyTestSet);
    }
    Ok(LinkReport { runs: 1, relations })
}

/// Merge single-model reports into per-relation mean ± std across runs.
/// Every report must cover the same relations in the same order.
pub fn aggregate_link_reports(reports: &[LinkReport]) -> LinkReport {
    assert!(!reports.is_empty(), "nothing to aggregate");
    let names: Vec<&str> = reports[0]
        .relations
        .iter()
        .map(|r| r.relation.as_str())
        .collect();
    for rep in reports {
        let here: Vec<&str> = rep.relations.iter().map(|r| r.relation.as_str()).collect();
        assert_eq!(here, names, "reports cover different relations");
    }
    let relations = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let aucs: Vec<f64> = reports.iter().map(|r| r.relations[i].auc.mean).collect();
            let aps: Vec<f64> = reports.iter().map(|r| r.relations[i].ap.mean).collect();
            let (am, asd) = mean_std(&aucs);
            let (pm, psd) = mean_std(&aps);
            RelationLink {
                relation: (*name).to_string(),
                auc: Summary { mean: am, std: asd },
                ap: Summary { mean: pm, std: psd },
            }
        })
        .collect();
    LinkReport {
        runs: reports.iter().map(|r| r.runs).sum(),
        relations,
    }
}

//! Evaluation: ranking metrics, logistic-regression probes over latent
//! embeddings, link prediction on held-out edges, the synthetic benchmark
//! graph, and attribute-completion quality.

pub mod classify;
pub mod completion;
pub mod link;
pub mod metrics;
pub mod synthetic;

pub use classify::{classify, ClassificationReport, RatioF1, Summary, DEFAULT_RATIOS, DEFAULT_RUNS};
pub use completion::{completion_quality, neighbor_average, CompletionProbe, CompletionReport};
pub use link::{aggregate_link_reports, link_eval, LinkReport, RelationLink};
pub use metrics::{auc, average_precision, f1_scores, mean_std};
pub use synthetic::{make_synthetic_hin, SyntheticSpec};

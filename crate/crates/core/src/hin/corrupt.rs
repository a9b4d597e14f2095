//! Gaussian feature corruption for noise-robustness experiments.

use crate::numeric::RngStream;

use super::types::HinGraph;
use super::{HinError, Result};

/// Return a copy of `g` with i.i.d. `N(0, (k * sigma)^2)` noise added to
/// every attributed feature entry, where `sigma` is the standard deviation
/// pooled over all attributed entries of the graph. Topology, labels, and
/// non-attributed types are untouched. `k = 0` (or a constant feature set,
/// `sigma = 0`) returns the graph bit-identical.
pub fn corrupt_features(g: &HinGraph, multiplier: f64, seed: u64) -> Result<HinGraph> {
    let attributed = g.attributed_types();
    if attributed.is_empty() {
        return Err(HinError::NoAttributedType);
    }
    let sigma = pooled_std(g, &attributed);
    let scale = multiplier * sigma;
    let mut out = g.clone();
    if scale == 0.0 {
        return Ok(out);
    }
    let mut rng = RngStream::new(seed);
    for &t in &attributed {
        let table = out.features[t].as_mut().expect("attributed type");
        for v in table.matrix.iter_mut() {
            *v += scale * rng.standard_normal();
        }
    }
    Ok(out)
}

/// Population standard deviation over every entry of every attributed
/// feature matrix, pooled into one scalar.
fn pooled_std(g: &HinGraph, attributed: &[usize]) -> f64 {
    let mut n = 0usize;
    let mut mean = 0.0f64;
    for &t in attributed {
        for &v in g.feature_matrix(t).expect("attributed type").iter() {
            n += 1;
            mean += (v - mean) / n as f64;
        }
    }
    let mut var = 0.0f64;
    for &t in attributed {
        for &v in g.feature_matrix(t).expect("attributed type").iter() {
            var += (v - mean) * (v - mean);
        }
    }
    (var / n as f64).sqrt()
}

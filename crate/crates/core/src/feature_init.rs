//! Type-specific input transformation into the shared hidden space.
//!
//! Every node type is mapped to the same d̃-wide hidden representation
//! X̃_i: attributed types through a learned linear projection of their raw
//! features, attribute-free types through a per-node embedding table (the
//! projection of an implicit one-hot identity, realized as a row lookup so
//! the identity matrix is never materialized). A shared tanh keeps every
//! hidden entry in (−1, 1), which is also what makes X̃ a usable target
//! for the bounded hidden-reconstruction stage of the decoder.

use crate::config::ConfigError;
use crate::hin::HinGraph;
use crate::model::{xavier, GraphTensors};
use crate::numeric::{ModelParams, NodeId, Real, Result, RngStream, Tape};
use ndarray::Array2;

/// Insert the projection parameters for every type, in schema order:
/// `proj/<type>/w` (d̃ × d_i) + `proj/<type>/b` for attributed types,
/// `proj/<type>/emb` (n_i × d̃) + `proj/<type>/b` for the rest. Weights
/// and tables are Xavier-uniform, biases zero.
///
/// Fails when d̃ is not strictly below an attributed type's raw width —
/// the hidden space must be a compression.
pub fn init_projection<F: Real>(
    params: &mut ModelParams<F>,
    g: &HinGraph,
    hidden: usize,
    rng: &mut RngStream,
) -> std::result::Result<(), ConfigError> {
    for ty in &g.schema {
        if ty.attributed {
            if hidden >= ty.feature_dim {
                return Err(ConfigError::HiddenDimTooLarge {
                    hidden,
                    feature_dim: ty.feature_dim,
                    ty: ty.name.clone(),
                });
            }
            params
                .insert(format!("proj/{}/w", ty.name), xavier(hidden, ty.feature_dim, rng))
                .expect("unique parameter names");
        } else {
            params
                .insert(format!("proj/{}/emb", ty.name), xavier(ty.count, hidden, rng))
                .expect("unique parameter names");
        }
        params
            .insert(format!("proj/{}/b", ty.name), Array2::zeros((1, hidden)))
            .expect("unique parameter names");
    }
    Ok(())
}

/// Build X̃_i for every type on the tape: `tanh(X_i Wᵀ + b)` for
/// attributed types, `tanh(E + b)` rowwise for embedding types. Returns
/// one `n_i × d̃` node per type, in schema order.
pub fn project<F: Real>(
    tape: &mut Tape<F>,
    params: &ModelParams<F>,
    gt: &GraphTensors<F>,
) -> Result<Vec<NodeId>> {
    let mut out = Vec::with_capacity(gt.n_types());
    for i in 0..gt.n_types() {
        let name = &gt.type_names[i];
        let b = tape.param(params, &format!("proj/{name}/b"))?;
        let lin = match &gt.features[i] {
            Some(x) => {
                let w = tape.param(params, &format!("proj/{name}/w"))?;
                let wt = tape.transpose(w);
                let xc = tape.constant_shared(x.clone());
                tape.matmul(xc, wt)?
            }
            None => tape.param(params, &format!("proj/{name}/emb"))?,
        };
        let shifted = tape.add_rowvec(lin, b)?;
        out.push(tape.tanh(shifted));
    }
    Ok(out)
}

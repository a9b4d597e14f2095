//! The generative side of the model: inner-product edge logits, a
//! hidden-feature reconstruction `X̃' = tanh(Z^V Z^Aᵀ)` optionally refined
//! by further relation-attention layers, and per-type MLPs lifting hidden
//! reconstructions back to raw feature space.

use crate::encoder::init_attention_layer;
use crate::error::{GramiError, Result};
use crate::hin::HinGraph;
use crate::model::{xavier, GraphTensors, ModelDims};
use crate::numeric::{self, ModelParams, NodeId, Real, RngStream, Tape};
use ndarray::Array2;
use std::sync::Arc;

/// Insert the decoder parameters: per refinement layer the same
/// relation/head attention shapes as the encoder (acting d̃ → d̃), then a
/// two-layer reconstruction MLP (`d̃ → k → d_i`, tanh hidden, linear
/// output) for every attributed type.
pub fn init_decoder<F: Real>(
    params: &mut ModelParams<F>,
    g: &HinGraph,
    dims: &ModelDims,
    rng: &mut RngStream,
) {
    for l in 0..dims.decoder_layers {
        init_attention_layer(
            params,
            g,
            &format!("dec/l{l}"),
            dims.hidden,
            dims.hidden,
            dims.heads,
            rng,
        );
    }
    for ty in &g.schema {
        if !ty.attributed {
            continue;
        }
        params
            .insert(
                format!("recon/{}/w1", ty.name),
                xavier(dims.hidden, dims.latent, rng),
            )
            .expect("unique parameter names");
        params
            .insert(format!("recon/{}/b1", ty.name), Array2::zeros((1, dims.latent)))
            .expect("unique parameter names");
        params
            .insert(
                format!("recon/{}/w2", ty.name),
                xavier(dims.latent, ty.feature_dim, rng),
            )
            .expect("unique parameter names");
        params
            .insert(
                format!("recon/{}/b2", ty.name),
                Array2::zeros((1, ty.feature_dim)),
            )
            .expect("unique parameter names");
    }
}

/// Inner-product logits for an explicit list of `(u, v)` pairs:
/// `logit = z_uᵀ z_v`, returned as an `(m × 1)` column. Only the listed
/// pairs are materialized — never a dense score matrix.
pub fn edge_logits<F: Real>(
    tape: &mut Tape<F>,
    z_src: NodeId,
    z_dst: NodeId,
    pairs: &[(usize, usize)],
) -> numeric::Result<NodeId> {
    let (us, vs): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
    let zu = tape.gather_rows(z_src, Arc::new(us))?;
    let zv = tape.gather_rows(z_dst, Arc::new(vs))?;
    let prod = tape.mul(zu, zv)?;
    Ok(tape.sum_rows(prod))
}

/// Reconstruct hidden features for every type: `tanh(Z^V_i Z^A_iᵀ)`
/// followed by the configured number of attention refinement layers, each
/// ending in tanh. Zero layers return the base product unchanged.
pub fn recon_hidden<F: Real>(
    tape: &mut Tape<F>,
    params: &ModelParams<F>,
    gt: &GraphTensors<F>,
    z_node: &[NodeId],
    z_attr: &[NodeId],
    dims: &ModelDims,
) -> numeric::Result<Vec<NodeId>> {
    let mut cur = Vec::with_capacity(gt.n_types());
    for i in 0..gt.n_types() {
        let at = tape.transpose(z_attr[i]);
        let prod = tape.matmul(z_node[i], at)?;
        cur.push(tape.tanh(prod));
    }
    for l in 0..dims.decoder_layers {
        let refined = crate::encoder::hgnn_layer(
            tape,
            params,
            gt,
            &cur,
            &format!("dec/l{l}"),
            dims.heads,
            dims.hidden,
        )?;
        cur = refined.into_iter().map(|id| tape.tanh(id)).collect();
    }
    Ok(cur)
}

/// Lift one attributed type's hidden reconstruction to raw feature space
/// through its MLP. Attribute-free types have no raw space to decode
/// into, which is reported as an error rather than a silent skip.
pub fn recon_raw<F: Real>(
    tape: &mut Tape<F>,
    params: &ModelParams<F>,
    gt: &GraphTensors<F>,
    ty: usize,
    rh_i: NodeId,
) -> Result<NodeId> {
    if !gt.attributed[ty] {
        return Err(GramiError::NotAttributedType {
            ty: gt.type_names[ty].clone(),
        });
    }
    let name = &gt.type_names[ty];
    let w1 = tape.param(params, &format!("recon/{name}/w1"))?;
    let b1 = tape.param(params, &format!("recon/{name}/b1"))?;
    let w2 = tape.param(params, &format!("recon/{name}/w2"))?;
    let b2 = tape.param(params, &format!("recon/{name}/b2"))?;
    let lin1 = tape.matmul(rh_i, w1)?;
    let lin1 = tape.add_rowvec(lin1, b1)?;
    let act = tape.tanh(lin1);
    let lin2 = tape.matmul(act, w2)?;
    Ok(tape.add_rowvec(lin2, b2)?)
}

//! The inference side of the model: a two-layer relation-attention HGNN
//! over all types producing per-node Gaussian parameters, a per-type MLP
//! producing per-attribute Gaussian parameters, and reparameterized
//! sampling.
//!
//! Noise enters only through the inputs — a standard-normal block ε₁ is
//! concatenated to the hidden features before the node encoder and ε₂ to
//! the transposed hidden features before the attribute encoder — which
//! makes the resulting Gaussian parameters themselves random (the
//! semi-implicit construction). Zero-width noise degenerates both
//! encoders to plain variational ones, which tests exploit.

use std::sync::Arc;

use ndarray::Array2;

use crate::hin::HinGraph;
use crate::model::{xavier, GraphTensors, ModelDims, NoiseDraw};
use crate::numeric::{scalar, ModelParams, NodeId, Real, Result, RngStream, Tape};
use crate::sparse::EdgeGroups;

/// Negative-side slope of the attention score nonlinearity.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Symmetric clamp applied to every log-variance output.
pub const LOGVAR_CLAMP: f64 = 10.0;

/// Which axis a latent describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentAxis {
    /// One row per node of a type.
    Node,
    /// One row per hidden dimension (attribute) of a type.
    Attribute,
}

/// Gaussian parameters (and, once drawn, a sample) for one type along one
/// axis. `logvar` is clamped to ±[`LOGVAR_CLAMP`] at construction.
#[derive(Debug, Clone)]
pub struct GaussianLatent {
    pub mu: NodeId,
    pub logvar: NodeId,
    pub sample: Option<NodeId>,
    pub axis: LatentAxis,
}

/// Insert the node encoder's attention parameters: for each of the two
/// layers, per relation and head, a weight `(out × in)` and an attention
/// vector `(1 × 2·out)`. Layer 0 maps d̃+ď → d̃; layer 1 emits the 2k
/// channels later split into (μ, logvar).
pub fn init_node_encoder<F: Real>(
    params: &mut ModelParams<F>,
    g: &HinGraph,
    dims: &ModelDims,
    rng: &mut RngStream,
) {
    let layer_dims = [
        (dims.hidden + dims.noise_node, dims.hidden),
        (dims.hidden, 2 * dims.latent),
    ];
    for (l, &(input, out)) in layer_dims.iter().enumerate() {
        init_attention_layer(params, g, &format!("enc/l{l}"), input, out, dims.heads, rng);
    }
}

/// Shared by the encoder and the decoder's refinement stack: one
/// attention parameter pair per relation and head under `prefix`.
pub(crate) fn init_attention_layer<F: Real>(
    params: &mut ModelParams<F>,
    g: &HinGraph,
    prefix: &str,
    input: usize,
    out: usize,
    heads: usize,
    rng: &mut RngStream,
) {
    for rel in &g.relations {
        for h in 0..heads {
            params
                .insert(format!("{prefix}/{}/h{h}/w", rel.name), xavier(out, input, rng))
                .expect("unique parameter names");
            params
                .insert(format!("{prefix}/{}/h{h}/a", rel.name), xavier(1, 2 * out, rng))
                .expect("unique parameter names");
        }
    }
}

/// Insert the attribute encoders: for every type, a two-layer MLP from
/// `n_i + d̂` (a transposed hidden column plus noise) through a k-wide
/// tanh layer to 2k channels. Attribute-free types get one too — their
/// attribute latents drive hidden-feature completion.
pub fn init_attribute_encoders<F: Real>(
    params: &mut ModelParams<F>,
    g: &HinGraph,
    dims: &ModelDims,
    rng: &mut RngStream,
) {
    for ty in &g.schema {
        let input = ty.count + dims.noise_attr;
        params
            .insert(format!("attrenc/{}/w1", ty.name), xavier(input, dims.latent, rng))
            .expect("unique parameter names");
        params
            .insert(format!("attrenc/{}/b1", ty.name), Array2::zeros((1, dims.latent)))
            .expect("unique parameter names");
        params
            .insert(
                format!("attrenc/{}/w2", ty.name),
                xavier(dims.latent, 2 * dims.latent, rng),
            )
            .expect("unique parameter names");
        params
            .insert(
                format!("attrenc/{}/b2", ty.name),
                Array2::zeros((1, 2 * dims.latent)),
            )
            .expect("unique parameter names");
    }
}

/// One head of relation attention in one direction: aggregating nodes
/// attend over their neighbors, scores are
/// `leaky_relu(a · [W h_agg ∥ W h_nbr])` softmaxed per neighborhood, and
/// the output is the attention-weighted sum of projected neighbors.
/// Nodes with no neighbors receive zero rows.
pub fn relation_attention<F: Real>(
    tape: &mut Tape<F>,
    groups: &EdgeGroups,
    h_agg: NodeId,
    h_nbr: NodeId,
    w: NodeId,
    a: NodeId,
) -> Result<NodeId> {
    let wt = tape.transpose(w);
    let p_agg = tape.matmul(h_agg, wt)?;
    let p_nbr = tape.matmul(h_nbr, wt)?;
    let out_dim = tape.shape(p_agg).1;
    let a_l = tape.slice_cols(a, 0, out_dim)?;
    let a_r = tape.slice_cols(a, out_dim, 2 * out_dim)?;
    let a_l = tape.transpose(a_l);
    let a_r = tape.transpose(a_r);
    let s_agg = tape.matmul(p_agg, a_l)?;
    let s_nbr = tape.matmul(p_nbr, a_r)?;
    let e_agg = tape.gather_rows(s_agg, groups.agg.clone())?;
    let e_nbr = tape.gather_rows(s_nbr, groups.nbr.clone())?;
    let e = tape.add(e_agg, e_nbr)?;
    let e = tape.leaky_relu(e, scalar(LEAKY_SLOPE));
    let alpha = tape.segment_softmax(e, groups.offsets.clone())?;
    let msgs = tape.gather_rows(p_nbr, groups.nbr.clone())?;
    let weighted = tape.mul_colvec(msgs, alpha)?;
    tape.scatter_add_rows(weighted, groups.agg.clone(), groups.n_agg)
}

/// One full HGNN layer: every direction's heads are averaged, directions
/// are summed per aggregating type, and each node's accumulated message
/// is divided by the number of relations in which it has neighbors (the
/// MEAN merge). Types untouched by any relation yield zero matrices.
pub fn hgnn_layer<F: Real>(
    tape: &mut Tape<F>,
    params: &ModelParams<F>,
    gt: &GraphTensors<F>,
    inputs: &[NodeId],
    prefix: &str,
    heads: usize,
    out_dim: usize,
) -> Result<Vec<NodeId>> {
    let mut acc: Vec<Option<NodeId>> = vec![None; gt.n_types()];
    for dir in &gt.directions {
        let rel_name = &gt.relation_names[dir.relation];
        let mut head_sum: Option<NodeId> = None;
        for h in 0..heads {
            let w = tape.param(params, &format!("{prefix}/{rel_name}/h{h}/w"))?;
            let a = tape.param(params, &format!("{prefix}/{rel_name}/h{h}/a"))?;
            let m = relation_attention(
                tape,
                &dir.groups,
                inputs[dir.agg_type],
                inputs[dir.nbr_type],
                w,
                a,
            )?;
            head_sum = Some(match head_sum {
                None => m,
                Some(s) => tape.add(s, m)?,
            });
        }
        let mut rel_out = head_sum.expect("at least one head");
        if heads > 1 {
            rel_out = tape.scale(rel_out, scalar(1.0 / heads as f64));
        }
        acc[dir.agg_type] = Some(match acc[dir.agg_type] {
            None => rel_out,
            Some(s) => tape.add(s, rel_out)?,
        });
    }
    let mut out = Vec::with_capacity(gt.n_types());
    for (i, merged) in acc.into_iter().enumerate() {
        match merged {
            Some(m) => {
                let inv = tape.constant_shared(gt.inv_mean_counts[i].clone());
                out.push(tape.mul_colvec(m, inv)?);
            }
            None => out.push(tape.constant(Array2::zeros((gt.counts[i], out_dim)))),
        }
    }
    Ok(out)
}

/// The node encoder: concatenate ε₁ to every type's hidden features,
/// apply dropout masks when provided, run two attention layers (tanh
/// between them), and split the final 2k channels into (μ, logvar) per
/// type.
pub fn node_encode<F: Real>(
    tape: &mut Tape<F>,
    params: &ModelParams<F>,
    gt: &GraphTensors<F>,
    hidden: &[NodeId],
    dims: &ModelDims,
    draw: &NoiseDraw<F>,
) -> Result<Vec<GaussianLatent>> {
    let mut x = Vec::with_capacity(gt.n_types());
    for i in 0..gt.n_types() {
        let mut h = hidden[i];
        if dims.noise_node > 0 {
            let eps = tape.constant_shared(draw.eps_node[i].clone());
            h = tape.concat_cols(h, eps)?;
        }
        if let Some(mask) = draw.dropout_l0.get(i) {
            let m = tape.constant_shared(mask.clone());
            h = tape.mul(h, m)?;
        }
        x.push(h);
    }
    let l0 = hgnn_layer(tape, params, gt, &x, "enc/l0", dims.heads, dims.hidden)?;
    let mut h1 = Vec::with_capacity(gt.n_types());
    for (i, &id) in l0.iter().enumerate() {
        let mut t = tape.tanh(id);
        if let Some(mask) = draw.dropout_l1.get(i) {
            let m = tape.constant_shared(mask.clone());
            t = tape.mul(t, m)?;
        }
        h1.push(t);
    }
    let l1 = hgnn_layer(tape, params, gt, &h1, "enc/l1", dims.heads, 2 * dims.latent)?;
    let mut out = Vec::with_capacity(gt.n_types());
    for id in l1 {
        let mu = tape.slice_cols(id, 0, dims.latent)?;
        let lv = tape.slice_cols(id, dims.latent, 2 * dims.latent)?;
        let lv = tape.clamp(lv, scalar(-LOGVAR_CLAMP), scalar(LOGVAR_CLAMP));
        out.push(GaussianLatent {
            mu,
            logvar: lv,
            sample: None,
            axis: LatentAxis::Node,
        });
    }
    Ok(out)
}

/// The attribute encoder for one type: rows of the transposed hidden
/// matrix (one per hidden dimension) get ε₂ appended and pass through the
/// type's two-layer MLP; the 2k outputs split into (μ, logvar) with the
/// usual clamp.
pub fn attribute_encode<F: Real>(
    tape: &mut Tape<F>,
    params: &ModelParams<F>,
    gt: &GraphTensors<F>,
    ty: usize,
    hidden_i: NodeId,
    dims: &ModelDims,
    draw: &NoiseDraw<F>,
) -> Result<GaussianLatent> {
    let name = &gt.type_names[ty];
    let mut input = tape.transpose(hidden_i);
    if dims.noise_attr > 0 {
        let eps = tape.constant_shared(draw.eps_attr[ty].clone());
        input = tape.concat_cols(input, eps)?;
    }
    let w1 = tape.param(params, &format!("attrenc/{name}/w1"))?;
    let b1 = tape.param(params, &format!("attrenc/{name}/b1"))?;
    let w2 = tape.param(params, &format!("attrenc/{name}/w2"))?;
    let b2 = tape.param(params, &format!("attrenc/{name}/b2"))?;
    let lin1 = tape.matmul(input, w1)?;
    let lin1 = tape.add_rowvec(lin1, b1)?;
    let act = tape.tanh(lin1);
    let lin2 = tape.matmul(act, w2)?;
    let lin2 = tape.add_rowvec(lin2, b2)?;
    let mu = tape.slice_cols(lin2, 0, dims.latent)?;
    let lv = tape.slice_cols(lin2, dims.latent, 2 * dims.latent)?;
    let lv = tape.clamp(lv, scalar(-LOGVAR_CLAMP), scalar(LOGVAR_CLAMP));
    Ok(GaussianLatent {
        mu,
        logvar: lv,
        sample: None,
        axis: LatentAxis::Attribute,
    })
}

/// Reparameterized draw: `sample = μ + exp(logvar/2) ⊙ ζ` with the given
/// standard-normal ζ entering as a constant, so gradients flow through μ
/// and logvar only. Records the sample on the latent and returns it.
pub fn sample_latent<F: Real>(
    tape: &mut Tape<F>,
    lat: &mut GaussianLatent,
    zeta: Arc<Array2<F>>,
) -> Result<NodeId> {
    let half = tape.scale(lat.logvar, scalar(0.5));
    let std = tape.exp(half);
    let z = tape.constant_shared(zeta);
    let noise = tape.mul(std, z)?;
    let sample = tape.add(lat.mu, noise)?;
    lat.sample = Some(sample);
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_init;
    use crate::hin::{toy_hin, HinGraph, NodeTypeSchema, RelationSpec};
    use crate::numeric::{grad_check, NumericError};
    use crate::sparse::Csr;
    use ndarray::{array, Array2};

    /// Deterministic patterned matrix, trivially reproducible elsewhere:
    /// entry (i, j) = sin(0.1·(1 + i·cols + j) + 0.3·t).
    fn pat(rows: usize, cols: usize, t: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |(i, j)| {
            (0.1 * (1 + i * cols + j) as f64 + 0.3 * t as f64).sin()
        })
    }

    fn groups_of(edges: &[(usize, usize)], n_agg: usize, n_nbr: usize) -> EdgeGroups {
        let csr = Csr::from_edges(n_agg, n_nbr, edges).unwrap();
        EdgeGroups::from_csr(&csr)
    }

    #[test]
    fn single_neighbor_passes_projected_feature_through() {
        // One aggregating node with exactly one neighbor: α = 1, so the
        // output is W x_v regardless of the attention vector.
        let groups = groups_of(&[(0, 1)], 1, 2);
        let h_nbr_vals = array![[0.3, -0.2], [0.5, 0.7]];
        let w_vals = pat(2, 2, 0);
        let mut tape: Tape<f64> = Tape::new();
        let h_agg = tape.constant(array![[0.1, 0.9]]);
        let h_nbr = tape.constant(h_nbr_vals.clone());
        let w = tape.constant(w_vals.clone());
        let a = tape.constant(pat(1, 4, 1));
        let out = relation_attention(&mut tape, &groups, h_agg, h_nbr, w, a).unwrap();
        let expect = h_nbr_vals.dot(&w_vals.t());
        let got = tape.value(out);
        for j in 0..2 {
            assert!((got[[0, j]] - expect[[1, j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_neighbors_split_attention_evenly() {
        let groups = groups_of(&[(0, 0), (0, 1)], 1, 2);
        let w_vals = pat(2, 2, 2);
        let nbr = array![[0.4, -0.6], [0.4, -0.6]];
        let mut tape: Tape<f64> = Tape::new();
        let h_agg = tape.constant(array![[0.2, 0.1]]);
        let h_nbr = tape.constant(nbr.clone());
        let w = tape.constant(w_vals.clone());
        let a = tape.constant(pat(1, 4, 3));
        let out = relation_attention(&mut tape, &groups, h_agg, h_nbr, w, a).unwrap();
        // Both neighbors identical → mean equals either projected row.
        let expect = nbr.dot(&w_vals.t());
        let got = tape.value(out);
        for j in 0..2 {
            assert!((got[[0, j]] - expect[[0, j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_matches_edge_loop_oracle() {
        // 5 aggregating nodes, 6 edges over 4 neighbors, random params.
        let edges = [(0, 1), (0, 3), (1, 0), (2, 2), (2, 3), (4, 0)];
        let groups = groups_of(&edges, 5, 4);
        let h_agg_v = pat(5, 3, 4);
        let h_nbr_v = pat(4, 3, 5);
        let w_v = pat(2, 3, 6);
        let a_v = pat(1, 4, 7);

        let mut tape: Tape<f64> = Tape::new();
        let h_agg = tape.constant(h_agg_v.clone());
        let h_nbr = tape.constant(h_nbr_v.clone());
        let w = tape.constant(w_v.clone());
        let a = tape.constant(a_v.clone());
        let out = relation_attention(&mut tape, &groups, h_agg, h_nbr, w, a).unwrap();
        let got = tape.value(out).to_owned();

        // Scalar loop over every aggregating node's neighborhood.
        let p_agg = h_agg_v.dot(&w_v.t());
        let p_nbr = h_nbr_v.dot(&w_v.t());
        let mut expect = Array2::<f64>::zeros((5, 2));
        for u in 0..5 {
            let nbrs: Vec<usize> = edges.iter().filter(|e| e.0 == u).map(|e| e.1).collect();
            if nbrs.is_empty() {
                continue;
            }
            let scores: Vec<f64> = nbrs
                .iter()
                .map(|&v| {
                    let mut s = 0.0;
                    for j in 0..2 {
                        s += a_v[[0, j]] * p_agg[[u, j]] + a_v[[0, 2 + j]] * p_nbr[[v, j]];
                    }
                    if s < 0.0 {
                        s * LEAKY_SLOPE
                    } else {
                        s
                    }
                })
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            for (idx, &v) in nbrs.iter().enumerate() {
                for j in 0..2 {
                    expect[[u, j]] += exps[idx] / z * p_nbr[[v, j]];
                }
            }
        }
        for u in 0..5 {
            for j in 0..2 {
                assert!(
                    (got[[u, j]] - expect[[u, j]]).abs() < 1e-6,
                    "({u},{j}): {} vs {}",
                    got[[u, j]],
                    expect[[u, j]]
                );
            }
        }
        // Node 3 has no neighbors → zero row.
        assert_eq!(got[[3, 0]], 0.0);
        assert_eq!(got[[3, 1]], 0.0);
    }

    #[test]
    fn attention_weights_sum_to_one_over_each_neighborhood() {
        // With every neighbor feature identical, the output equals the
        // projected shared feature iff the weights sum to 1 — checked over
        // random parameter draws and ragged neighborhoods.
        let edges = [(0, 0), (0, 1), (0, 2), (1, 2), (2, 0), (2, 1), (2, 2)];
        let groups = groups_of(&edges, 3, 3);
        for seed in 0..30 {
            let mut rng = RngStream::new(seed);
            let shared: Vec<f64> = (0..3).map(|_| rng.uniform_symmetric(1.0)).collect();
            let nbr = Array2::from_shape_fn((3, 3), |(_, j)| shared[j]);
            let mut tape: Tape<f64> = Tape::new();
            let h_agg = tape.constant(xavier(3, 3, &mut rng));
            let h_nbr = tape.constant(nbr.clone());
            let w_v: Array2<f64> = xavier(2, 3, &mut rng);
            let w = tape.constant(w_v.clone());
            let a = tape.constant(xavier(1, 4, &mut rng));
            let out = relation_attention(&mut tape, &groups, h_agg, h_nbr, w, a).unwrap();
            let expect = nbr.dot(&w_v.t());
            let got = tape.value(out);
            for u in 0..3 {
                for j in 0..2 {
                    assert!((got[[u, j]] - expect[[0, j]]).abs() < 1e-6);
                }
            }
        }
    }

    fn toy_dims_one_head() -> ModelDims {
        ModelDims {
            hidden: 2,
            latent: 2,
            heads: 1,
            decoder_layers: 0,
            noise_node: 1,
            noise_attr: 1,
        }
    }

    /// Hand-patterned parameter set for the desk oracle; the `t` indices
    /// fix every tensor's content independently of any RNG.
    fn oracle_params() -> ModelParams<f64> {
        let mut p = ModelParams::new();
        p.insert("proj/paper/w", pat(2, 4, 0)).unwrap();
        p.insert("proj/paper/b", pat(1, 2, 1)).unwrap();
        p.insert("proj/author/w", pat(2, 3, 2)).unwrap();
        p.insert("proj/author/b", pat(1, 2, 3)).unwrap();
        p.insert("proj/venue/emb", pat(1, 2, 4)).unwrap();
        p.insert("proj/venue/b", pat(1, 2, 5)).unwrap();
        p.insert("enc/l0/P-P/h0/w", pat(2, 3, 6)).unwrap();
        p.insert("enc/l0/P-P/h0/a", pat(1, 4, 7)).unwrap();
        p.insert("enc/l0/P-A/h0/w", pat(2, 3, 8)).unwrap();
        p.insert("enc/l0/P-A/h0/a", pat(1, 4, 9)).unwrap();
        p.insert("enc/l0/P-V/h0/w", pat(2, 3, 10)).unwrap();
        p.insert("enc/l0/P-V/h0/a", pat(1, 4, 11)).unwrap();
        p.insert("enc/l1/P-P/h0/w", pat(4, 2, 12)).unwrap();
        p.insert("enc/l1/P-P/h0/a", pat(1, 8, 13)).unwrap();
        p.insert("enc/l1/P-A/h0/w", pat(4, 2, 14)).unwrap();
        p.insert("enc/l1/P-A/h0/a", pat(1, 8, 15)).unwrap();
        p.insert("enc/l1/P-V/h0/w", pat(4, 2, 16)).unwrap();
        p.insert("enc/l1/P-V/h0/a", pat(1, 8, 17)).unwrap();
        p
    }

    fn oracle_draw() -> NoiseDraw<f64> {
        NoiseDraw {
            eps_node: vec![
                Arc::new(pat(3, 1, 18)),
                Arc::new(pat(2, 1, 19)),
                Arc::new(pat(1, 1, 20)),
            ],
            eps_attr: Vec::new(),
            zeta_node: Vec::new(),
            zeta_attr: Vec::new(),
            dropout_l0: Vec::new(),
            dropout_l1: Vec::new(),
        }
    }

    #[test]
    fn node_encode_matches_independent_float64_oracle() {
        let g = toy_hin();
        let gt: GraphTensors<f64> = GraphTensors::new(&g, None);
        let dims = toy_dims_one_head();
        let params = oracle_params();
        let draw = oracle_draw();
        let mut tape: Tape<f64> = Tape::new();
        let hidden = feature_init::project(&mut tape, &params, &gt).unwrap();
        let lat = node_encode(&mut tape, &params, &gt, &hidden, &dims, &draw).unwrap();

        // Frozen outputs of an independent float64 re-implementation of
        // the same arithmetic (projection, two attention layers, MEAN
        // merge, μ/logvar split) in a scripting environment.
        let expect_mu_paper = array![
            [-0.22515128182121724, -0.24962126324489575],
            [-0.23529213458999687, -0.26247185864233624],
            [-0.19154326978085323, -0.21406238441371375],
        ];
        let expect_lv_paper = array![
            [-0.26413963262844814, -0.2681275883999162],
            [-0.27918765796845235, -0.28477312639896807],
            [-0.22804750729291637, -0.23294109570187457],
        ];
        let expect_mu_author = array![
            [-0.34571126817528475, -0.3676235924338559],
            [-0.3647954013367696, -0.3877940171449132],
        ];
        let expect_mu_venue = array![[-0.3731315778821115, -0.35040883763631664]];

        let close = |got: &Array2<f64>, want: &Array2<f64>| {
            assert_eq!(got.dim(), want.dim());
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() < 1e-9, "{g} vs {w}");
            }
        };
        close(&tape.value(lat[0].mu).to_owned(), &expect_mu_paper);
        close(&tape.value(lat[0].logvar).to_owned(), &expect_lv_paper);
        close(&tape.value(lat[1].mu).to_owned(), &expect_mu_author);
        close(&tape.value(lat[2].mu).to_owned(), &expect_mu_venue);
    }

    #[test]
    fn zero_weights_and_no_noise_give_zero_gaussians() {
        let g = toy_hin();
        let gt: GraphTensors<f64> = GraphTensors::new(&g, None);
        let dims = ModelDims {
            noise_node: 0,
            ..toy_dims_one_head()
        };
        let mut params = oracle_params();
        // Zero both layers' weights; projections stay nonzero.
        for name in [
            "enc/l0/P-P/h0/w",
            "enc/l0/P-A/h0/w",
            "enc/l0/P-V/h0/w",
            "enc/l1/P-P/h0/w",
            "enc/l1/P-A/h0/w",
            "enc/l1/P-V/h0/w",
        ] {
            let idx = params.idx(name).unwrap();
            let off = params.offset(idx);
            let len = params.value(idx).len();
            for c in off..off + len {
                params.set_coord(c, 0.0);
            }
        }
        // Layer-0 input width shrinks with ď = 0.
        let mut p2 = ModelParams::new();
        for i in 0..params.len() {
            let name = params.name(i).to_string();
            let v = params.value(i).as_ref().clone();
            if name.starts_with("enc/l0") && name.ends_with("/w") {
                p2.insert(name, Array2::zeros((2, 2))).unwrap();
            } else {
                p2.insert(name, v).unwrap();
            }
        }
        let draw = NoiseDraw::inference(&gt, &dims);
        let mut tape: Tape<f64> = Tape::new();
        let hidden = feature_init::project(&mut tape, &p2, &gt).unwrap();
        let lat = node_encode(&mut tape, &p2, &gt, &hidden, &dims, &draw).unwrap();
        for l in &lat {
            assert!(tape.value(l.mu).iter().all(|&v| v == 0.0));
            assert!(tape.value(l.logvar).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn node_encode_is_deterministic_for_a_fixed_draw() {
        let g = toy_hin();
        let gt: GraphTensors<f64> = GraphTensors::new(&g, None);
        let dims = toy_dims_one_head();
        let params = oracle_params();
        let draw = oracle_draw();
        let run = || {
            let mut tape: Tape<f64> = Tape::new();
            let hidden = feature_init::project(&mut tape, &params, &gt).unwrap();
            let lat = node_encode(&mut tape, &params, &gt, &hidden, &dims, &draw).unwrap();
            (
                tape.value(lat[0].mu).to_owned(),
                tape.value(lat[1].logvar).to_owned(),
            )
        };
        let (a_mu, a_lv) = run();
        let (b_mu, b_lv) = run();
        assert_eq!(a_mu, b_mu);
        assert_eq!(a_lv, b_lv);
    }

    #[test]
    fn singleton_relation_mean_is_identity() {
        // Authors touch only the P-A relation, so their layer-0 output
        // must equal that single direction's attention message verbatim.
        let g = toy_hin();
        let gt: GraphTensors<f64> = GraphTensors::new(&g, None);
        let params = oracle_params();
        let draw = oracle_draw();
        let mut tape: Tape<f64> = Tape::new();
        let hidden = feature_init::project(&mut tape, &params, &gt).unwrap();
        let mut x = Vec::new();
        for i in 0..3 {
            let eps = tape.constant_shared(draw.eps_node[i].clone());
            x.push(tape.concat_cols(hidden[i], eps).unwrap());
        }
        let l0 = hgnn_layer(&mut tape, &params, &gt, &x, "enc/l0", 1, 2).unwrap();

        // The author-aggregating direction of P-A is the third direction
        // (P-P, P-A forward, P-A reverse, ...).
        let dir = &gt.directions[2];
        assert_eq!(dir.agg_type, 1);
        let w = tape.param(&params, "enc/l0/P-A/h0/w").unwrap();
        let a = tape.param(&params, "enc/l0/P-A/h0/a").unwrap();
        let msg = relation_attention(&mut tape, &dir.groups, x[1], x[0], w, a).unwrap();
        let merged = tape.value(l0[1]).to_owned();
        let single = tape.value(msg).to_owned();
        assert_eq!(merged, single);
    }

    #[test]
    fn node_encode_is_permutation_equivariant() {
        // Swap the two nodes of a 2-node attributed type (features, edges,
        // and noise rows) and verify the latents swap with them.
        let mk = |flip: bool| {
            let feats = if flip {
                array![[0.7, 0.2, -0.3], [0.1, -0.4, 0.9]]
            } else {
                array![[0.1, -0.4, 0.9], [0.7, 0.2, -0.3]]
            };
            let edges = if flip { vec![(0, 0)] } else { vec![(1, 0)] };
            HinGraph::new(
                vec![
                    NodeTypeSchema {
                        name: "t".into(),
                        count: 2,
                        attributed: true,
                        feature_dim: 3,
                    },
                    NodeTypeSchema {
                        name: "u".into(),
                        count: 1,
                        attributed: false,
                        feature_dim: 0,
                    },
                ],
                vec![RelationSpec {
                    name: "t-u".into(),
                    src_type: 0,
                    dst_type: 1,
                    edges,
                }],
                vec![
                    Some(crate::hin::FeatureTable {
                        type_id: 0,
                        matrix: feats,
                        format: crate::hin::FeatureFormat::Csv,
                    }),
                    None,
                ],
                vec![None, None],
            )
            .unwrap()
        };
        let mut params = ModelParams::new();
        params.insert("proj/t/w", pat(2, 3, 0)).unwrap();
        params.insert("proj/t/b", pat(1, 2, 1)).unwrap();
        params.insert("proj/u/emb", pat(1, 2, 2)).unwrap();
        params.insert("proj/u/b", pat(1, 2, 3)).unwrap();
        params.insert("enc/l0/t-u/h0/w", pat(2, 3, 4)).unwrap();
        params.insert("enc/l0/t-u/h0/a", pat(1, 4, 5)).unwrap();
        params.insert("enc/l1/t-u/h0/w", pat(4, 2, 6)).unwrap();
        params.insert("enc/l1/t-u/h0/a", pat(1, 8, 7)).unwrap();
        let dims = toy_dims_one_head();

        let eps_t = pat(2, 1, 8);
        let eps_t_flipped = {
            let mut e = eps_t.clone();
            e.swap([0, 0], [1, 0]);
            e
        };
        let draw = |flip: bool| NoiseDraw::<f64> {
            eps_node: vec![
                Arc::new(if flip { eps_t_flipped.clone() } else { eps_t.clone() }),
                Arc::new(pat(1, 1, 9)),
            ],
            eps_attr: Vec::new(),
            zeta_node: Vec::new(),
            zeta_attr: Vec::new(),
            dropout_l0: Vec::new(),
            dropout_l1: Vec::new(),
        };

        let run = |flip: bool| {
            let g = mk(flip);
            let gt: GraphTensors<f64> = GraphTensors::new(&g, None);
            let d = draw(flip);
            let mut tape: Tape<f64> = Tape::new();
            let hidden = feature_init::project(&mut tape, &params, &gt).unwrap();
            let lat = node_encode(&mut tape, &params, &gt, &hidden, &dims, &d).unwrap();
            tape.value(lat[0].mu).to_owned()
        };
        let base = run(false);
        let flipped = run(true);
        for j in 0..2 {
            assert!((base[[0, j]] - flipped[[1, j]]).abs() < 1e-12);
            assert!((base[[1, j]] - flipped[[0, j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn attribute_rows_index_hidden_columns() {
        // d̃ = 2, one node: the two attribute rows see the node's two
        // hidden scalars. Perturbing X̃[0,1] must change only row 1's
        // input, hence only row 1's output (weights chosen nonzero).
        let g = toy_hin();
        let gt: GraphTensors<f64> = GraphTensors::new(&g, None);
        let dims = ModelDims {
            noise_attr: 1,
            ..toy_dims_one_head()
        };
        let mut params = ModelParams::new();
        params.insert("attrenc/venue/w1", pat(2, 2, 0)).unwrap(); // n_i + d̂ = 2
        params.insert("attrenc/venue/b1", pat(1, 2, 1)).unwrap();
        params.insert("attrenc/venue/w2", pat(2, 4, 2)).unwrap();
        params.insert("attrenc/venue/b2", pat(1, 4, 3)).unwrap();
        let draw = NoiseDraw::<f64> {
            eps_node: Vec::new(),
            eps_attr: vec![
                Arc::new(pat(2, 1, 4)),
                Arc::new(pat(2, 1, 5)),
                Arc::new(pat(2, 1, 6)),
            ],
            zeta_node: Vec::new(),
            zeta_attr: Vec::new(),
            dropout_l0: Vec::new(),
            dropout_l1: Vec::new(),
        };
        let run = |hidden_vals: Array2<f64>| {
            let mut tape: Tape<f64> = Tape::new();
            let hidden = tape.constant(hidden_vals);
            let lat = attribute_encode(&mut tape, &params, &gt, 2, hidden, &dims, &draw).unwrap();
            tape.value(lat.mu).to_owned()
        };
        let base = run(array![[0.3, -0.5]]);
        let bumped = run(array![[0.3, -0.1]]);
        assert_eq!(base.row(0), bumped.row(0));
        assert!(base[[1, 0]] != bumped[[1, 0]]);
    }

    #[test]
    fn attribute_encode_matches_mlp_oracle() {
        // 2 hidden dims, 3 nodes (paper type shrunk by hand): input is the
        // 2×3 transpose plus a 2×1 noise block; verify against a scalar
        // MLP loop.
        let g = toy_hin();
        let gt: GraphTensors<f64> = GraphTensors::new(&g, None);
        let dims = toy_dims_one_head();
        let mut params = ModelParams::new();
        let w1 = pat(4, 2, 0); // (n_paper + d̂, k) = (3 + 1, 2)
        let b1 = pat(1, 2, 1);
        let w2 = pat(2, 4, 2);
        let b2 = pat(1, 4, 3);
        params.insert("attrenc/paper/w1", w1.clone()).unwrap();
        params.insert("attrenc/paper/b1", b1.clone()).unwrap();
        params.insert("attrenc/paper/w2", w2.clone()).unwrap();
        params.insert("attrenc/paper/b2", b2.clone()).unwrap();
        let eps = pat(2, 1, 4);
        let draw = NoiseDraw::<f64> {
            eps_node: Vec::new(),
            eps_attr: vec![Arc::new(eps.clone()), Arc::new(pat(2, 1, 5)), Arc::new(pat(2, 1, 6))],
            zeta_node: Vec::new(),
            zeta_attr: Vec::new(),
            dropout_l0: Vec::new(),
            dropout_l1: Vec::new(),
        };
        let hidden_vals = pat(3, 2, 7);
        let mut tape: Tape<f64> = Tape::new();
        let hidden = tape.constant(hidden_vals.clone());
        let lat = attribute_encode(&mut tape, &params, &gt, 0, hidden, &dims, &draw).unwrap();
        let mu = tape.value(lat.mu).to_owned();
        let lv = tape.value(lat.logvar).to_owned();

        for l in 0..2 {
            // Row l of the MLP input: column l of hidden, then noise.
            let mut row = vec![hidden_vals[[0, l]], hidden_vals[[1, l]], hidden_vals[[2, l]]];
            row.push(eps[[l, 0]]);
            let mut act = [0.0; 2];
            for j in 0..2 {
                let mut s = b1[[0, j]];
                for (i, &x) in row.iter().enumerate() {
                    s += x * w1[[i, j]];
                }
                act[j] = s.tanh();
            }
            for j in 0..4 {
                let mut s = b2[[0, j]];
                for i in 0..2 {
                    s += act[i] * w2[[i, j]];
                }
                let got = if j < 2 { mu[[l, j]] } else { lv[[l, j - 2]] };
                assert!((got - s).abs() < 1e-6, "{got} vs {s}");
            }
        }
    }

    #[test]
    fn clamped_logvar_shrinks_sample_noise() {
        let mut tape: Tape<f64> = Tape::new();
        let mu = tape.constant(Array2::zeros((1, 1)));
        let lv = tape.constant(array![[-LOGVAR_CLAMP]]);
        let mut lat = GaussianLatent {
            mu,
            logvar: lv,
            sample: None,
            axis: LatentAxis::Node,
        };
        let zeta = Arc::new(array![[1.7]]);
        let s = sample_latent(&mut tape, &mut lat, zeta).unwrap();
        // exp(−5) ≈ 0.0067 — the sample hugs μ within 1% of |ζ|.
        assert!(tape.value(s)[[0, 0]].abs() < 0.01 * 1.7);
    }

    #[test]
    fn sample_statistics_match_standard_normal() {
        let mut rng = RngStream::new(123);
        let n = 10_000;
        let zeta = Arc::new(Array2::from_shape_simple_fn((n, 1), || rng.standard_normal()));
        let mut tape: Tape<f64> = Tape::new();
        let mu = tape.constant(Array2::zeros((n, 1)));
        let lv = tape.constant(Array2::zeros((n, 1)));
        let mut lat = GaussianLatent {
            mu,
            logvar: lv,
            sample: None,
            axis: LatentAxis::Node,
        };
        let s = sample_latent(&mut tape, &mut lat, zeta).unwrap();
        let vals = tape.value(s);
        let mean: f64 = vals.iter().sum::<f64>() / n as f64;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn sampling_is_deterministic_and_recorded() {
        let mut tape: Tape<f64> = Tape::new();
        let mu = tape.constant(pat(2, 2, 0));
        let lv = tape.constant(pat(2, 2, 1));
        let mut lat = GaussianLatent {
            mu,
            logvar: lv,
            sample: None,
            axis: LatentAxis::Attribute,
        };
        let zeta = Arc::new(pat(2, 2, 2));
        let a = sample_latent(&mut tape, &mut lat, zeta.clone()).unwrap();
        assert_eq!(lat.sample, Some(a));
        let mut lat2 = GaussianLatent {
            sample: None,
            ..lat.clone()
        };
        let b = sample_latent(&mut tape, &mut lat2, zeta).unwrap();
        assert_eq!(tape.value(a), tape.value(b));
    }

    #[test]
    fn encoder_gradients_check_out() {
        let g = toy_hin();
        let gt: GraphTensors<f64> = GraphTensors::new(&g, None);
        let dims = toy_dims_one_head();
        let params = oracle_params();
        let draw = oracle_draw();
        let report = grad_check(
            |tape: &mut Tape<f64>, p: &ModelParams<f64>| -> std::result::Result<NodeId, NumericError> {
                let hidden = feature_init::project(tape, p, &gt)?;
                let lat = node_encode(tape, p, &gt, &hidden, &dims, &draw)?;
                let mut total: Option<NodeId> = None;
                for l in &lat {
                    let m2 = tape.mul(l.mu, l.mu)?;
                    let s1 = tape.sum_all(m2);
                    let v2 = tape.mul(l.logvar, l.logvar)?;
                    let s2 = tape.sum_all(v2);
                    let s = tape.add(s1, s2)?;
                    total = Some(match total {
                        None => s,
                        Some(t) => tape.add(t, s)?,
                    });
                }
                Ok(total.unwrap())
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-4, "{report}");
    }
}

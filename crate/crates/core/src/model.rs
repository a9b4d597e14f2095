//! Model assembly: graph-derived tensors, parameter initialization,
//! per-step noise, the full training loss, and noise-free inference.
//!
//! Everything below composes the pieces from [`crate::feature_init`],
//! [`crate::encoder`], [`crate::decoder`], and [`crate::loss`] on one
//! [`Tape`]. The per-step random inputs (negative edges, noise blocks,
//! reparameterization draws, dropout masks) are materialized up front in
//! [`StepInputs`], so a training step is a deterministic function of
//! `(params, graph, step inputs)` — which is also what makes the whole
//! loss gradient-checkable with frozen draws.

use std::sync::Arc;

use ndarray::Array2;

use crate::config::{ConfigError, TrainConfig};
use crate::decoder;
use crate::encoder;
use crate::error::Result;
use crate::feature_init;
use crate::hin::{sample_negatives, EdgeSplit, HinGraph};
use crate::loss::{self, LossWeights};
use crate::numeric::{scalar, to_f64, ModelParams, NodeId, Real, RngStream, Tape};
use crate::sparse::{Csr, EdgeGroups};

/// Layer widths of the model, resolved from a [`TrainConfig`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDims {
    /// Shared hidden width d̃ every type is projected into.
    pub hidden: usize,
    /// Latent width k of node and attribute embeddings.
    pub latent: usize,
    /// Attention heads per relation.
    pub heads: usize,
    /// Depth of the decoder's refinement stack.
    pub decoder_layers: usize,
    /// Noise width ď appended to node inputs (0 disables).
    pub noise_node: usize,
    /// Noise width d̂ appended to attribute rows (0 disables).
    pub noise_attr: usize,
}

impl ModelDims {
    pub fn from_config(cfg: &TrainConfig) -> ModelDims {
        ModelDims {
            hidden: cfg.hidden_dim,
            latent: cfg.latent_dim,
            heads: cfg.heads,
            decoder_layers: cfg.decoder_layers,
            noise_node: cfg.noise_dim_node,
            noise_attr: cfg.noise_dim_attr,
        }
    }
}

/// One directed pass of a relation: nodes of `agg_type` attend over their
/// neighbors of `nbr_type`. Cross-type relations produce two directions,
/// same-type (symmetric) relations one.
#[derive(Debug, Clone)]
pub struct DirectedRelation {
    pub relation: usize,
    pub agg_type: usize,
    pub nbr_type: usize,
    pub groups: EdgeGroups,
}

/// Graph data lowered into the tensors the model consumes: per-type
/// feature matrices in the working precision, per-direction edge groups
/// for attention, and the positive pairs the edge decoder trains on.
///
/// Built either from the full graph (`split = None`, used at inference
/// and completion time) or from a training split, in which case message
/// passing and edge reconstruction both see only training edges.
#[derive(Debug, Clone)]
pub struct GraphTensors<F: Real> {
    pub counts: Vec<usize>,
    pub type_names: Vec<String>,
    pub attributed: Vec<bool>,
    pub feature_dims: Vec<usize>,
    pub features: Vec<Option<Arc<Array2<F>>>>,
    pub relation_names: Vec<String>,
    /// (src_type, dst_type) per relation.
    pub endpoints: Vec<(usize, usize)>,
    /// Positive pairs per relation (canonical `u <= v` for same-type).
    pub train_pairs: Vec<Vec<(usize, usize)>>,
    pub directions: Vec<DirectedRelation>,
    /// Per type: `n_i x 1` column of 1 / (number of relations in which the
    /// node has at least one neighbor), floored at 1 — the MEAN weights for
    /// merging per-relation messages.
    pub inv_mean_counts: Vec<Arc<Array2<F>>>,
}

impl<F: Real> GraphTensors<F> {
    pub fn new(g: &HinGraph, split: Option<&EdgeSplit>) -> GraphTensors<F> {
        let n_types = g.n_types();
        let counts: Vec<usize> = g.schema.iter().map(|t| t.count).collect();
        let type_names: Vec<String> = g.schema.iter().map(|t| t.name.clone()).collect();
        let attributed: Vec<bool> = g.schema.iter().map(|t| t.attributed).collect();
        let feature_dims: Vec<usize> = g.schema.iter().map(|t| t.feature_dim).collect();
        let features: Vec<Option<Arc<Array2<F>>>> = g
            .features
            .iter()
            .map(|f| {
                f.as_ref()
                    .map(|t| Arc::new(t.matrix.mapv(|v| scalar::<F>(v))))
            })
            .collect();

        let mut relation_names = Vec::with_capacity(g.relations.len());
        let mut endpoints = Vec::with_capacity(g.relations.len());
        let mut train_pairs = Vec::with_capacity(g.relations.len());
        let mut directions = Vec::new();
        for (r, rel) in g.relations.iter().enumerate() {
            relation_names.push(rel.name.clone());
            endpoints.push((rel.src_type, rel.dst_type));

            let pairs: Vec<(usize, usize)> = match split {
                Some(s) => s.relations[r].train_pos.clone(),
                None if rel.is_same_type() => {
                    rel.adj.edges().filter(|&(u, v)| u <= v).collect()
                }
                None => rel.adj.edges().collect(),
            };

            // Message-passing adjacency over exactly those pairs.
            let mut msg_edges: Vec<(usize, usize)> = if rel.is_same_type() {
                let mut e: Vec<(usize, usize)> =
                    pairs.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
                e.sort_unstable();
                e.dedup();
                e
            } else {
                pairs.clone()
            };
            msg_edges.sort_unstable();
            let adj = Csr::from_edges(counts[rel.src_type], counts[rel.dst_type], &msg_edges)
                .expect("deduplicated edges");
            directions.push(DirectedRelation {
                relation: r,
                agg_type: rel.src_type,
                nbr_type: rel.dst_type,
                groups: EdgeGroups::from_csr(&adj),
            });
            if !rel.is_same_type() {
                directions.push(DirectedRelation {
                    relation: r,
                    agg_type: rel.dst_type,
                    nbr_type: rel.src_type,
                    groups: EdgeGroups::from_csr(&adj.transpose()),
                });
            }
            train_pairs.push(pairs);
        }

        let mut inv_mean_counts = Vec::with_capacity(n_types);
        for i in 0..n_types {
            let mut per_node = vec![0usize; counts[i]];
            for dir in directions.iter().filter(|d| d.agg_type == i) {
                for (u, cnt) in per_node.iter_mut().enumerate() {
                    if dir.groups.offsets[u + 1] > dir.groups.offsets[u] {
                        *cnt += 1;
                    }
                }
            }
            let col = Array2::from_shape_fn((counts[i], 1), |(u, _)| {
                scalar::<F>(1.0 / per_node[u].max(1) as f64)
            });
            inv_mean_counts.push(Arc::new(col));
        }

        GraphTensors {
            counts,
            type_names,
            attributed,
            feature_dims,
            features,
            relation_names,
            endpoints,
            train_pairs,
            directions,
            inv_mean_counts,
        }
    }

    pub fn n_types(&self) -> usize {
        self.counts.len()
    }

    /// Indices of types that carry raw attributes.
    pub fn attributed_types(&self) -> Vec<usize> {
        (0..self.n_types()).filter(|&i| self.attributed[i]).collect()
    }
}

/// Xavier-uniform initialization: entries uniform in
/// `±sqrt(6 / (rows + cols))`.
pub fn xavier<F: Real>(rows: usize, cols: usize, rng: &mut RngStream) -> Array2<F> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || scalar(rng.uniform_symmetric(limit)))
}

/// Build and initialize every model parameter for `g` under `cfg`.
///
/// Insertion order is fixed — projections, node-encoder layers, attribute
/// encoders, decoder refinement layers, reconstruction MLPs — and defines
/// both the flat optimizer layout and the checkpoint tensor order.
pub fn init_params<F: Real>(
    g: &HinGraph,
    cfg: &TrainConfig,
) -> std::result::Result<ModelParams<F>, ConfigError> {
    let dims = ModelDims::from_config(cfg);
    let mut rng = RngStream::new(cfg.seed).fork(1);
    let mut params = ModelParams::new();
    feature_init::init_projection(&mut params, g, dims.hidden, &mut rng)?;
    encoder::init_node_encoder(&mut params, g, &dims, &mut rng);
    encoder::init_attribute_encoders(&mut params, g, &dims, &mut rng);
    decoder::init_decoder(&mut params, g, &dims, &mut rng);
    Ok(params)
}

/// Check a loaded parameter set against the shapes `g` + `cfg` demand,
/// naming the offending tensor. Guards inference on a checkpoint that was
/// trained against a different schema.
pub fn validate_params<F: Real>(params: &ModelParams<F>, g: &HinGraph, cfg: &TrainConfig) -> Result<()> {
    let expected: ModelParams<F> = init_params(g, cfg)?;
    if params.len() != expected.len() {
        return Err(crate::error::GramiError::ParamSetMismatch {
            detail: format!("{} tensors, expected {}", params.len(), expected.len()),
        });
    }
    for i in 0..expected.len() {
        let name = expected.name(i);
        let want = expected.value(i).dim();
        let idx = params
            .idx(name)
            .map_err(|_| crate::error::GramiError::ParamSetMismatch {
                detail: format!("missing tensor {name:?}"),
            })?;
        let got = params.value(idx).dim();
        if want != got {
            return Err(crate::error::GramiError::ParamShape {
                name: name.to_string(),
                expected: want,
                got,
            });
        }
    }
    Ok(())
}

/// One epoch's random inputs for a single noise sample: the SIVI noise
/// blocks, the reparameterization draws, and (training only) dropout
/// masks. Inference uses [`NoiseDraw::inference`], which zeroes the noise
/// blocks and carries no draws.
#[derive(Debug, Clone)]
pub struct NoiseDraw<F: Real> {
    /// Per type `n_i x ď` standard normal (empty when ď = 0).
    pub eps_node: Vec<Arc<Array2<F>>>,
    /// Per type `d̃ x d̂` standard normal (empty when d̂ = 0).
    pub eps_attr: Vec<Arc<Array2<F>>>,
    /// Per type `n_i x k` reparameterization draw (empty at inference).
    pub zeta_node: Vec<Arc<Array2<F>>>,
    /// Per type `d̃ x k` reparameterization draw (empty at inference).
    pub zeta_attr: Vec<Arc<Array2<F>>>,
    /// Inverted-dropout masks on the first encoder layer's inputs
    /// (`n_i x (d̃+ď)`), empty when dropout is off.
    pub dropout_l0: Vec<Arc<Array2<F>>>,
    /// Masks on the second layer's inputs (`n_i x d̃`).
    pub dropout_l1: Vec<Arc<Array2<F>>>,
}

fn normal_block<F: Real>(rows: usize, cols: usize, rng: &mut RngStream) -> Arc<Array2<F>> {
    Arc::new(Array2::from_shape_simple_fn((rows, cols), || {
        scalar(rng.standard_normal())
    }))
}

impl<F: Real> NoiseDraw<F> {
    /// Draw every random block for one training step, in a fixed order:
    /// ε₁ per type, ε₂ per type, ζ (node) per type, ζ (attribute) per
    /// type, then dropout masks layer by layer.
    pub fn draw(
        gt: &GraphTensors<F>,
        dims: &ModelDims,
        dropout: f64,
        rng: &mut RngStream,
    ) -> NoiseDraw<F> {
        let n = gt.n_types();
        let mut out = NoiseDraw {
            eps_node: Vec::new(),
            eps_attr: Vec::new(),
            zeta_node: Vec::new(),
            zeta_attr: Vec::new(),
            dropout_l0: Vec::new(),
            dropout_l1: Vec::new(),
        };
        if dims.noise_node > 0 {
            for i in 0..n {
                out.eps_node.push(normal_block(gt.counts[i], dims.noise_node, rng));
            }
        }
        if dims.noise_attr > 0 {
            for _ in 0..n {
                out.eps_attr.push(normal_block(dims.hidden, dims.noise_attr, rng));
            }
        }
        for i in 0..n {
            out.zeta_node.push(normal_block(gt.counts[i], dims.latent, rng));
        }
        for _ in 0..n {
            out.zeta_attr.push(normal_block(dims.hidden, dims.latent, rng));
        }
        if dropout > 0.0 {
            let keep = scalar::<F>(1.0 / (1.0 - dropout));
            let zero = F::zero();
            let mask = |rows: usize, cols: usize, rng: &mut RngStream| {
                Arc::new(Array2::from_shape_simple_fn((rows, cols), || {
                    if rng.uniform() < dropout {
                        zero
                    } else {
                        keep
                    }
                }))
            };
            for i in 0..n {
                out.dropout_l0
                    .push(mask(gt.counts[i], dims.hidden + dims.noise_node, rng));
            }
            for i in 0..n {
                out.dropout_l1.push(mask(gt.counts[i], dims.hidden, rng));
            }
        }
        out
    }

    /// The deterministic draw used at inference: noise blocks are zero
    /// matrices of the configured widths, no reparameterization draws, no
    /// dropout. Latents are read as their means downstream.
    pub fn inference(gt: &GraphTensors<F>, dims: &ModelDims) -> NoiseDraw<F> {
        let n = gt.n_types();
        let mut out = NoiseDraw {
            eps_node: Vec::new(),
            eps_attr: Vec::new(),
            zeta_node: Vec::new(),
            zeta_attr: Vec::new(),
            dropout_l0: Vec::new(),
            dropout_l1: Vec::new(),
        };
        if dims.noise_node > 0 {
            for i in 0..n {
                out.eps_node
                    .push(Arc::new(Array2::zeros((gt.counts[i], dims.noise_node))));
            }
        }
        if dims.noise_attr > 0 {
            for _ in 0..n {
                out.eps_attr
                    .push(Arc::new(Array2::zeros((dims.hidden, dims.noise_attr))));
            }
        }
        out
    }
}

/// All random inputs of one training step: freshly sampled negative edges
/// (one per training positive per relation, capped at the number of
/// non-edges the relation actually has — a complete relation trains on
/// positives alone) plus `noise_samples` independent noise draws whose
/// losses are averaged.
#[derive(Debug, Clone)]
pub struct StepInputs<F: Real> {
    pub negatives: Vec<Vec<(usize, usize)>>,
    pub draws: Vec<NoiseDraw<F>>,
}

impl<F: Real> StepInputs<F> {
    pub fn draw(
        g: &HinGraph,
        gt: &GraphTensors<F>,
        dims: &ModelDims,
        noise_samples: usize,
        dropout: f64,
        rng: &mut RngStream,
    ) -> crate::hin::Result<StepInputs<F>> {
        let mut negatives = Vec::with_capacity(g.relations.len());
        for (r, rel) in g.relations.iter().enumerate() {
            let free = if rel.is_same_type() {
                // Negatives live in the canonical off-diagonal pair space.
                let n = gt.counts[rel.src_type];
                let off_diag_edges = rel.adj.edges().filter(|&(u, v)| u < v).count();
                n * n.saturating_sub(1) / 2 - off_diag_edges
            } else {
                gt.counts[rel.src_type] * gt.counts[rel.dst_type] - rel.adj.nnz()
            };
            let needed = gt.train_pairs[r].len().min(free);
            negatives.push(sample_negatives(rel, g, needed, rng)?);
        }
        let draws = (0..noise_samples)
            .map(|_| NoiseDraw::draw(gt, dims, dropout, rng))
            .collect();
        Ok(StepInputs { negatives, draws })
    }
}

/// Tape nodes of every loss component; scalars are read out via
/// [`LossNodes::report`].
#[derive(Debug, Clone)]
pub struct LossNodes {
    pub total: NodeId,
    pub edge_bce: NodeId,
    pub edge_kl: NodeId,
    pub attr_recon: NodeId,
    pub attr_kl: NodeId,
    pub rmse: NodeId,
    pub per_relation_bce: Vec<NodeId>,
    /// Squared Frobenius norm of the concatenated hidden features —
    /// logged to detect collapse of the moving reconstruction target.
    pub hidden_sq: NodeId,
}

impl LossNodes {
    pub fn report<F: Real>(&self, tape: &Tape<F>) -> loss::LossReport {
        let read = |id: NodeId| to_f64(tape.scalar_value(id));
        loss::LossReport {
            total: read(self.total),
            edge_bce: read(self.edge_bce),
            edge_kl: read(self.edge_kl),
            attr_recon: read(self.attr_recon),
            attr_kl: read(self.attr_kl),
            rmse: read(self.rmse),
            per_relation_bce: self.per_relation_bce.iter().map(|&id| read(id)).collect(),
            hidden_norm: read(self.hidden_sq).sqrt(),
        }
    }
}

/// Average a list of scalar nodes (one per noise draw).
fn mean_nodes<F: Real>(tape: &mut Tape<F>, nodes: &[NodeId]) -> Result<NodeId> {
    let mut acc = nodes[0];
    for &n in &nodes[1..] {
        acc = tape.add(acc, n)?;
    }
    Ok(tape.scale(acc, scalar(1.0 / nodes.len() as f64)))
}

/// Build the full training objective on `tape`.
///
/// Components, per noise draw, averaged across draws:
/// - edge BCE per relation over training positives and the provided
///   negatives (mean within a relation, summed over relations), plus the
///   node-latent KL — together the edge term, scaled by `weights.edge`;
/// - hidden-feature reconstruction MSE over all types plus the
///   attribute-latent KL, scaled by λ₁;
/// - raw-feature RMSE over attributed types, scaled by λ₂.
pub fn training_loss<F: Real>(
    tape: &mut Tape<F>,
    params: &ModelParams<F>,
    gt: &GraphTensors<F>,
    step: &StepInputs<F>,
    weights: &LossWeights,
    dims: &ModelDims,
) -> Result<LossNodes> {
    // The projection is draw-independent; build it once.
    let hidden = feature_init::project(tape, params, gt)?;
    let mut hidden_sq: Option<NodeId> = None;
    for &h in &hidden {
        let sq = tape.mul(h, h)?;
        let s = tape.sum_all(sq);
        hidden_sq = Some(match hidden_sq {
            None => s,
            Some(acc) => tape.add(acc, s)?,
        });
    }
    let hidden_sq = hidden_sq.expect("at least one node type");

    let n_rel = gt.relation_names.len();
    let mut edge_bces = Vec::new();
    let mut edge_kls = Vec::new();
    let mut attr_recons = Vec::new();
    let mut attr_kls = Vec::new();
    let mut rmses = Vec::new();
    let mut per_rel: Vec<Vec<NodeId>> = vec![Vec::new(); n_rel];

    for draw in &step.draws {
        let mut node_lat = encoder::node_encode(tape, params, gt, &hidden, dims, draw)?;
        let mut z_node = Vec::with_capacity(gt.n_types());
        for (i, lat) in node_lat.iter_mut().enumerate() {
            z_node.push(encoder::sample_latent(tape, lat, draw.zeta_node[i].clone())?);
        }
        let mut attr_lat = Vec::with_capacity(gt.n_types());
        let mut z_attr = Vec::with_capacity(gt.n_types());
        for i in 0..gt.n_types() {
            let mut lat = encoder::attribute_encode(tape, params, gt, i, hidden[i], dims, draw)?;
            z_attr.push(encoder::sample_latent(tape, &mut lat, draw.zeta_attr[i].clone())?);
            attr_lat.push(lat);
        }

        let mut rel_terms = Vec::with_capacity(n_rel);
        for r in 0..n_rel {
            if gt.train_pairs[r].is_empty() {
                rel_terms.push(None);
                continue;
            }
            let (s, d) = gt.endpoints[r];
            let pos = decoder::edge_logits(tape, z_node[s], z_node[d], &gt.train_pairs[r])?;
            let neg = if step.negatives[r].is_empty() {
                None
            } else {
                Some(decoder::edge_logits(tape, z_node[s], z_node[d], &step.negatives[r])?)
            };
            rel_terms.push(Some((pos, neg)));
        }
        let (edge_sum, rel_bces) = loss::edge_loss(tape, &rel_terms)?;
        edge_bces.push(edge_sum);
        for (r, id) in rel_bces.into_iter().enumerate() {
            per_rel[r].push(id);
        }

        let mut kl = loss::gaussian_kl(tape, &node_lat[0])?;
        for lat in &node_lat[1..] {
            let k = loss::gaussian_kl(tape, lat)?;
            kl = tape.add(kl, k)?;
        }
        edge_kls.push(kl);

        let recon_h = decoder::recon_hidden(tape, params, gt, &z_node, &z_attr, dims)?;
        attr_recons.push(loss::attr_loss(tape, &recon_h, &hidden)?);

        let mut akl = loss::gaussian_kl(tape, &attr_lat[0])?;
        for lat in &attr_lat[1..] {
            let k = loss::gaussian_kl(tape, lat)?;
            akl = tape.add(akl, k)?;
        }
        attr_kls.push(akl);

        let mut raw_pairs = Vec::new();
        for i in gt.attributed_types() {
            let pred = decoder::recon_raw(tape, params, gt, i, recon_h[i])?;
            let target = tape.constant_shared(gt.features[i].clone().expect("attributed"));
            raw_pairs.push((pred, target));
        }
        rmses.push(loss::rmse_loss(tape, &raw_pairs)?);
    }

    let edge_bce = mean_nodes(tape, &edge_bces)?;
    let edge_kl = mean_nodes(tape, &edge_kls)?;
    let attr_recon = mean_nodes(tape, &attr_recons)?;
    let attr_kl = mean_nodes(tape, &attr_kls)?;
    let rmse = mean_nodes(tape, &rmses)?;
    let per_relation_bce = per_rel
        .into_iter()
        .map(|nodes| {
            if nodes.is_empty() {
                Ok(tape.constant(Array2::zeros((1, 1))))
            } else {
                mean_nodes(tape, &nodes)
            }
        })
        .collect::<Result<Vec<NodeId>>>()?;

    let terms = loss::LossTerms {
        edge_bce,
        edge_kl,
        attr_recon,
        attr_kl,
        rmse,
    };
    let scaled = loss::total_loss(tape, &terms, weights)?;
    Ok(LossNodes {
        total: scaled.total,
        edge_bce: scaled.edge_bce,
        edge_kl: scaled.edge_kl,
        attr_recon: scaled.attr_recon,
        attr_kl: scaled.attr_kl,
        rmse: scaled.rmse,
        per_relation_bce,
        hidden_sq,
    })
}

/// Everything the model infers deterministically (noise zeroed, latents
/// at their means): hidden features, node/attribute latents, and both
/// reconstruction stages.
#[derive(Debug, Clone)]
pub struct Inference<F: Real> {
    pub hidden: Vec<Array2<F>>,
    pub node_mu: Vec<Array2<F>>,
    pub node_logvar: Vec<Array2<F>>,
    pub attr_mu: Vec<Array2<F>>,
    pub recon_hidden: Vec<Array2<F>>,
    pub recon_raw: Vec<Option<Array2<F>>>,
}

impl<F: Real> Inference<F> {
    /// Inner-product edge logit between node `u` of `src_type` and node
    /// `v` of `dst_type`, in f64 for scoring.
    pub fn edge_logit(&self, src_type: usize, u: usize, dst_type: usize, v: usize) -> f64 {
        let a = self.node_mu[src_type].row(u);
        let b = self.node_mu[dst_type].row(v);
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| to_f64(x) * to_f64(y))
            .sum()
    }

    /// Edge existence probability σ(logit).
    pub fn edge_prob(&self, src_type: usize, u: usize, dst_type: usize, v: usize) -> f64 {
        let l = self.edge_logit(src_type, u, dst_type, v);
        1.0 / (1.0 + (-l).exp())
    }
}

/// Run the deterministic forward pass and read every stage back out.
pub fn infer<F: Real>(
    params: &ModelParams<F>,
    gt: &GraphTensors<F>,
    dims: &ModelDims,
) -> Result<Inference<F>> {
    let mut tape: Tape<F> = Tape::new();
    let draw = NoiseDraw::inference(gt, dims);
    let hidden = feature_init::project(&mut tape, params, gt)?;
    let node_lat = encoder::node_encode(&mut tape, params, gt, &hidden, dims, &draw)?;
    let mut attr_lat = Vec::with_capacity(gt.n_types());
    for i in 0..gt.n_types() {
        attr_lat.push(encoder::attribute_encode(
            &mut tape, params, gt, i, hidden[i], dims, &draw,
        )?);
    }
    let zv: Vec<NodeId> = node_lat.iter().map(|l| l.mu).collect();
    let za: Vec<NodeId> = attr_lat.iter().map(|l| l.mu).collect();
    let recon_h = decoder::recon_hidden(&mut tape, params, gt, &zv, &za, dims)?;
    let mut recon_raw_ids: Vec<Option<NodeId>> = vec![None; gt.n_types()];
    for i in gt.attributed_types() {
        recon_raw_ids[i] = Some(decoder::recon_raw(&mut tape, params, gt, i, recon_h[i])?);
    }

    let grab = |id: NodeId| tape.value(id).to_owned();
    Ok(Inference {
        hidden: hidden.iter().map(|&id| grab(id)).collect(),
        node_mu: node_lat.iter().map(|l| grab(l.mu)).collect(),
        node_logvar: node_lat.iter().map(|l| grab(l.logvar)).collect(),
        attr_mu: attr_lat.iter().map(|l| grab(l.mu)).collect(),
        recon_hidden: recon_h.iter().map(|&id| grab(id)).collect(),
        recon_raw: recon_raw_ids.iter().map(|o| o.map(grab)).collect(),
    })
}

//! Recorded-tape reverse-mode differentiation over dense matrices.
//!
//! Each forward operation appends one node (value + provenance) to the
//! [`Tape`]. [`Tape::backward`] seeds the scalar root with 1 and walks the
//! record once in reverse, accumulating gradients into every node that can
//! reach a parameter. The op set is closed and purpose-built: dense
//! matmul, a sparse-pattern matmul, elementwise maps, masked/segmented
//! softmax, gather/scatter by row, column concat/slice, and a numerically
//! stable mean binary cross-entropy from logits.
//!
//! Values are `Arc`-shared `Array2`s so graph-sized constants (feature
//! matrices, noise draws) enter the tape without copying. In debug builds
//! every forward result is checked for non-finite entries immediately, so
//! an overflow is reported at the op that produced it.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{s, Array2, Axis};

use crate::numeric::params::ModelParams;
use crate::numeric::{scalar, NumericError, Real, Result};
use crate::sparse::Csr;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<F: Real> {
    /// Leaf: constant input (no gradient).
    Const,
    /// Leaf: model parameter (index into the registering `ModelParams`).
    Param(#[allow(dead_code)] usize),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    SpMM {
        pattern: Arc<Csr>,
        transpose: bool,
        h: NodeId,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Multiply every column of the left operand by an `n x 1` vector.
    MulColVec(NodeId, NodeId),
    /// Add a `1 x d` row vector (bias) to every row.
    AddRowVec(NodeId, NodeId),
    Scale(NodeId, F),
    AddScalar(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    LeakyRelu(NodeId, F),
    Exp(NodeId),
    Sqrt(NodeId),
    Clamp(NodeId, F, F),
    SumAll(NodeId),
    SumRows(NodeId),
    Gather {
        src: NodeId,
        idx: Arc<Vec<usize>>,
    },
    ScatterAdd {
        src: NodeId,
        idx: Arc<Vec<usize>>,
    },
    SegmentSoftmax {
        scores: NodeId,
        offsets: Arc<Vec<usize>>,
    },
    SoftmaxRowsMasked {
        scores: NodeId,
        support: Arc<Vec<Vec<usize>>>,
    },
    ConcatCols(NodeId, NodeId),
    ConcatRows(NodeId, NodeId),
    SliceCols {
        src: NodeId,
        start: usize,
    },
    BceMean {
        logits: NodeId,
        labels: Arc<Array2<F>>,
    },
}

struct Node<F: Real> {
    value: Arc<Array2<F>>,
    op: Op<F>,
    needs_grad: bool,
}

/// Gradient record produced by [`Tape::backward`].
pub struct Backprop<F: Real> {
    grads: Vec<Option<Array2<F>>>,
}

impl<F: Real> Backprop<F> {
    /// Gradient of the root with respect to `id`, if `id` influenced it.
    pub fn grad(&self, id: NodeId) -> Option<&Array2<F>> {
        self.grads[id.0].as_ref()
    }
}

pub struct Tape<F: Real> {
    nodes: Vec<Node<F>>,
    /// One leaf per parameter per tape, memoized so re-use accumulates.
    param_nodes: HashMap<usize, NodeId>,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn assert_finite<F: Real>(op: &'static str, value: &Array2<F>) {
    debug_assert!(
        value.iter().all(|v| v.is_finite()),
        "{op}: non-finite entry in forward value"
    );
    let _ = op;
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: &'static str, value: Array2<F>, opcode: Op<F>, needs: bool) -> NodeId {
        assert_finite(op, &value);
        self.nodes.push(Node {
            value: Arc::new(value),
            op: opcode,
            needs_grad: needs,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn value(&self, id: NodeId) -> &Array2<F> {
        self.nodes[id.0].value.as_ref()
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.value(id).dim()
    }

    /// Extract a 1x1 node as a scalar.
    pub fn scalar_value(&self, id: NodeId) -> F {
        debug_assert_eq!(self.shape(id), (1, 1));
        self.value(id)[(0, 0)]
    }

    // ---- leaves ----

    pub fn constant(&mut self, value: Array2<F>) -> NodeId {
        self.push("constant", value, Op::Const, false)
    }

    /// Constant leaf sharing storage with the caller (no copy).
    pub fn constant_shared(&mut self, value: Arc<Array2<F>>) -> NodeId {
        assert_finite("constant", &value);
        self.nodes.push(Node {
            value,
            op: Op::Const,
            needs_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Parameter leaf. Registering the same parameter twice returns the
    /// same node, so every use contributes to one accumulated gradient.
    pub fn param(&mut self, params: &ModelParams<F>, name: &str) -> Result<NodeId> {
        let idx = params.idx(name)?;
        if let Some(&id) = self.param_nodes.get(&idx) {
            return Ok(id);
        }
        self.nodes.push(Node {
            value: params.value(idx).clone(),
            op: Op::Param(idx),
            needs_grad: true,
        });
        let id = NodeId(self.nodes.len() - 1);
        self.param_nodes.insert(idx, id);
        Ok(id)
    }

    // ---- shape-checked binary ops ----

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(NumericError::ShapeMismatch {
                op: "matmul",
                detail: format!("{ar}x{ac} . {br}x{bc}"),
            });
        }
        let v = self.value(a).dot(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push("matmul", v, Op::MatMul(a, b), needs))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).t().to_owned();
        let needs = self.needs(a);
        self.push("transpose", v, Op::Transpose(a), needs)
    }

    /// Sparse-pattern x dense product. Plain orientation computes
    /// `out[r, :] = sum over c in row r of h[c, :]` (row-gather semantics);
    /// the transposed variant scatters instead. `h` must have one row per
    /// column of the chosen orientation.
    pub fn spmm(&mut self, pattern: &Arc<Csr>, transpose: bool, h: NodeId) -> Result<NodeId> {
        let (hr, hc) = self.shape(h);
        let (out_rows, in_rows) = if transpose {
            (pattern.n_cols, pattern.n_rows)
        } else {
            (pattern.n_rows, pattern.n_cols)
        };
        if hr != in_rows {
            return Err(NumericError::ShapeMismatch {
                op: "spmm",
                detail: format!(
                    "pattern {}x{} (transpose={transpose}) . h {hr}x{hc}",
                    pattern.n_rows, pattern.n_cols
                ),
            });
        }
        let v = spmm_pattern(pattern, transpose, self.value(h), out_rows);
        let needs = self.needs(h);
        Ok(self.push(
            "spmm",
            v,
            Op::SpMM {
                pattern: pattern.clone(),
                transpose,
                h,
            },
            needs,
        ))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(NumericError::ShapeMismatch {
                op,
                detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let v = self.value(a) + self.value(b);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push("add", v, Op::Add(a, b), needs))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a) - self.value(b);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push("sub", v, Op::Sub(a, b), needs))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a) * self.value(b);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push("mul", v, Op::Mul(a, b), needs))
    }

    /// Multiply each row of `a` (n x d) by the matching entry of `v` (n x 1).
    pub fn mul_colvec(&mut self, a: NodeId, v: NodeId) -> Result<NodeId> {
        let (ar, _) = self.shape(a);
        if self.shape(v) != (ar, 1) {
            return Err(NumericError::ShapeMismatch {
                op: "mul_colvec",
                detail: format!("a {:?}, v {:?}", self.shape(a), self.shape(v)),
            });
        }
        let col = self.value(v).column(0).to_owned();
        let mut out = self.value(a).clone();
        for (mut row, &s) in out.rows_mut().into_iter().zip(col.iter()) {
            row.mapv_inplace(|x| x * s);
        }
        let needs = self.needs(a) || self.needs(v);
        Ok(self.push("mul_colvec", out, Op::MulColVec(a, v), needs))
    }

    /// Add a 1 x d row vector (bias) to every row of `a` (n x d).
    pub fn add_rowvec(&mut self, a: NodeId, v: NodeId) -> Result<NodeId> {
        let (_, ac) = self.shape(a);
        if self.shape(v) != (1, ac) {
            return Err(NumericError::ShapeMismatch {
                op: "add_rowvec",
                detail: format!("a {:?}, v {:?}", self.shape(a), self.shape(v)),
            });
        }
        let row = self.value(v).row(0).to_owned();
        let mut out = self.value(a).clone();
        for mut r in out.rows_mut() {
            r += &row;
        }
        let needs = self.needs(a) || self.needs(v);
        Ok(self.push("add_rowvec", out, Op::AddRowVec(a, v), needs))
    }

    // ---- elementwise unary ops ----

    pub fn scale(&mut self, a: NodeId, c: F) -> NodeId {
        let v = self.value(a).mapv(|x| x * c);
        let needs = self.needs(a);
        self.push("scale", v, Op::Scale(a, c), needs)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: F) -> NodeId {
        let v = self.value(a).mapv(|x| x + c);
        let needs = self.needs(a);
        self.push("add_scalar", v, Op::AddScalar(a), needs)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| x.tanh());
        let needs = self.needs(a);
        self.push("tanh", v, Op::Tanh(a), needs)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(sigmoid_stable);
        let needs = self.needs(a);
        self.push("sigmoid", v, Op::Sigmoid(a), needs)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: F) -> NodeId {
        let v = self
            .value(a)
            .mapv(|x| if x > F::zero() { x } else { x * slope });
        let needs = self.needs(a);
        self.push("leaky_relu", v, Op::LeakyRelu(a, slope), needs)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| x.exp());
        let needs = self.needs(a);
        self.push("exp", v, Op::Exp(a), needs)
    }

    /// Elementwise square root; inputs must be non-negative.
    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| x.sqrt());
        let needs = self.needs(a);
        self.push("sqrt", v, Op::Sqrt(a), needs)
    }

    /// Elementwise clamp into `[lo, hi]`; gradient passes only inside.
    pub fn clamp(&mut self, a: NodeId, lo: F, hi: F) -> NodeId {
        let v = self.value(a).mapv(|x| x.min(hi).max(lo));
        let needs = self.needs(a);
        self.push("clamp", v, Op::Clamp(a, lo, hi), needs)
    }

    // ---- reductions ----

    /// Sum of all entries as a 1x1 node.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        let needs = self.needs(a);
        self.push("sum_all", v, Op::SumAll(a), needs)
    }

    /// Mean of all entries as a 1x1 node (sum + scale composition).
    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len();
        let s = self.sum_all(a);
        self.scale(s, scalar::<F>(1.0 / n as f64))
    }

    /// Row sums: n x d -> n x 1.
    pub fn sum_rows(&mut self, a: NodeId) -> NodeId {
        let v = self
            .value(a)
            .sum_axis(Axis(1))
            .insert_axis(Axis(1))
            .to_owned();
        let needs = self.needs(a);
        self.push("sum_rows", v, Op::SumRows(a), needs)
    }

    // ---- indexed ops ----

    /// Gather rows of `src` by index: `out[i, :] = src[idx[i], :]`.
    pub fn gather_rows(&mut self, src: NodeId, idx: Arc<Vec<usize>>) -> Result<NodeId> {
        let (rows, cols) = self.shape(src);
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(NumericError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                bound: rows,
            });
        }
        let mut out = Array2::zeros((idx.len(), cols));
        for (o, &i) in idx.iter().enumerate() {
            out.row_mut(o).assign(&self.value(src).row(i));
        }
        let needs = self.needs(src);
        Ok(self.push("gather_rows", out, Op::Gather { src, idx }, needs))
    }

    /// Scatter-add rows of `src` into a fresh `rows x d` zero matrix:
    /// `out[idx[i], :] += src[i, :]`.
    pub fn scatter_add_rows(
        &mut self,
        src: NodeId,
        idx: Arc<Vec<usize>>,
        rows: usize,
    ) -> Result<NodeId> {
        let (sr, cols) = self.shape(src);
        if sr != idx.len() {
            return Err(NumericError::ShapeMismatch {
                op: "scatter_add_rows",
                detail: format!("src rows {sr}, indices {}", idx.len()),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(NumericError::IndexOutOfRange {
                op: "scatter_add_rows",
                index: bad,
                bound: rows,
            });
        }
        let mut out = Array2::zeros((rows, cols));
        for (i, &r) in idx.iter().enumerate() {
            let mut dst = out.row_mut(r);
            dst += &self.value(src).row(i);
        }
        let needs = self.needs(src);
        Ok(self.push("scatter_add_rows", out, Op::ScatterAdd { src, idx }, needs))
    }

    // ---- softmax kernels ----

    /// Softmax over consecutive segments of a packed `nnz x 1` score
    /// vector. `offsets` has one entry per segment boundary
    /// (`offsets[s]..offsets[s+1]`); empty segments are allowed and
    /// produce no output entries. Max-subtraction per segment for
    /// stability.
    pub fn segment_softmax(&mut self, scores: NodeId, offsets: Arc<Vec<usize>>) -> Result<NodeId> {
        let (rows, cols) = self.shape(scores);
        if cols != 1 || *offsets.last().unwrap_or(&0) != rows || offsets[0] != 0 {
            return Err(NumericError::ShapeMismatch {
                op: "segment_softmax",
                detail: format!("scores {rows}x{cols}, offsets end {:?}", offsets.last()),
            });
        }
        let x = self.value(scores);
        let mut out = Array2::zeros((rows, 1));
        for w in offsets.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if lo == hi {
                continue;
            }
            softmax_segment(
                (lo..hi).map(|i| x[(i, 0)]),
                hi - lo,
                |i, y| out[(lo + i, 0)] = y,
            );
        }
        let needs = self.needs(scores);
        Ok(self.push(
            "segment_softmax",
            out,
            Op::SegmentSoftmax { scores, offsets },
            needs,
        ))
    }

    /// Row-wise masked softmax over a dense score matrix: within each row,
    /// the supported columns form a probability simplex (max-subtraction
    /// for stability) and unsupported entries are exactly zero. Every row
    /// must have at least one supported column.
    pub fn softmax_rows_masked(
        &mut self,
        scores: NodeId,
        support: Arc<Vec<Vec<usize>>>,
    ) -> Result<NodeId> {
        let (rows, cols) = self.shape(scores);
        if support.len() != rows {
            return Err(NumericError::ShapeMismatch {
                op: "softmax_rows_masked",
                detail: format!("scores {rows}x{cols}, support rows {}", support.len()),
            });
        }
        for (r, sup) in support.iter().enumerate() {
            if sup.is_empty() {
                return Err(NumericError::EmptySupport { row: r });
            }
            if let Some(&bad) = sup.iter().find(|&&c| c >= cols) {
                return Err(NumericError::IndexOutOfRange {
                    op: "softmax_rows_masked",
                    index: bad,
                    bound: cols,
                });
            }
        }
        let x = self.value(scores);
        let mut out = Array2::zeros((rows, cols));
        for (r, sup) in support.iter().enumerate() {
            softmax_segment(
                sup.iter().map(|&c| x[(r, c)]),
                sup.len(),
                |i, y| out[(r, sup[i])] = y,
            );
        }
        let needs = self.needs(scores);
        Ok(self.push(
            "softmax_rows_masked",
            out,
            Op::SoftmaxRowsMasked { scores, support },
            needs,
        ))
    }

    // ---- structure ops ----

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ar != br {
            return Err(NumericError::ShapeMismatch {
                op: "concat_cols",
                detail: format!("{ar}x{ac} ++ {br}x{bc}"),
            });
        }
        let mut out = Array2::zeros((ar, ac + bc));
        out.slice_mut(s![.., ..ac]).assign(self.value(a));
        out.slice_mut(s![.., ac..]).assign(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push("concat_cols", out, Op::ConcatCols(a, b), needs))
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != bc {
            return Err(NumericError::ShapeMismatch {
                op: "concat_rows",
                detail: format!("{ar}x{ac} ++ {br}x{bc}"),
            });
        }
        let mut out = Array2::zeros((ar + br, ac));
        out.slice_mut(s![..ar, ..]).assign(self.value(a));
        out.slice_mut(s![ar.., ..]).assign(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push("concat_rows", out, Op::ConcatRows(a, b), needs))
    }

    pub fn slice_cols(&mut self, src: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let (_, cols) = self.shape(src);
        if start >= end || end > cols {
            return Err(NumericError::ShapeMismatch {
                op: "slice_cols",
                detail: format!("range {start}..{end} of {cols} columns"),
            });
        }
        let out = self.value(src).slice(s![.., start..end]).to_owned();
        let needs = self.needs(src);
        Ok(self.push("slice_cols", out, Op::SliceCols { src, start }, needs))
    }

    // ---- loss kernels ----

    /// Mean binary cross-entropy from logits against constant 0/1 labels,
    /// computed in the standard overflow-free form
    /// `max(x, 0) - x*y + ln(1 + exp(-|x|))`. Returns a 1x1 node.
    pub fn bce_with_logits_mean(&mut self, logits: NodeId, labels: Arc<Array2<F>>) -> Result<NodeId> {
        if self.shape(logits) != labels.dim() {
            return Err(NumericError::ShapeMismatch {
                op: "bce_with_logits_mean",
                detail: format!("logits {:?}, labels {:?}", self.shape(logits), labels.dim()),
            });
        }
        let x = self.value(logits);
        let mut acc = F::zero();
        for (&xi, &yi) in x.iter().zip(labels.iter()) {
            acc = acc + xi.max(F::zero()) - xi * yi + (-xi.abs()).exp().ln_1p();
        }
        let n = scalar::<F>(x.len() as f64);
        let v = Array2::from_elem((1, 1), acc / n);
        let needs = self.needs(logits);
        Ok(self.push("bce_with_logits_mean", v, Op::BceMean { logits, labels }, needs))
    }

    // ---- reverse pass ----

    /// Reverse-sweep from a scalar root. Returns per-node gradients for
    /// every node on a parameter path.
    pub fn backward(&self, root: NodeId) -> Result<Backprop<F>> {
        let (r, c) = self.shape(root);
        if (r, c) != (1, 1) {
            return Err(NumericError::NonScalarRoot { rows: r, cols: c });
        }
        let mut grads: Vec<Option<Array2<F>>> = vec![None; self.nodes.len()];
        if !self.needs(root) {
            return Ok(Backprop { grads });
        }
        grads[root.0] = Some(Array2::ones((1, 1)));
        for i in (0..=root.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Backprop { grads })
    }

    /// Gradients for every parameter registered on this tape, densified to
    /// parameter order (zeros for parameters the root never touched).
    pub fn param_grads(&self, bp: &Backprop<F>, params: &ModelParams<F>) -> Vec<Array2<F>> {
        (0..params.len())
            .map(|idx| match self.param_nodes.get(&idx).and_then(|&id| bp.grad(id)) {
                Some(g) => g.clone(),
                None => Array2::zeros(params.value(idx).dim()),
            })
            .collect()
    }

    /// Parameter gradients flattened to align with [`ModelParams::to_flat`].
    pub fn flat_param_grads(&self, bp: &Backprop<F>, params: &ModelParams<F>) -> Vec<F> {
        let mut out = Vec::with_capacity(params.flat_len());
        for g in self.param_grads(bp, params) {
            out.extend(g.iter().copied());
        }
        out
    }

    fn propagate(&self, i: usize, g: &Array2<F>, grads: &mut Vec<Option<Array2<F>>>) {
        let mut send = |id: NodeId, delta: Array2<F>, tape: &Tape<F>| {
            if !tape.needs(id) {
                return;
            }
            match &mut grads[id.0] {
                Some(acc) => *acc += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        match &self.nodes[i].op {
            Op::Const | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let da = g.dot(&self.value(*b).t());
                    send(*a, da, self);
                }
                if self.needs(*b) {
                    let db = self.value(*a).t().dot(g);
                    send(*b, db, self);
                }
            }
            Op::Transpose(a) => send(*a, g.t().to_owned(), self),
            Op::SpMM {
                pattern,
                transpose,
                h,
            } => {
                if self.needs(*h) {
                    let (in_rows, _) = self.shape(*h);
                    let dh = spmm_pattern(pattern, !transpose, g, in_rows);
                    send(*h, dh, self);
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone(), self);
                send(*b, g.clone(), self);
            }
            Op::Sub(a, b) => {
                send(*a, g.clone(), self);
                send(*b, g.mapv(|x| -x), self);
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    send(*a, g * self.value(*b), self);
                }
                if self.needs(*b) {
                    send(*b, g * self.value(*a), self);
                }
            }
            Op::MulColVec(a, v) => {
                let col = self.value(*v).column(0).to_owned();
                if self.needs(*a) {
                    let mut da = g.clone();
                    for (mut row, &sv) in da.rows_mut().into_iter().zip(col.iter()) {
                        row.mapv_inplace(|x| x * sv);
                    }
                    send(*a, da, self);
                }
                if self.needs(*v) {
                    let prod = g * self.value(*a);
                    let dv = prod.sum_axis(Axis(1)).insert_axis(Axis(1)).to_owned();
                    send(*v, dv, self);
                }
            }
            Op::AddRowVec(a, v) => {
                send(*a, g.clone(), self);
                if self.needs(*v) {
                    let dv = g.sum_axis(Axis(0)).insert_axis(Axis(0)).to_owned();
                    send(*v, dv, self);
                }
            }
            Op::Scale(a, c) => send(*a, g.mapv(|x| x * *c), self),
            Op::AddScalar(a) => send(*a, g.clone(), self),
            Op::Tanh(a) => {
                let y = self.nodes[i].value.as_ref();
                send(*a, g * &y.mapv(|t| F::one() - t * t), self);
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[i].value.as_ref();
                send(*a, g * &y.mapv(|s| s * (F::one() - s)), self);
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a);
                let dx = x.mapv(|v| if v > F::zero() { F::one() } else { *slope });
                send(*a, g * &dx, self);
            }
            Op::Exp(a) => {
                let y = self.nodes[i].value.as_ref();
                send(*a, g * y, self);
            }
            Op::Sqrt(a) => {
                let y = self.nodes[i].value.as_ref();
                let half = scalar::<F>(0.5);
                let dx = y.mapv(|s| if s > F::zero() { half / s } else { F::zero() });
                send(*a, g * &dx, self);
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(*a);
                let pass = x.mapv(|v| {
                    if v >= *lo && v <= *hi {
                        F::one()
                    } else {
                        F::zero()
                    }
                });
                send(*a, g * &pass, self);
            }
            Op::SumAll(a) => {
                let (r, c) = self.shape(*a);
                send(*a, Array2::from_elem((r, c), g[(0, 0)]), self);
            }
            Op::SumRows(a) => {
                let (r, c) = self.shape(*a);
                let mut da = Array2::zeros((r, c));
                for (mut row, &gv) in da.rows_mut().into_iter().zip(g.column(0).iter()) {
                    row.fill(gv);
                }
                send(*a, da, self);
            }
            Op::Gather { src, idx } => {
                if self.needs(*src) {
                    let (r, c) = self.shape(*src);
                    let mut dsrc = Array2::zeros((r, c));
                    for (o, &s_i) in idx.iter().enumerate() {
                        let mut row = dsrc.row_mut(s_i);
                        row += &g.row(o);
                    }
                    send(*src, dsrc, self);
                }
            }
            Op::ScatterAdd { src, idx } => {
                if self.needs(*src) {
                    let (sr, c) = self.shape(*src);
                    let mut dsrc = Array2::zeros((sr, c));
                    for (i_src, &r) in idx.iter().enumerate() {
                        dsrc.row_mut(i_src).assign(&g.row(r));
                    }
                    send(*src, dsrc, self);
                }
            }
            Op::SegmentSoftmax { scores, offsets } => {
                if self.needs(*scores) {
                    let y = self.nodes[i].value.as_ref();
                    let mut dx = Array2::zeros(y.dim());
                    for w in offsets.windows(2) {
                        let (lo, hi) = (w[0], w[1]);
                        let mut dot = F::zero();
                        for e in lo..hi {
                            dot = dot + g[(e, 0)] * y[(e, 0)];
                        }
                        for e in lo..hi {
                            dx[(e, 0)] = y[(e, 0)] * (g[(e, 0)] - dot);
                        }
                    }
                    send(*scores, dx, self);
                }
            }
            Op::SoftmaxRowsMasked { scores, support } => {
                if self.needs(*scores) {
                    let y = self.nodes[i].value.as_ref();
                    let mut dx = Array2::zeros(y.dim());
                    for (r, sup) in support.iter().enumerate() {
                        let mut dot = F::zero();
                        for &c in sup {
                            dot = dot + g[(r, c)] * y[(r, c)];
                        }
                        for &c in sup {
                            dx[(r, c)] = y[(r, c)] * (g[(r, c)] - dot);
                        }
                    }
                    send(*scores, dx, self);
                }
            }
            Op::ConcatCols(a, b) => {
                let (_, ac) = self.shape(*a);
                send(*a, g.slice(s![.., ..ac]).to_owned(), self);
                send(*b, g.slice(s![.., ac..]).to_owned(), self);
            }
            Op::ConcatRows(a, b) => {
                let (ar, _) = self.shape(*a);
                send(*a, g.slice(s![..ar, ..]).to_owned(), self);
                send(*b, g.slice(s![ar.., ..]).to_owned(), self);
            }
            Op::SliceCols { src, start } => {
                if self.needs(*src) {
                    let (r, c) = self.shape(*src);
                    let (_, out_c) = self.nodes[i].value.dim();
                    let mut dsrc = Array2::zeros((r, c));
                    dsrc.slice_mut(s![.., *start..*start + out_c]).assign(g);
                    send(*src, dsrc, self);
                }
            }
            Op::BceMean { logits, labels } => {
                if self.needs(*logits) {
                    let x = self.value(*logits);
                    let n = scalar::<F>(x.len() as f64);
                    let gv = g[(0, 0)];
                    let mut dx = Array2::zeros(x.dim());
                    for ((d, &xi), &yi) in dx.iter_mut().zip(x.iter()).zip(labels.iter()) {
                        *d = gv * (sigmoid_stable(xi) - yi) / n;
                    }
                    send(*logits, dx, self);
                }
            }
        }
    }
}

/// Overflow-free logistic function.
fn sigmoid_stable<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `out = P . h` (or `P^T . h`): row-gather over the binary pattern. The
/// transposed orientation scatters rows instead; both are one O(nnz * d)
/// pass and never materialize the transpose.
fn spmm_pattern<F: Real>(
    pattern: &Csr,
    transpose: bool,
    h: &Array2<F>,
    out_rows: usize,
) -> Array2<F> {
    let cols = h.ncols();
    let mut out = Array2::zeros((out_rows, cols));
    if transpose {
        for r in 0..pattern.n_rows {
            let hr = h.row(r);
            for &c in pattern.row(r) {
                let mut dst = out.row_mut(c);
                dst += &hr;
            }
        }
    } else {
        for r in 0..pattern.n_rows {
            let mut dst = out.row_mut(r);
            for &c in pattern.row(r) {
                dst += &h.row(c);
            }
        }
    }
    out
}

/// Shared softmax core: one segment of scores, max-subtracted.
fn softmax_segment<F: Real>(
    xs: impl Iterator<Item = F> + Clone,
    len: usize,
    mut write: impl FnMut(usize, F),
) {
    let max = xs
        .clone()
        .fold(F::neg_infinity(), |m, v| if v > m { v } else { m });
    let mut denom = F::zero();
    let mut exps = Vec::with_capacity(len);
    for v in xs {
        let e = (v - max).exp();
        denom = denom + e;
        exps.push(e);
    }
    for (i, e) in exps.into_iter().enumerate() {
        write(i, e / denom);
    }
}

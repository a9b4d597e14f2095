//! Compressed sparse row storage for binary relation matrices.
//!
//! Relations in a HIN are unweighted, so a [`Csr`] stores only the pattern
//! (row pointers + column indices). The transpose is materialized once and
//! cached by the graph layer; message passing iterates rows of whichever
//! orientation aggregates.

use ndarray::Array2;

use crate::numeric::Real;

/// Binary sparse matrix in compressed row form. `indices` within a row are
/// strictly increasing, which makes equality, deduplication, and
/// round-trip export deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row pointers, length `n_rows + 1`.
    pub indptr: Vec<usize>,
    /// Column indices, length `nnz`, sorted within each row.
    pub indices: Vec<usize>,
}

impl Csr {
    /// Build from an edge list. Edges may arrive in any order; they are
    /// sorted into canonical row-major form. Returns the first duplicate
    /// `(row, col)` pair as an error if the list contains one.
    pub fn from_edges(
        n_rows: usize,
        n_cols: usize,
        edges: &[(usize, usize)],
    ) -> Result<Csr, (usize, usize)> {
        let mut sorted: Vec<(usize, usize)> = edges.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(w[0]);
            }
        }
        let mut indptr = vec![0usize; n_rows + 1];
        for &(r, _) in &sorted {
            debug_assert!(r < n_rows);
            indptr[r + 1] += 1;
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        let indices = sorted.iter().map(|&(_, c)| c).collect();
        Ok(Csr {
            n_rows,
            n_cols,
            indptr,
            indices,
        })
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices of row `r`.
    pub fn row(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    /// True if `(r, c)` is stored. Binary search within the row.
    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    /// All stored entries in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }

    /// Transposed copy (CSR of the transpose), used to aggregate in the
    /// column-to-row direction.
    pub fn transpose(&self) -> Csr {
        let mut indptr = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            indptr[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            indptr[c + 1] += indptr[c];
        }
        let mut cursor = indptr.clone();
        let mut indices = vec![0usize; self.nnz()];
        for r in 0..self.n_rows {
            for &c in self.row(r) {
                indices[cursor[c]] = r;
                cursor[c] += 1;
            }
        }
        Csr {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr,
            indices,
        }
    }

    /// Dense 0/1 materialization, for oracle tests and tiny graphs only.
    pub fn to_dense<F: Real>(&self) -> Array2<F> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (r, c) in self.edges() {
            out[(r, c)] = F::one();
        }
        out
    }
}

/// A relation's edges grouped by the node that aggregates messages. For
/// each aggregating node `u`, edges `offsets[u]..offsets[u+1]` list its
/// neighbors; `agg[e]` / `nbr[e]` give the endpoints of packed edge `e`.
/// This is the layout attention kernels consume: per-edge scores live in a
/// packed `nnz x 1` tensor and the softmax runs per segment.
#[derive(Debug, Clone)]
pub struct EdgeGroups {
    pub n_agg: usize,
    pub n_nbr: usize,
    /// Segment boundaries, length `n_agg + 1`.
    pub offsets: std::sync::Arc<Vec<usize>>,
    /// Aggregating endpoint of each packed edge (expanded `offsets`).
    pub agg: std::sync::Arc<Vec<usize>>,
    /// Neighbor endpoint of each packed edge.
    pub nbr: std::sync::Arc<Vec<usize>>,
}

impl EdgeGroups {
    /// Group a CSR's entries by row: row nodes aggregate over their column
    /// neighbors. To aggregate in the other direction, pass the transpose.
    pub fn from_csr(csr: &Csr) -> EdgeGroups {
        let mut agg = Vec::with_capacity(csr.nnz());
        for r in 0..csr.n_rows {
            agg.extend(std::iter::repeat(r).take(csr.row(r).len()));
        }
        EdgeGroups {
            n_agg: csr.n_rows,
            n_nbr: csr.n_cols,
            offsets: std::sync::Arc::new(csr.indptr.clone()),
            agg: std::sync::Arc::new(agg),
            nbr: std::sync::Arc::new(csr.indices.clone()),
        }
    }

    pub fn nnz(&self) -> usize {
        self.nbr.len()
    }
}

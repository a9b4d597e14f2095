//! In-memory graph representation.
//!
//! [`HinGraph`] is immutable after construction and validated on entry, so
//! downstream stages (feature projection, encoding, splitting) can index
//! freely without re-checking bounds. Construction goes through
//! [`HinGraph::new`], which is also the single validation path for the
//! dataset loader.

use std::collections::HashSet;
use std::sync::Arc;

use ndarray::{array, Array2};

use crate::sparse::Csr;

use super::{HinError, Result};

/// Static description of one node type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTypeSchema {
    pub name: String,
    /// Number of nodes of this type.
    pub count: usize,
    /// Whether raw attributes are observed for this type.
    pub attributed: bool,
    /// Attribute dimensionality; zero exactly when non-attributed.
    pub feature_dim: usize,
}

/// One typed relation's adjacency pattern.
///
/// Cross-type relations are stored once in schema direction (rows = source
/// type). Same-type relations are stored symmetrized: `(u, v)` present iff
/// `(v, u)` present. The transpose is cached so either message direction is
/// a plain row iteration.
#[derive(Debug, Clone)]
pub struct RelationMatrix {
    pub name: String,
    pub src_type: usize,
    pub dst_type: usize,
    pub adj: Arc<Csr>,
    pub adj_t: Arc<Csr>,
}

impl RelationMatrix {
    pub fn nnz(&self) -> usize {
        self.adj.nnz()
    }

    /// Same-type relations are undirected by construction.
    pub fn is_same_type(&self) -> bool {
        self.src_type == self.dst_type
    }

    /// Number of undirected pairs for same-type relations: each `{u, v}` is
    /// counted once and self-loops count once. Equals `nnz` for cross-type.
    pub fn undirected_len(&self) -> usize {
        if self.is_same_type() {
            self.adj.edges().filter(|&(r, c)| r <= c).count()
        } else {
            self.nnz()
        }
    }
}

impl PartialEq for RelationMatrix {
    fn eq(&self, other: &Self) -> bool {
        // `adj_t` is derived from `adj`, so it carries no extra information.
        self.name == other.name
            && self.src_type == other.src_type
            && self.dst_type == other.dst_type
            && self.adj == other.adj
    }
}

/// Preferred on-disk encoding of a feature matrix, remembered from load so
/// exports reproduce the source layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    F32,
}

/// Dense attribute matrix for one attributed node type, one row per node.
/// Every entry is finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub type_id: usize,
    pub matrix: Array2<f64>,
    pub format: FeatureFormat,
}

/// Raw material for one relation, consumed by [`HinGraph::new`]. Edges may
/// arrive in any order; same-type relations are symmetrized on entry.
#[derive(Debug, Clone)]
pub struct RelationSpec {
    pub name: String,
    pub src_type: usize,
    pub dst_type: usize,
    pub edges: Vec<(usize, usize)>,
}

/// An attributed heterogeneous information network: node-type schema,
/// typed relations, per-type attribute matrices for the attributed subset,
/// and optional per-type integer labels (used only by evaluation).
#[derive(Debug, Clone, PartialEq)]
pub struct HinGraph {
    pub schema: Vec<NodeTypeSchema>,
    pub relations: Vec<RelationMatrix>,
    /// Aligned with `schema`: `Some` exactly for attributed types.
    pub features: Vec<Option<FeatureTable>>,
    /// Aligned with `schema`: `Some(v)` has `v.len() == count` for its type.
    pub labels: Vec<Option<Vec<i64>>>,
}

impl HinGraph {
    /// Validate raw parts and assemble a graph. Same-type relations are
    /// symmetrized here (union with the reversed edge set), so the
    /// symmetry invariant holds by construction.
    pub fn new(
        schema: Vec<NodeTypeSchema>,
        relations: Vec<RelationSpec>,
        features: Vec<Option<FeatureTable>>,
        labels: Vec<Option<Vec<i64>>>,
    ) -> Result<HinGraph> {
        let invalid = |detail: String| HinError::InvalidGraph { detail };
        if schema.is_empty() {
            return Err(invalid("schema declares no node types".into()));
        }
        let mut names = HashSet::new();
        for t in &schema {
            if t.count == 0 {
                return Err(invalid(format!("type {} has zero nodes", t.name)));
            }
            if t.attributed != (t.feature_dim >= 1) {
                return Err(invalid(format!(
                    "type {}: feature_dim must be >= 1 exactly when attributed (got {}, attributed={})",
                    t.name, t.feature_dim, t.attributed
                )));
            }
            if !names.insert(t.name.clone()) {
                return Err(invalid(format!("duplicate type name {}", t.name)));
            }
        }
        if features.len() != schema.len() || labels.len() != schema.len() {
            return Err(invalid(
                "features and labels must align with the schema".into(),
            ));
        }
        for (i, t) in schema.iter().enumerate() {
            match (&features[i], t.attributed) {
                (Some(f), true) => {
                    if f.type_id != i {
                        return Err(invalid(format!(
                            "feature table for type {} carries type_id {}",
                            i, f.type_id
                        )));
                    }
                    if f.matrix.dim() != (t.count, t.feature_dim) {
                        return Err(invalid(format!(
                            "type {}: feature matrix is {:?}, schema says ({}, {})",
                            t.name,
                            f.matrix.dim(),
                            t.count,
                            t.feature_dim
                        )));
                    }
                    if !f.matrix.iter().all(|v| v.is_finite()) {
                        return Err(invalid(format!(
                            "type {}: feature matrix has a non-finite entry",
                            t.name
                        )));
                    }
                }
                (None, false) => {}
                (Some(_), false) => {
                    return Err(invalid(format!(
                        "non-attributed type {} carries a feature table",
                        t.name
                    )));
                }
                (None, true) => {
                    return Err(invalid(format!(
                        "attributed type {} is missing its feature table",
                        t.name
                    )));
                }
            }
            if let Some(l) = &labels[i] {
                if l.len() != t.count {
                    return Err(invalid(format!(
                        "type {}: {} labels for {} nodes",
                        t.name,
                        l.len(),
                        t.count
                    )));
                }
            }
        }

        let mut rel_names = HashSet::new();
        let mut built = Vec::with_capacity(relations.len());
        for spec in relations {
            if !rel_names.insert(spec.name.clone()) {
                return Err(invalid(format!("duplicate relation name {}", spec.name)));
            }
            if spec.src_type >= schema.len() || spec.dst_type >= schema.len() {
                return Err(invalid(format!(
                    "relation {} references an unknown type",
                    spec.name
                )));
            }
            let (n_src, n_dst) = (schema[spec.src_type].count, schema[spec.dst_type].count);
            let mut seen = HashSet::with_capacity(spec.edges.len());
            for &(r, c) in &spec.edges {
                if r >= n_src || c >= n_dst {
                    return Err(invalid(format!(
                        "relation {}: edge ({}, {}) out of range ({} x {})",
                        spec.name, r, c, n_src, n_dst
                    )));
                }
                if !seen.insert((r, c)) {
                    return Err(invalid(format!(
                        "relation {}: duplicate edge ({}, {})",
                        spec.name, r, c
                    )));
                }
            }
            let edges: Vec<(usize, usize)> = if spec.src_type == spec.dst_type {
                // Symmetrize: a file or caller may state either or both
                // directions of an undirected pair.
                let mut sym: Vec<(usize, usize)> = seen
                    .iter()
                    .flat_map(|&(r, c)| [(r, c), (c, r)])
                    .collect::<HashSet<_>>()
                    .into_iter()
                    .collect();
                sym.sort_unstable();
                sym
            } else {
                spec.edges
            };
            let adj = Csr::from_edges(n_src, n_dst, &edges).map_err(|(r, c)| {
                invalid(format!(
                    "relation {}: duplicate edge ({}, {})",
                    spec.name, r, c
                ))
            })?;
            let adj_t = adj.transpose();
            built.push(RelationMatrix {
                name: spec.name,
                src_type: spec.src_type,
                dst_type: spec.dst_type,
                adj: Arc::new(adj),
                adj_t: Arc::new(adj_t),
            });
        }

        Ok(HinGraph {
            schema,
            relations: built,
            features,
            labels,
        })
    }

    pub fn n_types(&self) -> usize {
        self.schema.len()
    }

    pub fn n_nodes(&self, type_id: usize) -> usize {
        self.schema[type_id].count
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|t| t.name == name)
    }

    /// Indices of attributed types, in schema order.
    pub fn attributed_types(&self) -> Vec<usize> {
        (0..self.schema.len())
            .filter(|&i| self.schema[i].attributed)
            .collect()
    }

    pub fn feature_matrix(&self, type_id: usize) -> Option<&Array2<f64>> {
        self.features[type_id].as_ref().map(|f| &f.matrix)
    }

    /// FNV-1a hash over the schema counts and every relation's edges.
    /// Feature values are deliberately excluded so corruption utilities can
    /// assert "topology unchanged".
    pub fn topology_hash(&self) -> u64 {
        fn eat(h: u64, x: u64) -> u64 {
            (h ^ x).wrapping_mul(0x0000_0100_0000_01b3)
        }
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        h = eat(h, self.schema.len() as u64);
        for t in &self.schema {
            h = eat(h, t.count as u64);
        }
        for rel in &self.relations {
            h = eat(h, rel.src_type as u64);
            h = eat(h, rel.dst_type as u64);
            h = eat(h, rel.nnz() as u64);
            for (r, c) in rel.adj.edges() {
                h = eat(h, r as u64);
                h = eat(h, c as u64);
            }
        }
        h
    }
}

/// Fixed three-type, six-node graph used throughout the test suite: three
/// papers (4-dim attributes), two authors (3-dim attributes), one venue
/// (attribute-free). Exercises a same-type relation, two cross-type
/// relations, and an implicit one-hot type, while staying small enough for
/// finite-difference oracles.
pub fn toy_hin() -> HinGraph {
    let schema = vec![
        NodeTypeSchema {
            name: "paper".into(),
            count: 3,
            attributed: true,
            feature_dim: 4,
        },
        NodeTypeSchema {
            name: "author".into(),
            count: 2,
            attributed: true,
            feature_dim: 3,
        },
        NodeTypeSchema {
            name: "venue".into(),
            count: 1,
            attributed: false,
            feature_dim: 0,
        },
    ];
    let relations = vec![
        RelationSpec {
            name: "P-P".into(),
            src_type: 0,
            dst_type: 0,
            edges: vec![(0, 1), (1, 2)],
        },
        RelationSpec {
            name: "P-A".into(),
            src_type: 0,
            dst_type: 1,
            edges: vec![(0, 0), (1, 0), (2, 1)],
        },
        RelationSpec {
            name: "P-V".into(),
            src_type: 0,
            dst_type: 2,
            edges: vec![(0, 0), (1, 0), (2, 0)],
        },
    ];
    let paper_x = array![
        [0.10, -0.20, 0.30, 0.05],
        [0.40, 0.10, -0.30, 0.20],
        [-0.25, 0.15, 0.10, -0.10],
    ];
    let author_x = array![[0.20, -0.10, 0.05], [-0.30, 0.20, 0.10]];
    let features = vec![
        Some(FeatureTable {
            type_id: 0,
            matrix: paper_x,
            format: FeatureFormat::Csv,
        }),
        Some(FeatureTable {
            type_id: 1,
            matrix: author_x,
            format: FeatureFormat::Csv,
        }),
        None,
    ];
    let labels = vec![Some(vec![0, 1, 0]), Some(vec![0, 1]), None];
    HinGraph::new(schema, relations, features, labels).expect("toy graph is valid")
}

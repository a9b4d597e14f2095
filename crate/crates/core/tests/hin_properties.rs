//! Property tests for the data layer: randomly generated graphs survive a
//! write/load round trip, corruptions of a dataset directory surface
//! located errors (never a panic or a silently patched graph), edge splits
//! stay disjoint and exhaustive, and feature corruption never touches
//! topology.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use grami_core::hin::{
    corrupt_features, load_dataset, split_edges, write_dataset, FeatureFormat, FeatureTable,
    HinError, HinGraph, NodeTypeSchema, RelationSpec,
};
use grami_core::RngStream;
use ndarray::Array2;
use proptest::prelude::*;

fn arb_graph() -> impl Strategy<Value = HinGraph> {
    prop::collection::vec((1usize..=8, any::<bool>(), 1usize..=4), 1..=3).prop_flat_map(|decls| {
        let schema: Vec<NodeTypeSchema> = decls
            .iter()
            .enumerate()
            .map(|(i, &(count, attributed, dim))| NodeTypeSchema {
                name: format!("t{i}"),
                count,
                attributed,
                feature_dim: if attributed { dim } else { 0 },
            })
            .collect();
        let n_types = schema.len();
        let max_count = schema.iter().map(|t| t.count).max().unwrap();
        let feat_len: usize = schema
            .iter()
            .filter(|t| t.attributed)
            .map(|t| t.count * t.feature_dim)
            .sum();
        let total_count: usize = schema.iter().map(|t| t.count).sum();
        let rels = prop::collection::vec(
            (
                0..n_types,
                0..n_types,
                prop::collection::hash_set((0..max_count, 0..max_count), 0..10),
            ),
            0..=3,
        );
        (
            Just(schema),
            rels,
            prop::collection::vec(-1.0e6..1.0e6f64, feat_len..=feat_len),
            prop::collection::vec(any::<bool>(), n_types..=n_types),
            prop::collection::vec(0i64..4, total_count..=total_count),
        )
            .prop_map(|(schema, rels, feat_vals, label_mask, label_vals)| {
                let specs = rels
                    .into_iter()
                    .enumerate()
                    .map(|(i, (src, dst, raw))| {
                        // Fold generated endpoints into each type's range,
                        // then re-deduplicate: the fold can collide pairs.
                        let n_src = schema[src].count;
                        let n_dst = schema[dst].count;
                        let edges: HashSet<(usize, usize)> = raw
                            .into_iter()
                            .map(|(u, v)| (u % n_src, v % n_dst))
                            .collect();
                        RelationSpec {
                            name: format!("r{i}"),
                            src_type: src,
                            dst_type: dst,
                            edges: edges.into_iter().collect(),
                        }
                    })
                    .collect();
                let mut feat_cursor = 0usize;
                let features = schema
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        if !t.attributed {
                            return None;
                        }
                        let len = t.count * t.feature_dim;
                        let vals = feat_vals[feat_cursor..feat_cursor + len].to_vec();
                        feat_cursor += len;
                        Some(FeatureTable {
                            type_id: i,
                            matrix: Array2::from_shape_vec((t.count, t.feature_dim), vals)
                                .expect("shape matches slice"),
                            format: FeatureFormat::Csv,
                        })
                    })
                    .collect();
                let mut label_cursor = 0usize;
                let labels = schema
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let vals = label_vals[label_cursor..label_cursor + t.count].to_vec();
                        label_cursor += t.count;
                        label_mask[i].then_some(vals)
                    })
                    .collect();
                HinGraph::new(schema, specs, features, labels).expect("generated graph is valid")
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dataset_round_trip(g in arb_graph()) {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&g, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn corruption_changes_features_only(g in arb_graph(), k in 0.0..3.0f64, seed in any::<u64>()) {
        match corrupt_features(&g, k, seed) {
            Ok(out) => {
                prop_assert_eq!(out.topology_hash(), g.topology_hash());
                prop_assert_eq!(&out.labels, &g.labels);
                prop_assert_eq!(&out.schema, &g.schema);
                for (a, b) in out.features.iter().zip(&g.features) {
                    prop_assert_eq!(a.is_some(), b.is_some());
                    if let Some(table) = a {
                        prop_assert!(table.matrix.iter().all(|v| v.is_finite()));
                    }
                }
            }
            Err(HinError::NoAttributedType) => {
                prop_assert!(g.attributed_types().is_empty());
            }
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error: {e}"))),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_is_disjoint_exhaustive_and_negative_free(
        n_src in 3usize..15,
        n_dst in 3usize..15,
        edge_seed in any::<u64>(),
        split_seed in any::<u64>(),
    ) {
        // Keep at most half the cells occupied so negatives always exist.
        let n_edges = 3 + (edge_seed % 8) as usize;
        prop_assume!(n_edges <= n_src * n_dst / 2);
        let mut rng = RngStream::new(edge_seed);
        let mut edge_set = HashSet::new();
        while edge_set.len() < n_edges {
            edge_set.insert((rng.below(n_src), rng.below(n_dst)));
        }
        let g = HinGraph::new(
            vec![
                NodeTypeSchema { name: "s".into(), count: n_src, attributed: false, feature_dim: 0 },
                NodeTypeSchema { name: "d".into(), count: n_dst, attributed: false, feature_dim: 0 },
            ],
            vec![RelationSpec {
                name: "s-d".into(),
                src_type: 0,
                dst_type: 1,
                edges: edge_set.iter().copied().collect(),
            }],
            vec![None, None],
            vec![None, None],
        ).unwrap();

        let split = split_edges(&g, (0.85, 0.05, 0.10), split_seed).unwrap();
        prop_assert_eq!(&split, &split_edges(&g, (0.85, 0.05, 0.10), split_seed).unwrap());
        let s = &split.relations[0];
        let train: HashSet<_> = s.train_pos.iter().copied().collect();
        let val: HashSet<_> = s.val_pos.iter().copied().collect();
        let test: HashSet<_> = s.test_pos.iter().copied().collect();
        prop_assert_eq!(train.len() + val.len() + test.len(), n_edges);
        prop_assert!(train.is_disjoint(&val) && train.is_disjoint(&test) && val.is_disjoint(&test));
        let union: HashSet<_> = s.positives().collect();
        prop_assert_eq!(union, edge_set.clone());
        prop_assert_eq!(s.train_neg.len(), s.train_pos.len());
        prop_assert_eq!(s.val_neg.len(), s.val_pos.len());
        prop_assert_eq!(s.test_neg.len(), s.test_pos.len());
        for neg in [&s.train_neg, &s.val_neg, &s.test_neg] {
            for pair in neg {
                prop_assert!(!edge_set.contains(pair));
            }
        }
    }
}

/// Fixed valid dataset the corruption cases start from.
fn write_base(dir: &Path) {
    let schema = r#"{
  "types": [
    {"name": "a", "count": 3, "attributed": true, "feature_dim": 2},
    {"name": "b", "count": 2, "attributed": false, "feature_dim": 0}
  ],
  "relations": [
    {"relation": "a-a", "src": "a", "dst": "a"},
    {"relation": "a-b", "src": "a", "dst": "b"}
  ]
}"#;
    fs::write(dir.join("schema.json"), schema).unwrap();
    fs::write(dir.join("edges_a-a.tsv"), "0\t1\n1\t2\n").unwrap();
    fs::write(dir.join("edges_a-b.tsv"), "0\t0\n1\t1\n2\t0\n").unwrap();
    fs::write(dir.join("features_a.csv"), "0.5,1.0\n-1.5,2.25\n0.0,3.5\n").unwrap();
    fs::write(dir.join("labels_a.txt"), "0\n1\n0\n").unwrap();
}

#[derive(Debug, Clone)]
enum Corruption {
    TruncateSchema(f64),
    UnknownSchemaKey,
    GarbageEdgeLine,
    HugeEdgeIndex,
    DuplicateEdgeLine,
    NanFeature,
    MissingFeatureRow,
    ExtraFeatureColumn,
    WrongLabelCount,
    DeleteEdgesFile,
    InvalidUtf8Features,
}

fn arb_corruption() -> impl Strategy<Value = Corruption> {
    prop_oneof![
        (0.0..1.0f64).prop_map(Corruption::TruncateSchema),
        Just(Corruption::UnknownSchemaKey),
        Just(Corruption::GarbageEdgeLine),
        Just(Corruption::HugeEdgeIndex),
        Just(Corruption::DuplicateEdgeLine),
        Just(Corruption::NanFeature),
        Just(Corruption::MissingFeatureRow),
        Just(Corruption::ExtraFeatureColumn),
        Just(Corruption::WrongLabelCount),
        Just(Corruption::DeleteEdgesFile),
        Just(Corruption::InvalidUtf8Features),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn malformed_inputs_surface_located_errors(c in arb_corruption()) {
        let dir = tempfile::tempdir().unwrap();
        let dir = dir.path();
        write_base(dir);
        match &c {
            Corruption::TruncateSchema(frac) => {
                let raw = fs::read(dir.join("schema.json")).unwrap();
                let cut = ((raw.len() as f64 * frac) as usize).min(raw.len() - 1);
                fs::write(dir.join("schema.json"), &raw[..cut]).unwrap();
            }
            Corruption::UnknownSchemaKey => {
                let raw = fs::read_to_string(dir.join("schema.json")).unwrap();
                let patched = raw.replacen("\"count\": 3,", "\"count\": 3, \"weight\": 1,", 1);
                fs::write(dir.join("schema.json"), patched).unwrap();
            }
            Corruption::GarbageEdgeLine => {
                fs::write(dir.join("edges_a-b.tsv"), "0\t0\n1\t1\nx\tz\n").unwrap();
            }
            Corruption::HugeEdgeIndex => {
                fs::write(dir.join("edges_a-b.tsv"), "0\t0\n1\t1\n99\t0\n").unwrap();
            }
            Corruption::DuplicateEdgeLine => {
                fs::write(dir.join("edges_a-b.tsv"), "0\t0\n1\t1\n0\t0\n").unwrap();
            }
            Corruption::NanFeature => {
                fs::write(dir.join("features_a.csv"), "0.5,NaN\n-1.5,2.25\n0.0,3.5\n").unwrap();
            }
            Corruption::MissingFeatureRow => {
                fs::write(dir.join("features_a.csv"), "0.5,1.0\n-1.5,2.25\n").unwrap();
            }
            Corruption::ExtraFeatureColumn => {
                fs::write(dir.join("features_a.csv"), "0.5,1.0,9.0\n-1.5,2.25\n0.0,3.5\n").unwrap();
            }
            Corruption::WrongLabelCount => {
                fs::write(dir.join("labels_a.txt"), "0\n1\n0\n7\n").unwrap();
            }
            Corruption::DeleteEdgesFile => {
                fs::remove_file(dir.join("edges_a-a.tsv")).unwrap();
            }
            Corruption::InvalidUtf8Features => {
                fs::write(dir.join("features_a.csv"), [0xff, 0xfe, 0x0a]).unwrap();
            }
        }
        let err = match load_dataset(dir) {
            Err(e) => e,
            Ok(_) => return Err(TestCaseError::fail(format!("corruption {c:?} was accepted"))),
        };
        let ok = match &c {
            Corruption::TruncateSchema(_) | Corruption::UnknownSchemaKey
            | Corruption::GarbageEdgeLine | Corruption::MissingFeatureRow
            | Corruption::ExtraFeatureColumn | Corruption::WrongLabelCount =>
                matches!(err, HinError::SchemaMismatch { .. }),
            Corruption::HugeEdgeIndex => matches!(err, HinError::IndexOutOfRange { .. }),
            Corruption::DuplicateEdgeLine => matches!(err, HinError::DuplicateEdge { .. }),
            Corruption::NanFeature => matches!(err, HinError::NonFiniteFeature { .. }),
            Corruption::DeleteEdgesFile => matches!(err, HinError::MissingFile { .. }),
            Corruption::InvalidUtf8Features => matches!(err, HinError::Io { .. }),
        };
        prop_assert!(ok, "corruption {:?} produced unexpected error {:?}", c, err);
    }
}

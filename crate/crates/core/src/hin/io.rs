//! Dataset directory ingestion and export.
//!
//! A dataset is a flat directory:
//! - `schema.json` — node types (`{name, count, attributed, feature_dim}`)
//!   and relations (`{relation, src, dst}`, endpoints by type name);
//! - `edges_<relation>.tsv` — one `src\tdst` pair of 0-based indices per
//!   line;
//! - `features_<type>.csv` — `count` lines of `feature_dim` comma-separated
//!   decimals, or alternatively `features_<type>.f32` — row-major
//!   little-endian 32-bit floats with dims taken from the schema;
//! - `labels_<type>.txt` (optional) — one integer per line.
//!
//! Ingestion is total: any malformed input aborts with an error naming the
//! file and line, never a panic or a silently patched graph.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::types::{
    FeatureFormat, FeatureTable, HinGraph, NodeTypeSchema, RelationMatrix, RelationSpec,
};
use super::{HinError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeDecl {
    name: String,
    count: usize,
    attributed: bool,
    feature_dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationDecl {
    relation: String,
    src: String,
    dst: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    types: Vec<TypeDecl>,
    relations: Vec<RelationDecl>,
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn open_error(path: &Path, e: std::io::Error) -> HinError {
    if e.kind() == std::io::ErrorKind::NotFound {
        HinError::MissingFile {
            path: path_str(path),
        }
    } else {
        HinError::Io {
            path: path_str(path),
            detail: e.to_string(),
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| open_error(path, e))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(|e| open_error(path, e))?);
    }
    // A single trailing newline is conventional; ignore the empty tail.
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    Ok(lines)
}

fn mismatch(path: &Path, detail: String) -> HinError {
    HinError::SchemaMismatch {
        file: path_str(path),
        detail,
    }
}

/// Load and validate a dataset directory. See the module docs for layout.
pub fn load_dataset<P: AsRef<Path>>(dir: P) -> Result<HinGraph> {
    let dir = dir.as_ref();
    let schema_path = dir.join("schema.json");
    let raw = fs::read_to_string(&schema_path).map_err(|e| open_error(&schema_path, e))?;
    let parsed: SchemaFile =
        serde_json::from_str(&raw).map_err(|e| mismatch(&schema_path, e.to_string()))?;

    let schema: Vec<NodeTypeSchema> = parsed
        .types
        .iter()
        .map(|t| NodeTypeSchema {
            name: t.name.clone(),
            count: t.count,
            attributed: t.attributed,
            feature_dim: t.feature_dim,
        })
        .collect();
    let type_index = |name: &str| -> Result<usize> {
        schema
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| mismatch(&schema_path, format!("unknown type name {name}")))
    };

    let mut relations = Vec::with_capacity(parsed.relations.len());
    for decl in &parsed.relations {
        let src_type = type_index(&decl.src)?;
        let dst_type = type_index(&decl.dst)?;
        let path = dir.join(format!("edges_{}.tsv", decl.relation));
        let edges = read_edges(
            &path,
            &schema[src_type].name,
            schema[src_type].count,
            &schema[dst_type].name,
            schema[dst_type].count,
        )?;
        relations.push(RelationSpec {
            name: decl.relation.clone(),
            src_type,
            dst_type,
            edges,
        });
    }

    let mut features = Vec::with_capacity(schema.len());
    let mut labels = Vec::with_capacity(schema.len());
    for (i, t) in schema.iter().enumerate() {
        features.push(if t.attributed {
            Some(read_features(dir, i, t)?)
        } else {
            None
        });
        let label_path = dir.join(format!("labels_{}.txt", t.name));
        labels.push(if label_path.exists() {
            Some(read_labels(&label_path, t)?)
        } else {
            None
        });
    }

    HinGraph::new(schema, relations, features, labels)
}

fn read_edges(
    path: &Path,
    src_name: &str,
    n_src: usize,
    dst_name: &str,
    n_dst: usize,
) -> Result<Vec<(usize, usize)>> {
    let lines = read_lines(path)?;
    let mut edges = Vec::with_capacity(lines.len());
    let mut seen = HashSet::with_capacity(lines.len());
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(mismatch(
                    path,
                    format!("line {line_no}: expected two tab-separated integers"),
                ))
            }
        };
        let parse = |s: &str| -> Result<usize> {
            s.trim().parse::<usize>().map_err(|_| {
                mismatch(
                    path,
                    format!("line {line_no}: expected a non-negative integer, got {s:?}"),
                )
            })
        };
        let (src, dst) = (parse(a)?, parse(b)?);
        let bound = |index: usize, ty: &str, count: usize| -> Result<()> {
            if index >= count {
                Err(HinError::IndexOutOfRange {
                    file: path_str(path),
                    line: line_no,
                    index,
                    ty: ty.to_string(),
                    count,
                })
            } else {
                Ok(())
            }
        };
        bound(src, src_name, n_src)?;
        bound(dst, dst_name, n_dst)?;
        if !seen.insert((src, dst)) {
            return Err(HinError::DuplicateEdge {
                file: path_str(path),
                line: line_no,
                src,
                dst,
            });
        }
        edges.push((src, dst));
    }
    Ok(edges)
}

fn read_features(dir: &Path, type_id: usize, t: &NodeTypeSchema) -> Result<FeatureTable> {
    let csv_path = dir.join(format!("features_{}.csv", t.name));
    let bin_path = dir.join(format!("features_{}.f32", t.name));
    match (csv_path.exists(), bin_path.exists()) {
        (true, true) => Err(mismatch(
            &csv_path,
            format!("both csv and f32 feature files present for type {}", t.name),
        )),
        (true, false) => read_features_csv(&csv_path, type_id, t),
        (false, true) => read_features_f32(&bin_path, type_id, t),
        (false, false) => Err(HinError::MissingFile {
            path: format!("{} (or .f32)", path_str(&csv_path)),
        }),
    }
}

fn read_features_csv(path: &Path, type_id: usize, t: &NodeTypeSchema) -> Result<FeatureTable> {
    let lines = read_lines(path)?;
    if lines.len() != t.count {
        return Err(mismatch(
            path,
            format!("expected {} feature rows, found {}", t.count, lines.len()),
        ));
    }
    let mut matrix = Array2::<f64>::zeros((t.count, t.feature_dim));
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != t.feature_dim {
            return Err(mismatch(
                path,
                format!(
                    "line {line_no}: expected {} comma-separated values, found {}",
                    t.feature_dim,
                    fields.len()
                ),
            ));
        }
        for (j, field) in fields.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                mismatch(
                    path,
                    format!("line {line_no}: expected a decimal float, got {field:?}"),
                )
            })?;
            if !value.is_finite() {
                return Err(HinError::NonFiniteFeature {
                    file: path_str(path),
                    line: line_no,
                });
            }
            matrix[(idx, j)] = value;
        }
    }
    Ok(FeatureTable {
        type_id,
        matrix,
        format: FeatureFormat::Csv,
    })
}

fn read_features_f32(path: &Path, type_id: usize, t: &NodeTypeSchema) -> Result<FeatureTable> {
    let bytes = fs::read(path).map_err(|e| open_error(path, e))?;
    let expected = t.count * t.feature_dim * 4;
    if bytes.len() != expected {
        return Err(mismatch(
            path,
            format!("expected {} bytes ({} x {} f32), found {}", expected, t.count, t.feature_dim, bytes.len()),
        ));
    }
    let mut matrix = Array2::<f64>::zeros((t.count, t.feature_dim));
    for (e, chunk) in bytes.chunks_exact(4).enumerate() {
        let value = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !value.is_finite() {
            return Err(HinError::NonFiniteFeature {
                file: path_str(path),
                // Rows stand in for lines in the binary layout.
                line: e / t.feature_dim + 1,
            });
        }
        matrix[(e / t.feature_dim, e % t.feature_dim)] = f64::from(value);
    }
    Ok(FeatureTable {
        type_id,
        matrix,
        format: FeatureFormat::F32,
    })
}

fn read_labels(path: &Path, t: &NodeTypeSchema) -> Result<Vec<i64>> {
    let lines = read_lines(path)?;
    if lines.len() != t.count {
        return Err(mismatch(
            path,
            format!("expected {} labels, found {}", t.count, lines.len()),
        ));
    }
    lines
        .iter()
        .enumerate()
        .map(|(idx, line)| {
            line.trim().parse::<i64>().map_err(|_| {
                mismatch(
                    path,
                    format!("line {}: expected an integer label, got {line:?}", idx + 1),
                )
            })
        })
        .collect()
}

/// Export a graph as a dataset directory readable by [`load_dataset`].
/// Same-type relations are written once per undirected pair; feature
/// matrices use each table's remembered [`FeatureFormat`].
pub fn write_dataset<P: AsRef<Path>>(g: &HinGraph, dir: P) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| open_error(dir, e))?;
    let write = |path: &Path, bytes: &[u8]| -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| open_error(path, e))?;
        f.write_all(bytes).map_err(|e| open_error(path, e))
    };

    let schema_file = SchemaFile {
        types: g
            .schema
            .iter()
            .map(|t| TypeDecl {
                name: t.name.clone(),
                count: t.count,
                attributed: t.attributed,
                feature_dim: t.feature_dim,
            })
            .collect(),
        relations: g
            .relations
            .iter()
            .map(|r| RelationDecl {
                relation: r.name.clone(),
                src: g.schema[r.src_type].name.clone(),
                dst: g.schema[r.dst_type].name.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&schema_file).expect("schema serializes");
    write(&dir.join("schema.json"), format!("{json}\n").as_bytes())?;

    for rel in &g.relations {
        let mut out = String::new();
        for (r, c) in edges_for_export(rel) {
            out.push_str(&format!("{r}\t{c}\n"));
        }
        write(&dir.join(format!("edges_{}.tsv", rel.name)), out.as_bytes())?;
    }

    for (i, t) in g.schema.iter().enumerate() {
        if let Some(table) = &g.features[i] {
            match table.format {
                FeatureFormat::Csv => {
                    let mut out = String::new();
                    for row in table.matrix.rows() {
                        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                        out.push_str(&fields.join(","));
                        out.push('\n');
                    }
                    write(
                        &dir.join(format!("features_{}.csv", t.name)),
                        out.as_bytes(),
                    )?;
                }
                FeatureFormat::F32 => {
                    let mut bytes = Vec::with_capacity(table.matrix.len() * 4);
                    for v in table.matrix.iter() {
                        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
                    }
                    write(&dir.join(format!("features_{}.f32", t.name)), &bytes)?;
                }
            }
        }
        if let Some(labels) = &g.labels[i] {
            let mut out = String::new();
            for l in labels {
                out.push_str(&format!("{l}\n"));
            }
            write(&dir.join(format!("labels_{}.txt", t.name)), out.as_bytes())?;
        }
    }
    Ok(())
}

fn edges_for_export(rel: &RelationMatrix) -> Vec<(usize, usize)> {
    if rel.is_same_type() {
        rel.adj.edges().filter(|&(r, c)| r <= c).collect()
    } else {
        rel.adj.edges().collect()
    }
}

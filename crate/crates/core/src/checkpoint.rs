//! Binary checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "GRMICKPT"
//! version  u32
//! best     u64      best epoch index
//! cfg_len  u64      length of the config JSON
//! cfg      cfg_len bytes of JSON (the full TrainConfig)
//! count    u64      number of tensors
//! table    count × { name_len u64, name bytes, rows u64, cols u64 }
//! payload  count tensors of rows·cols f32 values, row-major
//! ```
//!
//! Tensors appear in parameter insertion order, so a round trip restores
//! the flat layout bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::config::TrainConfig;
use crate::error::{GramiError, Result};
use crate::numeric::{to_f64, ModelParams, Real};

const MAGIC: &[u8; 8] = b"GRMICKPT";
const VERSION: u32 = 1;
/// Upper bounds on header fields so a corrupt file cannot demand absurd
/// allocations before failing.
const MAX_NAME_LEN: u64 = 4096;
const MAX_TENSOR_ELEMS: u64 = 1 << 31;

/// A loaded checkpoint. Payloads are stored in f32, the training dtype;
/// cast with [`ModelParams::cast`] where f64 is needed.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub config: TrainConfig,
    pub best_epoch: usize,
}

fn io_err(path: &Path, e: std::io::Error) -> GramiError {
    GramiError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    }
}

fn corrupt(path: &Path, detail: impl Into<String>) -> GramiError {
    GramiError::CorruptCheckpoint {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Write parameters, config, and the best epoch to `path`.
pub fn save<F: Real>(
    path: &Path,
    params: &ModelParams<F>,
    cfg: &TrainConfig,
    best_epoch: usize,
) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let cfg_json = serde_json::to_vec(cfg).expect("config serializes");
    let emit = |w: &mut BufWriter<File>, bytes: &[u8]| {
        w.write_all(bytes).map_err(|e| io_err(path, e))
    };
    emit(&mut w, MAGIC)?;
    emit(&mut w, &VERSION.to_le_bytes())?;
    emit(&mut w, &(best_epoch as u64).to_le_bytes())?;
    emit(&mut w, &(cfg_json.len() as u64).to_le_bytes())?;
    emit(&mut w, &cfg_json)?;
    emit(&mut w, &(params.len() as u64).to_le_bytes())?;
    for i in 0..params.len() {
        let name = params.name(i).as_bytes();
        let (rows, cols) = params.value(i).dim();
        emit(&mut w, &(name.len() as u64).to_le_bytes())?;
        emit(&mut w, name)?;
        emit(&mut w, &(rows as u64).to_le_bytes())?;
        emit(&mut w, &(cols as u64).to_le_bytes())?;
    }
    for i in 0..params.len() {
        for v in params.value(i).iter() {
            emit(&mut w, &(to_f64(*v) as f32).to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

struct Reader<'a> {
    inner: BufReader<File>,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                corrupt(self.path, format!("truncated while reading {what}"))
            } else {
                io_err(self.path, e)
            }
        })
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.exact(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }
}

/// Read a checkpoint back. Any structural defect — bad magic, unknown
/// version, truncation, unparseable config, implausible tensor headers,
/// or trailing bytes — is a [`GramiError::CorruptCheckpoint`].
pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path,
    };

    let mut magic = [0u8; 8];
    r.exact(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(corrupt(path, "bad magic bytes"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(corrupt(path, format!("unsupported version {version}")));
    }
    let best_epoch = r.u64("best epoch")? as usize;

    let cfg_len = r.u64("config length")?;
    if cfg_len > 1 << 20 {
        return Err(corrupt(path, format!("implausible config length {cfg_len}")));
    }
    let mut cfg_bytes = vec![0u8; cfg_len as usize];
    r.exact(&mut cfg_bytes, "config")?;
    let config: TrainConfig = serde_json::from_slice(&cfg_bytes)
        .map_err(|e| corrupt(path, format!("config does not parse: {e}")))?;

    let count = r.u64("tensor count")?;
    if count > 1 << 20 {
        return Err(corrupt(path, format!("implausible tensor count {count}")));
    }
    let mut table = Vec::with_capacity(count as usize);
    for t in 0..count {
        let name_len = r.u64("tensor name length")?;
        if name_len == 0 || name_len > MAX_NAME_LEN {
            return Err(corrupt(path, format!("tensor {t}: bad name length {name_len}")));
        }
        let mut name = vec![0u8; name_len as usize];
        r.exact(&mut name, "tensor name")?;
        let name = String::from_utf8(name)
            .map_err(|_| corrupt(path, format!("tensor {t}: name is not UTF-8")))?;
        let rows = r.u64("tensor rows")?;
        let cols = r.u64("tensor cols")?;
        if rows == 0 || cols == 0 || rows.saturating_mul(cols) > MAX_TENSOR_ELEMS {
            return Err(corrupt(
                path,
                format!("tensor {name:?}: implausible shape {rows}x{cols}"),
            ));
        }
        table.push((name, rows as usize, cols as usize));
    }

    let mut params: ModelParams<f32> = ModelParams::new();
    for (name, rows, cols) in table {
        let mut bytes = vec![0u8; rows * cols * 4];
        r.exact(&mut bytes, &format!("payload of {name:?}"))?;
        let mut m = Array2::zeros((rows, cols));
        for (k, v) in m.iter_mut().enumerate() {
            let b = [bytes[4 * k], bytes[4 * k + 1], bytes[4 * k + 2], bytes[4 * k + 3]];
            *v = f32::from_le_bytes(b);
        }
        params
            .insert(name.clone(), m)
            .map_err(|_| corrupt(path, format!("tensor {name:?} appears twice")))?;
    }

    let mut trailing = [0u8; 1];
    match r.inner.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(corrupt(path, "trailing bytes after payload")),
        Err(e) => return Err(io_err(path, e)),
    }

    Ok(Checkpoint {
        params,
        config,
        best_epoch,
    })
}

//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "DLVCKPT\0"
//! version    u32
//! manifest   u64 length, then UTF-8 JSON
//! n_arrays   u32
//! per array: u32 name length, name bytes,
//!            u8 element width (4 = f32, 8 = f64),
//!            u32 rank, rank x u64 dims,
//!            elements in row-major order
//! ```
//!
//! Arrays named `param.<name>` hold model parameters; `adam.m.<name>` and
//! `adam.v.<name>` hold optimizer moments.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ParameterStore};
use crate::numerics::{Scalar, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DLVCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub seed: u64,
    /// Free-form training state (epoch, step, scores, training config).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl CheckpointManifest {
    pub fn new(model: ModelConfig, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model,
            seed,
            metadata: serde_json::Value::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub params: ParameterStore<f32>,
    /// First and second Adam moments, keyed like `params`.
    pub optimizer: Option<(ParameterStore<f32>, ParameterStore<f32>)>,
}

impl Checkpoint {
    pub fn new(manifest: CheckpointManifest, params: ParameterStore<f32>) -> Self {
        Self {
            manifest,
            params,
            optimizer: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let manifest = serde_json::to_vec(&self.manifest).expect("manifest is serialisable");
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        let mut arrays: Vec<(String, &Tensor<f32>)> =
            self.params.iter().map(|(k, v)| (format!("param.{k}"), v)).collect();
        if let Some((m, v)) = &self.optimizer {
            arrays.extend(m.iter().map(|(k, t)| (format!("adam.m.{k}"), t)));
            arrays.extend(v.iter().map(|(k, t)| (format!("adam.v.{k}"), t)));
        }
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for (name, t) in arrays {
            write_array(&mut out, &name, t);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let len = r.u64()? as usize;
        let manifest: CheckpointManifest =
            serde_json::from_slice(r.take(len)?).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported schema_version {}",
                manifest.schema_version
            )));
        }
        let n = r.u32()?;
        let (mut params, mut m, mut v) = (ParameterStore::new(), ParameterStore::new(), ParameterStore::new());
        for _ in 0..n {
            let (name, tensor) = read_array(&mut r)?;
            let slot = if let Some(k) = name.strip_prefix("param.") {
                params.insert(k, tensor)
            } else if let Some(k) = name.strip_prefix("adam.m.") {
                m.insert(k, tensor)
            } else if let Some(k) = name.strip_prefix("adam.v.") {
                v.insert(k, tensor)
            } else {
                return Err(Error::Checkpoint(format!("unknown array {name}")));
            };
            slot.map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        if r.at != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last array".into()));
        }
        params
            .check(&manifest.model.param_specs())
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let optimizer = if m.is_empty() && v.is_empty() {
            None
        } else {
            let specs = manifest.model.param_specs();
            m.check(&specs).map_err(|e| Error::Checkpoint(format!("adam.m: {e}")))?;
            v.check(&specs).map_err(|e| Error::Checkpoint(format!("adam.v: {e}")))?;
            Some((m, v))
        };
        Ok(Self {
            manifest,
            params,
            optimizer,
        })
    }

    /// Errors, naming every differing field, unless the stored model
    /// configuration equals `expected`.
    pub fn ensure_model(&self, expected: &ModelConfig) -> Result<()> {
        if &self.manifest.model == expected {
            return Ok(());
        }
        let a = serde_json::to_value(&self.manifest.model).expect("serialisable");
        let b = serde_json::to_value(expected).expect("serialisable");
        let mut fields = Vec::new();
        diff("", &a, &b, &mut fields);
        Err(Error::Checkpoint(format!(
            "model configuration differs in: {}",
            fields.join(", ")
        )))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn diff(path: &str, a: &serde_json::Value, b: &serde_json::Value, out: &mut Vec<String>) {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                let sub = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match (x.get(k), y.get(k)) {
                    (Some(p), Some(q)) => diff(&sub, p, q, out),
                    _ => out.push(sub),
                }
            }
        }
        _ if a != b => out.push(if path.is_empty() { "model".into() } else { path.into() }),
        _ => {}
    }
}

fn write_array<T: Scalar>(out: &mut Vec<u8>, name: &str, t: &Tensor<T>) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(T::BYTES as u8);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in t.data() {
        x.write_le(out);
    }
}

fn read_array(r: &mut Reader<'_>) -> Result<(String, Tensor<f32>)> {
    let len = r.u32()? as usize;
    let name =
        String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?;
    let width = r.take(1)?[0] as usize;
    if width != f32::BYTES {
        return Err(Error::Checkpoint(format!("{name}: element width {width}, expected 4")));
    }
    let rank = r.u32()? as usize;
    let shape = (0..rank)
        .map(|_| r.u64().map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    let count = count.ok_or_else(|| Error::Checkpoint(format!("{name}: shape overflows")))?;
    let raw = r.take(
        count
            .checked_mul(width)
            .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
    )?;
    let data = raw.chunks_exact(width).map(f32::read_le).collect();
    Ok((name, Tensor::new(shape, data)?))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

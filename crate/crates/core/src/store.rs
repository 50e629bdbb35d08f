//! Versioned, checksummed directory container used for datasets, model
//! checkpoints and calibration sets.
//!
//! ```text
//! <dir>/meta.json      {"kind", "version", "meta": {...}, "arrays": [...]}
//! <dir>/<name>.bin     little-endian flat array
//! ```
//!
//! Every array entry records its dtype (`f32`, `f64`, `u8` or `u32`), element count
//! and the SHA-256 of its file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq)]
pub enum Array {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
    U32(Vec<u32>),
}

impl Array {
    fn dtype(&self) -> &'static str {
        match self {
            Array::F32(_) => "f32",
            Array::F64(_) => "f64",
            Array::U8(_) => "u8",
            Array::U32(_) => "u32",
        }
    }

    fn len(&self) -> usize {
        match self {
            Array::F32(v) => v.len(),
            Array::F64(v) => v.len(),
            Array::U8(v) => v.len(),
            Array::U32(v) => v.len(),
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        match self {
            Array::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Array::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Array::U8(v) => v.clone(),
            Array::U32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_bytes(dtype: &str, bytes: &[u8]) -> Option<Self> {
        Some(match dtype {
            "f32" => Array::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            "f64" => Array::F64(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            "u8" => Array::U8(bytes.to_vec()),
            "u32" => Array::U32(
                bytes
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            _ => return None,
        })
    }

    fn width(dtype: &str) -> Option<usize> {
        match dtype {
            "f32" => Some(4),
            "f64" => Some(8),
            "u8" => Some(1),
            "u32" => Some(4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    dtype: String,
    len: usize,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    kind: String,
    version: u32,
    meta: serde_json::Value,
    arrays: Vec<ArrayEntry>,
}

/// Arrays read back from a container, by name.
#[derive(Debug, Default)]
pub struct Arrays {
    dir: PathBuf,
    items: BTreeMap<String, Array>,
}

impl Arrays {
    fn missing(&self, name: &str, dtype: &str) -> Error {
        Error::Meta {
            path: self.dir.join(META_FILE),
            reason: format!("missing {dtype} array `{name}`"),
        }
    }

    pub fn take_f32(&mut self, name: &str) -> Result<Vec<f32>> {
        match self.items.remove(name) {
            Some(Array::F32(v)) => Ok(v),
            _ => Err(self.missing(name, "f32")),
        }
    }

    pub fn take_f64(&mut self, name: &str) -> Result<Vec<f64>> {
        match self.items.remove(name) {
            Some(Array::F64(v)) => Ok(v),
            _ => Err(self.missing(name, "f64")),
        }
    }

    pub fn take_u32(&mut self, name: &str) -> Result<Vec<u32>> {
        match self.items.remove(name) {
            Some(Array::U32(v)) => Ok(v),
            _ => Err(self.missing(name, "u32")),
        }
    }

    pub fn take_u8(&mut self, name: &str) -> Result<Vec<u8>> {
        match self.items.remove(name) {
            Some(Array::U8(v)) => Ok(v),
            _ => Err(self.missing(name, "u8")),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `meta` and `arrays` under `dir`, creating it if needed.
pub fn write<M: Serialize>(dir: &Path, kind: &str, meta: &M, arrays: &[(&str, Array)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(arrays.len());
    for (name, array) in arrays {
        let bytes = array.to_bytes();
        let path = dir.join(format!("{name}.bin"));
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(ArrayEntry {
            name: name.to_string(),
            dtype: array.dtype().into(),
            len: array.len(),
            sha256: sha256_hex(&bytes),
        });
    }
    let envelope = Envelope {
        kind: kind.into(),
        version: FORMAT_VERSION,
        meta: serde_json::to_value(meta).map_err(|e| Error::Meta {
            path: dir.join(META_FILE),
            reason: e.to_string(),
        })?,
        arrays: entries,
    };
    let path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(&envelope).expect("envelope serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Reads a container of the given kind, verifying version, sizes and checksums.
pub fn read<M: DeserializeOwned>(dir: &Path, kind: &str) -> Result<(M, Arrays)> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let envelope: Envelope = serde_json::from_str(&text).map_err(|e| Error::Meta {
        path: meta_path.clone(),
        reason: e.to_string(),
    })?;
    if envelope.version != FORMAT_VERSION {
        return Err(Error::Version {
            found: envelope.version,
            expected: FORMAT_VERSION,
        });
    }
    if envelope.kind != kind {
        return Err(Error::Meta {
            path: meta_path,
            reason: format!("container kind `{}`, expected `{kind}`", envelope.kind),
        });
    }
    let meta: M = serde_json::from_value(envelope.meta).map_err(|e| Error::Meta {
        path: meta_path.clone(),
        reason: e.to_string(),
    })?;
    let mut items = BTreeMap::new();
    for entry in envelope.arrays {
        let path = dir.join(format!("{}.bin", entry.name));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let width = Array::width(&entry.dtype).ok_or_else(|| Error::Meta {
            path: meta_path.clone(),
            reason: format!("unknown dtype `{}`", entry.dtype),
        })?;
        if bytes.len() != entry.len * width {
            return Err(Error::Integrity {
                path,
                reason: format!("expected {} bytes, found {}", entry.len * width, bytes.len()),
            });
        }
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Integrity {
                path,
                reason: "checksum mismatch".into(),
            });
        }
        let array = Array::from_bytes(&entry.dtype, &bytes).expect("dtype checked");
        items.insert(entry.name, array);
    }
    Ok((
        meta,
        Arrays {
            dir: dir.to_path_buf(),
            items,
        },
    ))
}

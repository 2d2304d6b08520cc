//! Vectors stored inline in JSON or, when large, in a sidecar file of
//! little-endian `f64`s next to the JSON document.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{dims, Result};

/// Vectors longer than this go to a sidecar file.
pub const SIDECAR_THRESHOLD: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StoredVector {
    Inline(Vec<f64>),
    Sidecar { path: String, len: usize },
}

impl StoredVector {
    /// Inlines `v` unless it exceeds `threshold`, in which case it is
    /// written to `dir/file_name` and referenced by that relative name.
    pub fn store(v: &[f64], dir: &Path, file_name: &str, threshold: usize) -> Result<Self> {
        if v.len() <= threshold {
            return Ok(Self::Inline(v.to_vec()));
        }
        write_f64_le(&dir.join(file_name), v)?;
        Ok(Self::Sidecar {
            path: file_name.to_string(),
            len: v.len(),
        })
    }

    pub fn load(&self, dir: &Path) -> Result<Vec<f64>> {
        match self {
            Self::Inline(v) => Ok(v.clone()),
            Self::Sidecar { path, len } => {
                let v = read_f64_le(&dir.join(path))?;
                if v.len() != *len {
                    return Err(dims(format!("{path} holds {} values, header says {len}", v.len())));
                }
                Ok(v)
            }
        }
    }
}

pub fn write_f64_le(path: &Path, v: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f64_le(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(dims(format!("{} is not a whole number of f64 values", path.display())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

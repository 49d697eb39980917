//! On-disk feature cache: `LFCC0001`, u32 frames, u32 dim, then row-major
//! little-endian f32 values.

use std::fs;
use std::path::Path;

use crate::error::{DspError, Result};
use crate::features::{FeatureMatrix, FEATURE_DIM};

const MAGIC: &[u8; 8] = b"LFCC0001";

pub fn encode(f: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * f.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(f.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    for v in f.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let bad = |msg: String| DspError::Cache {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing LFCC0001 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (frames, dim) = (word(8), word(12));
    if dim != FEATURE_DIM {
        return Err(bad(format!("dim {dim}, expected {FEATURE_DIM}")));
    }
    let body = &bytes[16..];
    if body.len() != frames * dim * 4 {
        return Err(bad(format!("{} payload bytes for {frames} frames", body.len())));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    FeatureMatrix::new(data, frames).map_err(|e| bad(e.to_string()))
}

pub fn write_cache(path: impl AsRef<Path>, f: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(f)).map_err(|source| DspError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DspError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes, path)
}

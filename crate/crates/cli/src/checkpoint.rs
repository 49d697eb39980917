//! `HMCF` checkpoints.
//!
//! Layout, all integers little-endian u32:
//! magic `HMCF`, version, config length + UTF-8 config, tensor count, then
//! per tensor name length + UTF-8 name, rank, extents and f32 data. A CRC-32
//! of every preceding byte closes the file.

use std::fs;
use std::path::Path;

use hmc_tensor::ParamStore;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"HMCF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Resolved configuration as TOML.
    pub config: String,
    pub tensors: Vec<StoredTensor>,
}

/// Why a byte buffer is not a readable checkpoint.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("not an HMCF file")]
    Magic,
    #[error("format version {found}, this build reads version {VERSION}")]
    Version { found: u32 },
    #[error("truncated at byte {0}")]
    Truncated(usize),
    #[error("CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    Crc { stored: u32, computed: u32 },
    #[error("{0} is not valid UTF-8")]
    Utf8(&'static str),
    #[error("{0} trailing bytes before the CRC")]
    Trailing(usize),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(FormatError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self, what: &'static str) -> std::result::Result<String, FormatError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| FormatError::Utf8(what))
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

impl Checkpoint {
    /// Every entry of `store`, trainable or not, in store order.
    pub fn from_store(config: String, store: &ParamStore) -> Self {
        Checkpoint {
            config,
            tensors: store
                .iter()
                .map(|p| StoredTensor {
                    name: p.name.clone(),
                    shape: p.tensor.shape().to_vec(),
                    data: p.tensor.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION as usize);
        put_u32(&mut out, self.config.len());
        out.extend_from_slice(self.config.as_bytes());
        put_u32(&mut out, self.tensors.len());
        for t in &self.tensors {
            put_u32(&mut out, t.name.len());
            out.extend_from_slice(t.name.as_bytes());
            put_u32(&mut out, t.shape.len());
            for &e in &t.shape {
                put_u32(&mut out, e);
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(FormatError::Magic);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(FormatError::Version { found: version });
        }
        if bytes.len() < 12 {
            return Err(FormatError::Truncated(bytes.len()));
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(FormatError::Crc { stored, computed });
        }
        let mut r = Reader { bytes: payload, pos: 8 };
        let config = r.string("config")?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name = r.string("tensor name")?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u32().map(|e| e as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or(FormatError::Truncated(r.pos))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(StoredTensor { name, shape, data });
        }
        if r.pos != payload.len() {
            return Err(FormatError::Trailing(payload.len() - r.pos));
        }
        Ok(Checkpoint { config, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Checkpoint::decode(&bytes).map_err(|e| CliError::Checkpoint {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    /// Copies every stored tensor into `store`. The two name sets and all
    /// shapes must match exactly.
    pub fn restore(&self, store: &mut ParamStore) -> std::result::Result<(), String> {
        if self.tensors.len() != store.len() {
            return Err(format!(
                "{} tensors stored, model has {}",
                self.tensors.len(),
                store.len()
            ));
        }
        for t in &self.tensors {
            let id = store.id_of(&t.name).ok_or_else(|| format!("model has no tensor {}", t.name))?;
            let want = store.get(id).shape();
            if want != t.shape.as_slice() {
                return Err(format!("{}: stored shape {:?}, model shape {:?}", t.name, t.shape, want));
            }
            store.set_data(id, t.data.clone()).map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

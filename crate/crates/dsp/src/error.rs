use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("ingest error: {field}: {msg}")]
    Ingest { field: &'static str, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("feature cache {path}: {msg}")]
    Cache { path: PathBuf, msg: String },
}

impl DspError {
    pub(crate) fn ingest(field: &'static str, msg: impl Into<String>) -> Self {
        DspError::Ingest {
            field,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DspError>;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("need both classes: {bonafide} bona-fide and {spoof} spoof records")]
    SingleClass { bonafide: usize, spoof: usize },
    #[error("record {index} has no label")]
    Unlabeled { index: usize },
    #[error("invalid record: {0}")]
    Record(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

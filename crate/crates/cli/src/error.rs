use std::io;
use std::path::{Path, PathBuf};

use hmc_dsp::DspError;
use hmc_metrics::MetricsError;
use hmc_model::ModelError;
use hmc_synth::SynthError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: no such file")]
    MissingFile { path: PathBuf },
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Dsp(DspError),
    #[error(transparent)]
    Synth(SynthError),
    #[error(transparent)]
    Metrics(MetricsError),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for a missing input, 3 for a bad config, 4 for an unreadable
    /// checkpoint, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingFile { .. } => 2,
            CliError::Config(_) => 3,
            CliError::Checkpoint { .. } => 4,
            _ => 1,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            CliError::MissingFile { path: path.to_path_buf() }
        } else {
            CliError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(m) => CliError::Config(m),
            e => CliError::Model(e),
        }
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        match e {
            DspError::Io { path, source } => CliError::io(&path, source),
            e => CliError::Dsp(e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { path, source } => CliError::io(&path, source),
            SynthError::Audio(e) => e.into(),
            SynthError::Config(m) => CliError::Config(m),
            e => CliError::Synth(e),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io { path, source } => CliError::io(&path, source),
            e => CliError::Metrics(e),
        }
    }
}

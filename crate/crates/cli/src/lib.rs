//! Operator commands for HM-Conformer: synthetic corpus generation,
//! training, evaluation and scoring, with TOML configs and `HMCF`
//! checkpoints.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
mod error;

pub use checkpoint::{Checkpoint, FormatError, StoredTensor, MAGIC, VERSION};
pub use commands::{
    cmd_eval, cmd_gen, cmd_score, cmd_train, score_dataset, EvalReport, LoadedModel, ScoreInput, System,
    TrainSummary, BEST_CHECKPOINT, DEV_LOG, LAST_CHECKPOINT,
};
pub use config::{apply_override, AugmentConfig, Config, DataConfig, IoConfig, TrainConfig};
pub use data::{BatchBuilder, Dataset, Sampler};
pub use error::{CliError, Result};

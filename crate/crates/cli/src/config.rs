//! Run configuration: a TOML tree in which every key has a default and
//! unknown keys are errors.

use std::fs;
use std::path::{Path, PathBuf};

use hmc_dsp::{AugmentPolicy, MAX_MASKED_BINS};
use hmc_model::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub io: IoConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_manifest: Option<PathBuf>,
    pub dev_manifest: Option<PathBuf>,
    pub eval_manifest: Option<PathBuf>,
    /// Threads for feature extraction and augmentation; 0 uses every core.
    pub workers: usize,
    pub augment: AugmentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub noise_prob: f32,
    pub snr_db: [f32; 2],
    pub speed_prob: f32,
    pub speed_factors: [f32; 2],
    pub max_masked_bins: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let p = AugmentPolicy::default();
        AugmentConfig {
            enabled: p.enabled,
            noise_prob: p.noise_prob,
            snr_db: [p.snr_db.0, p.snr_db.1],
            speed_prob: p.speed_prob,
            speed_factors: [p.speed_factors.0, p.speed_factors.1],
            max_masked_bins: p.max_masked_bins,
        }
    }
}

impl AugmentConfig {
    pub fn policy(&self) -> AugmentPolicy {
        AugmentPolicy {
            enabled: self.enabled,
            noise_prob: self.noise_prob,
            snr_db: (self.snr_db[0], self.snr_db[1]),
            speed_prob: self.speed_prob,
            speed_factors: (self.speed_factors[0], self.speed_factors[1]),
            max_masked_bins: self.max_masked_bins,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [("noise_prob", self.noise_prob), ("speed_prob", self.speed_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Config(format!("data.augment.{name} = {p} outside [0, 1]")));
            }
        }
        if !(self.snr_db[0] <= self.snr_db[1]) {
            return Err(CliError::Config(format!("data.augment.snr_db {:?} is not an interval", self.snr_db)));
        }
        if self.speed_factors.iter().any(|&f| !(f > 0.0)) {
            return Err(CliError::Config(format!(
                "data.augment.speed_factors {:?} must be positive",
                self.speed_factors
            )));
        }
        if self.max_masked_bins > MAX_MASKED_BINS {
            return Err(CliError::Config(format!(
                "data.augment.max_masked_bins = {} exceeds {MAX_MASKED_BINS}",
                self.max_masked_bins
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub lr: f32,
    pub seed: u64,
    /// Steps between periodic checkpoints and dev evaluations.
    pub checkpoint_every: usize,
    pub eval_batch_size: usize,
    /// Steps between progress lines on stderr; 0 is silent.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            steps: 2000,
            lr: 1e-4,
            seed: 0,
            checkpoint_every: 500,
            eval_batch_size: 32,
            log_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub checkpoint_dir: PathBuf,
    /// Defaults to `loss.tsv` in the checkpoint directory.
    pub loss_log: Option<PathBuf>,
    /// Score files and reports; defaults to the checkpoint directory.
    pub report_dir: Option<PathBuf>,
    /// Directory of per-utterance feature files reused across runs.
    pub feature_cache: Option<PathBuf>,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            checkpoint_dir: PathBuf::from("runs/desk"),
            loss_log: None,
            report_dir: None,
            feature_cache: None,
        }
    }
}

impl IoConfig {
    pub fn loss_log_path(&self) -> PathBuf {
        self.loss_log.clone().unwrap_or_else(|| self.checkpoint_dir.join("loss.tsv"))
    }

    pub fn report_dir_path(&self) -> PathBuf {
        self.report_dir.clone().unwrap_or_else(|| self.checkpoint_dir.clone())
    }
}

impl Config {
    /// Reads `path` (if given), applies `key.path=value` overrides and
    /// validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Config::from_table(table)
    }

    pub fn from_toml_str(text: &str) -> Result<Config> {
        let table = text.parse::<toml::Table>().map_err(|e| CliError::Config(e.to_string()))?;
        Config::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Config> {
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.data.augment.validate()?;
        let t = &self.train;
        if t.batch_size < 2 || t.eval_batch_size == 0 {
            return Err(CliError::Config(format!(
                "train.batch_size = {} must be at least 2 and eval_batch_size positive",
                t.batch_size
            )));
        }
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(CliError::Config(format!("train.lr = {} must be positive", t.lr)));
        }
        if t.checkpoint_every == 0 {
            return Err(CliError::Config("train.checkpoint_every must be positive".into()));
        }
        Ok(())
    }

    /// The resolved configuration as TOML, echoed into checkpoints and
    /// reports.
    pub fn to_toml(&self) -> String {
        let mut value = toml::Value::try_from(self).expect("config serialises");
        shortest_floats(&mut value);
        toml::to_string(&value).expect("config serialises")
    }
}

/// Every float in the config is an `f32`; print it as one (`0.1`, not
/// `0.10000000149011612`). Parsing back gives the same `f32`.
fn shortest_floats(v: &mut toml::Value) {
    match v {
        toml::Value::Float(f) => *f = (*f as f32).to_string().parse().expect("f32 display parses"),
        toml::Value::Array(a) => a.iter_mut().for_each(shortest_floats),
        toml::Value::Table(t) => t.iter_mut().for_each(|(_, v)| shortest_floats(v)),
        _ => {}
    }
}

/// Sets `a.b.c=value` in `table`. The value is parsed as a TOML value and
/// falls back to a bare string, so `model.pooling.kind=top_k` and
/// `train.lr=1e-3` both work.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} is malformed")));
    }
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for k in parents {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {k} is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

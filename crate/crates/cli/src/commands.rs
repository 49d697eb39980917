//! The four operator commands as library functions; `main` only parses
//! flags and prints.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use hmc_dsp::{read_wav, Lfcc};
use hmc_metrics::{eer, render_kv, render_table, write_scores, EvalSummary, Label, ScoreRecord};
use hmc_model::{HmConformer, StepMetrics, Trainer};
use hmc_synth::{build_corpus, read_manifest, Corpus, SynthSpec};
use hmc_tensor::ParamStore;

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::data::{default_lfcc, eval_batch, stack, thread_pool, BatchBuilder, Dataset, Sampler};
use crate::error::{CliError, Result};

pub const BEST_CHECKPOINT: &str = "best.hmcf";
pub const LAST_CHECKPOINT: &str = "last.hmcf";
pub const DEV_LOG: &str = "dev_eer.tsv";

pub fn step_checkpoint_name(step: usize) -> String {
    format!("step_{step:06}.hmcf")
}

pub fn cmd_gen(spec: &SynthSpec, out_dir: &Path) -> Result<Corpus> {
    Ok(build_corpus(spec, out_dir)?)
}

/// A model rebuilt from a checkpoint, with the configuration it was
/// trained under.
pub struct LoadedModel {
    pub config: Config,
    pub model: HmConformer,
    pub store: ParamStore,
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        let bad = |msg: String| CliError::Checkpoint {
            path: path.to_path_buf(),
            msg,
        };
        let config = Config::from_toml_str(&ck.config).map_err(|e| bad(format!("stored config: {e}")))?;
        let (model, mut store) = HmConformer::init(config.model.clone(), config.train.seed)
            .map_err(|e| bad(format!("stored config: {e}")))?;
        ck.restore(&mut store).map_err(bad)?;
        Ok(LoadedModel { config, model, store })
    }

    pub fn score(&self, ds: &Dataset, batch: usize) -> Result<Vec<f32>> {
        score_dataset(&self.model, &self.store, ds, batch)
    }
}

/// Eval-mode decision scores for every utterance, in dataset order.
pub fn score_dataset(model: &HmConformer, store: &ParamStore, ds: &Dataset, batch: usize) -> Result<Vec<f32>> {
    let frames = model.config().conformer.input_frames;
    let mut out = Vec::with_capacity(ds.len());
    for start in (0..ds.len()).step_by(batch) {
        let x = eval_batch(ds, start..(start + batch).min(ds.len()), frames)?;
        out.extend(model.score(store, &x)?);
    }
    Ok(out)
}

fn labeled_records(ds: &Dataset, scores: &[f32]) -> Result<Vec<ScoreRecord>> {
    ds.entries
        .iter()
        .zip(scores)
        .map(|(e, &s)| Ok(ScoreRecord::labeled(e.utt_id.clone(), s, e.label)?))
        .collect()
}

fn summarize(system: &str, records: &[ScoreRecord]) -> Result<EvalSummary> {
    let e = eer(records)?;
    let count = |l: Label| records.iter().filter(|r| r.label == Some(l)).count();
    Ok(EvalSummary {
        system: system.to_string(),
        eer: e.eer,
        threshold: e.threshold,
        n_bonafide: count(Label::Bonafide),
        n_spoof: count(Label::Spoof),
    })
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub metrics: Vec<StepMetrics>,
    /// `(step, EER)` at every checkpoint when a dev manifest is configured.
    pub dev_eer: Vec<(usize, f64)>,
    pub checkpoints: Vec<PathBuf>,
    pub loss_log: PathBuf,
}

impl TrainSummary {
    pub fn best_dev(&self) -> Option<(usize, f64)> {
        self.dev_eer
            .iter()
            .copied()
            .fold(None, |best, (s, e)| match best {
                Some((_, b)) if b <= e => best,
                _ => Some((s, e)),
            })
    }
}

/// Trains for `train.steps` steps. Writes the loss log, a checkpoint every
/// `train.checkpoint_every` steps, `best.hmcf` by dev EER when a dev
/// manifest is set, and `last.hmcf` at the end.
pub fn cmd_train(cfg: &Config) -> Result<TrainSummary> {
    let train_manifest = cfg
        .data
        .train_manifest
        .as_deref()
        .ok_or_else(|| CliError::Config("data.train_manifest is not set".into()))?;
    let dir = &cfg.io.checkpoint_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let pool = thread_pool(cfg.data.workers)?;
    let lfcc = default_lfcc();
    let cache = cfg.io.feature_cache.as_deref();
    let train = Dataset::load(train_manifest, cache, &lfcc, &pool)?;
    if train.len() < 2 {
        return Err(CliError::Config("training manifest needs at least two utterances".into()));
    }
    let dev = match &cfg.data.dev_manifest {
        Some(p) => Some(Dataset::load(p, cache, &lfcc, &pool)?),
        None => None,
    };

    let seed = cfg.train.seed;
    let (model, store) = HmConformer::init(cfg.model.clone(), seed)?;
    let mut trainer = Trainer::new(model, store, cfg.train.lr, seed);
    let builder = BatchBuilder {
        ds: &train,
        policy: cfg.data.augment.policy(),
        lfcc: &lfcc,
        frames: cfg.model.conformer.input_frames,
        seed,
        pool: &pool,
    };
    let mut sampler = Sampler::new(seed, train.len());

    let loss_log = cfg.io.loss_log_path();
    let mut log = fs::File::create(&loss_log).map_err(|e| CliError::io(&loss_log, e))?;
    let dev_log_path = dir.join(DEV_LOG);
    let snapshot = cfg.to_toml();
    let mut summary = TrainSummary {
        metrics: Vec::with_capacity(cfg.train.steps),
        dev_eer: Vec::new(),
        checkpoints: Vec::new(),
        loss_log: loss_log.clone(),
    };
    let mut dev_log = String::new();

    for step in 0..cfg.train.steps {
        let (x, labels) = builder.batch(&mut sampler, step, cfg.train.batch_size)?;
        let m = trainer.train_step(&x, &labels)?;
        writeln!(log, "{}", m.log_line()).map_err(|e| CliError::io(&loss_log, e))?;
        if cfg.train.log_every > 0 && (step + 1) % cfg.train.log_every == 0 {
            eprintln!("step {:>6}  loss {:.6}", step + 1, m.total);
        }
        summary.metrics.push(m);

        let done = step + 1;
        if done % cfg.train.checkpoint_every == 0 || done == cfg.train.steps {
            let ck = Checkpoint::from_store(snapshot.clone(), &trainer.store);
            if done % cfg.train.checkpoint_every == 0 {
                let p = dir.join(step_checkpoint_name(done));
                ck.save(&p)?;
                summary.checkpoints.push(p);
            }
            if let Some(dev) = &dev {
                let scores = score_dataset(&trainer.model, &trainer.store, dev, cfg.train.eval_batch_size)?;
                let e = eer(&labeled_records(dev, &scores)?)?.eer;
                let improved = summary.best_dev().is_none_or(|(_, b)| e < b);
                summary.dev_eer.push((done, e));
                dev_log.push_str(&format!("{done}\t{e:.6}\n"));
                fs::write(&dev_log_path, &dev_log).map_err(|err| CliError::io(&dev_log_path, err))?;
                if cfg.train.log_every > 0 {
                    eprintln!("step {done:>6}  dev EER {:.2}%", 100.0 * e);
                }
                if improved {
                    let p = dir.join(BEST_CHECKPOINT);
                    ck.save(&p)?;
                    summary.checkpoints.push(p);
                }
            }
        }
    }
    let p = dir.join(LAST_CHECKPOINT);
    Checkpoint::from_store(snapshot, &trainer.store).save(&p)?;
    summary.checkpoints.push(p);
    Ok(summary)
}

/// One system to evaluate: a display name and its checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub name: String,
    pub checkpoint: PathBuf,
}

impl System {
    /// `name=path`, or a bare path named after its file stem.
    pub fn parse(spec: &str) -> Self {
        match spec.split_once('=') {
            Some((name, path)) if !name.is_empty() => System {
                name: name.to_string(),
                checkpoint: PathBuf::from(path),
            },
            _ => {
                let checkpoint = PathBuf::from(spec);
                let name = checkpoint
                    .file_stem()
                    .map_or_else(|| "system".to_string(), |s| s.to_string_lossy().into_owned());
                System { name, checkpoint }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub summaries: Vec<EvalSummary>,
    pub records: Vec<Vec<ScoreRecord>>,
    pub table: String,
    pub report_dir: PathBuf,
}

/// Flattens a TOML tree into sorted `a.b.c` / value pairs.
pub fn flatten_toml(text: &str) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
        match v {
            toml::Value::Table(t) => {
                for (k, v) in t {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, out);
                }
            }
            v => out.push((prefix.to_string(), v.to_string())),
        }
    }
    let mut out = Vec::new();
    if let Ok(t) = text.parse::<toml::Table>() {
        walk("", &toml::Value::Table(t), &mut out);
    }
    out
}

/// Scores `manifest` with every system and writes `<system>.scores`,
/// `report.txt` (table plus the resolved configs) and `report.kv` to the
/// report directory.
pub fn cmd_eval(cfg: &Config, systems: &[System], manifest: &Path) -> Result<EvalReport> {
    if systems.is_empty() {
        return Err(CliError::Config("no checkpoint to evaluate".into()));
    }
    let pool = thread_pool(cfg.data.workers)?;
    let ds = Dataset::load(manifest, cfg.io.feature_cache.as_deref(), &default_lfcc(), &pool)?;
    let report_dir = cfg.io.report_dir_path();
    fs::create_dir_all(&report_dir).map_err(|e| CliError::io(&report_dir, e))?;

    let mut summaries = Vec::new();
    let mut all_records = Vec::new();
    let mut kv_config: Vec<(String, String)> = flatten_toml(&cfg.to_toml());
    let mut echo = format!("# evaluation config\n{}", cfg.to_toml());
    for sys in systems {
        let loaded = LoadedModel::load(&sys.checkpoint)?;
        let scores = loaded.score(&ds, cfg.train.eval_batch_size)?;
        let records = labeled_records(&ds, &scores)?;
        write_scores(report_dir.join(format!("{}.scores", sys.name)), &records)?;
        summaries.push(summarize(&sys.name, &records)?);
        let stored = loaded.config.to_toml();
        kv_config.extend(
            flatten_toml(&stored)
                .into_iter()
                .map(|(k, v)| (format!("{}.{k}", sys.name), v)),
        );
        echo.push_str(&format!("\n# {} ({})\n{stored}", sys.name, sys.checkpoint.display()));
        all_records.push(records);
    }
    let table = render_table(&summaries);
    let txt = report_dir.join("report.txt");
    fs::write(&txt, format!("{table}\n{echo}")).map_err(|e| CliError::io(&txt, e))?;
    let kv = report_dir.join("report.kv");
    fs::write(&kv, render_kv(&summaries, &kv_config)).map_err(|e| CliError::io(&kv, e))?;
    Ok(EvalReport {
        summaries,
        records: all_records,
        table,
        report_dir,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreInput {
    Wav(PathBuf),
    Manifest(PathBuf),
}

/// Unlabeled scores for one WAV (named by its file stem) or every
/// manifest entry.
pub fn cmd_score(checkpoint: &Path, input: &ScoreInput) -> Result<Vec<ScoreRecord>> {
    let loaded = LoadedModel::load(checkpoint)?;
    let cfg = &loaded.config;
    let lfcc: Lfcc = default_lfcc();
    let pool = thread_pool(cfg.data.workers)?;
    let frames = cfg.model.conformer.input_frames;
    match input {
        ScoreInput::Wav(path) => {
            let f = lfcc.compute(&read_wav(path)?)?;
            let x = stack(&[f.crop_or_pad::<hmc_tensor::rng::Rng>(frames, None)], frames)?;
            let score = loaded.model.score(&loaded.store, &x)?[0];
            let id = path
                .file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
            Ok(vec![ScoreRecord::new(id, score, None)?])
        }
        ScoreInput::Manifest(path) => {
            let entries = read_manifest(path)?;
            let ds = Dataset::from_entries(entries, None, &lfcc, &pool)?;
            let scores = loaded.score(&ds, cfg.train.eval_batch_size)?;
            ds.entries
                .iter()
                .zip(scores)
                .map(|(e, s)| Ok(ScoreRecord::new(e.utt_id.clone(), s, None)?))
                .collect()
        }
    }
}

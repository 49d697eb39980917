use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hmc_cli::{cmd_eval, cmd_gen, cmd_score, cmd_train, CliError, Config, ScoreInput, System};
use hmc_metrics::format_score_line;
use hmc_synth::{Artifact, SynthSpec, Split};

/// HM-Conformer audio deepfake detection.
#[derive(Parser)]
#[command(name = "hmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bona-fide/spoof corpus with manifests.
    Gen(GenArgs),
    /// Train a model; writes checkpoints and the loss log.
    Train(TrainArgs),
    /// Score a labelled manifest with one or more checkpoints and report EER.
    Eval(EvalArgs),
    /// Print "utt score" lines for a WAV file or a manifest.
    Score(ScoreArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Corpus spec TOML (n_utts, duration_s, seed, spoof_artifacts).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_utts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration: Option<f32>,
    /// Comma-separated subset of over_smooth, buzz, seam.
    #[arg(long, value_delimiter = ',')]
    artifacts: Option<Vec<Artifact>>,
}

/// Config file plus overrides shared by train and eval.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set model.pooling.kind=top_k`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(v) = self.seed {
            o.push(format!("train.seed={v}"));
        }
        if let Some(v) = &self.checkpoint_dir {
            o.push(format!("io.checkpoint_dir={}", toml_str(v)));
        }
        if let Some(v) = self.workers {
            o.push(format!("data.workers={v}"));
        }
        o
    }
}

fn toml_str(p: &std::path::Path) -> String {
    toml::Value::String(p.display().to_string()).to_string()
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    train_manifest: Option<PathBuf>,
    #[arg(long)]
    dev_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Checkpoint to evaluate, as `PATH` or `NAME=PATH`; repeat to compare.
    #[arg(long, required = true)]
    ckpt: Vec<String>,
    /// Labelled manifest; defaults to data.eval_manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "input")]
struct ScoreTarget {
    #[arg(long)]
    wav: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    target: ScoreTarget,
}

fn run(cli: Cli) -> hmc_cli::Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let mut spec = match &a.spec {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                    toml::from_str::<SynthSpec>(&text)
                        .map_err(|e| CliError::Config(format!("{}: {}", p.display(), e.message())))?
                }
                None => SynthSpec::default(),
            };
            if let Some(v) = a.n_utts {
                spec.n_utts = v;
            }
            if let Some(v) = a.seed {
                spec.seed = v;
            }
            if let Some(v) = a.duration {
                spec.duration_s = v;
            }
            if let Some(v) = a.artifacts {
                spec.spoof_artifacts = v;
            }
            let corpus = cmd_gen(&spec, &a.out)?;
            println!("{}", corpus.manifest_path(None).display());
            for s in Split::ALL {
                println!("{}\t{}", corpus.manifest_path(Some(s)).display(), corpus.split(s).len());
            }
        }
        Command::Train(a) => {
            let mut o = a.common.overrides();
            if let Some(v) = a.steps {
                o.push(format!("train.steps={v}"));
            }
            if let Some(v) = a.batch_size {
                o.push(format!("train.batch_size={v}"));
            }
            if let Some(v) = a.lr {
                o.push(format!("train.lr={v:e}"));
            }
            if let Some(v) = &a.train_manifest {
                o.push(format!("data.train_manifest={}", toml_str(v)));
            }
            if let Some(v) = &a.dev_manifest {
                o.push(format!("data.dev_manifest={}", toml_str(v)));
            }
            let cfg = Config::load(a.common.config.as_deref(), &o)?;
            let summary = cmd_train(&cfg)?;
            if let Some(m) = summary.metrics.last() {
                println!("final loss {:.6} after {} steps", m.total, summary.metrics.len());
            }
            if let Some((step, e)) = summary.best_dev() {
                println!("best dev EER {:.2}% at step {step}", 100.0 * e);
            }
            println!("loss log {}", summary.loss_log.display());
            for p in &summary.checkpoints {
                println!("checkpoint {}", p.display());
            }
        }
        Command::Eval(a) => {
            let mut o = a.common.overrides();
            if let Some(v) = &a.report_dir {
                o.push(format!("io.report_dir={}", toml_str(v)));
            }
            let cfg = Config::load(a.common.config.as_deref(), &o)?;
            let manifest = a
                .manifest
                .or_else(|| cfg.data.eval_manifest.clone())
                .ok_or_else(|| CliError::Config("no --manifest and data.eval_manifest is not set".into()))?;
            let systems: Vec<System> = a.ckpt.iter().map(|s| System::parse(s)).collect();
            let report = cmd_eval(&cfg, &systems, &manifest)?;
            print!("{}", report.table);
            for s in &report.summaries {
                println!("{} EER: {:.2}%", s.system, 100.0 * s.eer);
            }
        }
        Command::Score(a) => {
            let input = match (a.target.wav, a.target.manifest) {
                (Some(w), _) => ScoreInput::Wav(w),
                (None, Some(m)) => ScoreInput::Manifest(m),
                (None, None) => unreachable!("clap requires one input"),
            };
            for r in cmd_score(&a.ckpt, &input)? {
                println!("{}", format_score_line(&r));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Unknown or malformed flags count as configuration errors.
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

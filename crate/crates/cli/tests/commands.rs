//! Commands end to end on a small corpus: files written, determinism,
//! batch assembly and exit codes of the binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use hmc_cli::data::{default_lfcc, thread_pool, BatchBuilder, Dataset, Sampler};
use hmc_cli::{
    cmd_eval, cmd_gen, cmd_score, cmd_train, Checkpoint, Config, ScoreInput, System, BEST_CHECKPOINT, DEV_LOG,
    LAST_CHECKPOINT,
};
use hmc_metrics::read_scores;
use hmc_synth::{Split, SynthSpec};

fn corpus(dir: &Path) -> hmc_synth::Corpus {
    cmd_gen(
        &SynthSpec {
            n_utts: 20,
            duration_s: 1.5,
            seed: 4,
            ..SynthSpec::default()
        },
        &dir.join("corpus"),
    )
    .unwrap()
}

fn tiny(dir: &Path, corpus: &hmc_synth::Corpus, tag: &str) -> Config {
    let mut cfg = Config::default();
    cfg.model.conformer.d = 8;
    cfg.model.conformer.heads = 2;
    cfg.model.conformer.n_blocks = 3;
    cfg.data.train_manifest = Some(corpus.manifest_path(Some(Split::Train)));
    cfg.data.dev_manifest = Some(corpus.manifest_path(Some(Split::Dev)));
    cfg.train.batch_size = 4;
    cfg.train.steps = 6;
    cfg.train.checkpoint_every = 2;
    cfg.train.log_every = 0;
    cfg.train.lr = 1e-3;
    cfg.io.checkpoint_dir = dir.join(tag);
    cfg
}

#[test]
fn train_writes_log_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let cfg = tiny(dir.path(), &c, "run");
    let s = cmd_train(&cfg).unwrap();
    let log = fs::read_to_string(cfg.io.checkpoint_dir.join("loss.tsv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 6);
    for (i, l) in lines.iter().enumerate() {
        let f: Vec<&str> = l.split('\t').collect();
        assert_eq!(f.len(), 7, "{l}");
        assert_eq!(f[0], i.to_string());
        assert!(f[1..].iter().all(|v| v.parse::<f32>().is_ok()));
    }
    for n in ["step_000002.hmcf", "step_000004.hmcf", "step_000006.hmcf", BEST_CHECKPOINT, LAST_CHECKPOINT] {
        assert!(cfg.io.checkpoint_dir.join(n).exists(), "{n}");
    }
    assert_eq!(s.dev_eer.iter().map(|d| d.0).collect::<Vec<_>>(), vec![2, 4, 6]);
    let dev_log = fs::read_to_string(cfg.io.checkpoint_dir.join(DEV_LOG)).unwrap();
    assert_eq!(dev_log.lines().count(), 3);

    let stored = Checkpoint::load(&cfg.io.checkpoint_dir.join(LAST_CHECKPOINT)).unwrap();
    assert_eq!(Config::from_toml_str(&stored.config).unwrap(), cfg);
}

#[test]
fn best_checkpoint_holds_the_lowest_dev_eer() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let mut cfg = tiny(dir.path(), &c, "run");
    cfg.train.steps = 8;
    let s = cmd_train(&cfg).unwrap();
    let (best_step, best) = s.best_dev().unwrap();
    assert!(s.dev_eer.iter().all(|&(_, e)| e >= best));
    let from_best = Checkpoint::load(&cfg.io.checkpoint_dir.join(BEST_CHECKPOINT)).unwrap();
    let from_step = Checkpoint::load(&cfg.io.checkpoint_dir.join(format!("step_{best_step:06}.hmcf"))).unwrap();
    assert_eq!(from_best, from_step);
}

#[test]
fn loss_log_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let mut logs = Vec::new();
    for (tag, workers) in [("w1", 1), ("w4", 4), ("w1b", 1)] {
        let mut cfg = tiny(dir.path(), &c, tag);
        cfg.data.workers = workers;
        cfg.data.augment.noise_prob = 1.0;
        cfg.data.dev_manifest = None;
        let s = cmd_train(&cfg).unwrap();
        logs.push(fs::read(s.loss_log).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
    assert_eq!(logs[0], logs[2]);
}

#[test]
fn batches_are_assembled_by_index() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let lfcc = default_lfcc();
    let policy = Config::default().data.augment.policy();
    let build = |workers: usize| {
        let pool = thread_pool(workers).unwrap();
        let ds = Dataset::load(&c.manifest_path(Some(Split::Train)), None, &lfcc, &pool).unwrap();
        let b = BatchBuilder {
            ds: &ds,
            policy: policy.clone(),
            lfcc: &lfcc,
            frames: 400,
            seed: 9,
            pool: &pool,
        };
        let mut sampler = Sampler::new(9, ds.len());
        (0..5)
            .map(|s| {
                let (x, y) = b.batch(&mut sampler, s, 6).unwrap();
                (x.data().to_vec(), y)
            })
            .collect::<Vec<_>>()
    };
    let one = build(1);
    assert_eq!(one, build(3));
    // Every utterance appears once per pass over the 14 training files.
    let mut sampler = Sampler::new(9, 14);
    let mut first: Vec<usize> = (0..14).map(|k| sampler.index(k)).collect();
    first.sort_unstable();
    assert_eq!(first, (0..14).collect::<Vec<_>>());
}

#[test]
fn feature_cache_gives_identical_training() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let plain = cmd_train(&tiny(dir.path(), &c, "plain")).unwrap();
    let mut cached = tiny(dir.path(), &c, "cached");
    cached.io.feature_cache = Some(dir.path().join("cache"));
    let first = cmd_train(&cached).unwrap();
    assert!(dir.path().join("cache").read_dir().unwrap().count() > 0);
    let second = cmd_train(&cached).unwrap();
    assert_eq!(plain.metrics, first.metrics);
    assert_eq!(first.metrics, second.metrics);
}

#[test]
fn eval_reports_and_scores_match_score_command() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let cfg = tiny(dir.path(), &c, "run");
    cmd_train(&cfg).unwrap();
    let ckpt = cfg.io.checkpoint_dir.join(LAST_CHECKPOINT);
    let manifest = c.manifest_path(Some(Split::Eval));
    let mut eval_cfg = cfg.clone();
    eval_cfg.io.report_dir = Some(dir.path().join("report"));
    let report = cmd_eval(
        &eval_cfg,
        &[System::parse(&format!("tiny={}", ckpt.display()))],
        &manifest,
    )
    .unwrap();
    let s = &report.summaries[0];
    assert_eq!(s.system, "tiny");
    assert_eq!(s.n_bonafide + s.n_spoof, c.eval.len());
    let report_dir = dir.path().join("report");
    let kv = fs::read_to_string(report_dir.join("report.kv")).unwrap();
    assert!(kv.contains(&format!("tiny.eer_percent={:.2}", 100.0 * s.eer)));
    assert!(kv.contains("config.train.steps=6"));
    assert!(kv.contains("config.tiny.model.conformer.d=8"));
    let txt = fs::read_to_string(report_dir.join("report.txt")).unwrap();
    assert!(txt.starts_with("system"));
    assert!(txt.contains("[model.conformer]"));

    let written = read_scores(report_dir.join("tiny.scores")).unwrap();
    let scored = cmd_score(&ckpt, &ScoreInput::Manifest(manifest)).unwrap();
    assert_eq!(written.len(), scored.len());
    for ((w, s), r) in written.iter().zip(&scored).zip(&report.records[0]) {
        assert_eq!(w.utt_id, s.utt_id);
        assert_eq!(s.score.to_bits(), r.score.to_bits());
        assert!((w.score - s.score).abs() <= 5e-7);
        assert!(s.label.is_none());
    }
}

#[test]
fn system_names() {
    assert_eq!(System::parse("runs/a/best.hmcf").name, "best");
    let s = System::parse("hm=runs/a/best.hmcf");
    assert_eq!((s.name.as_str(), s.checkpoint.to_str().unwrap()), ("hm", "runs/a/best.hmcf"));
}

fn hmc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hmc")).args(args).output().unwrap()
}

#[test]
fn binary_score_one_wav_prints_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let cfg = tiny(dir.path(), &c, "run");
    cmd_train(&cfg).unwrap();
    let ckpt = cfg.io.checkpoint_dir.join(LAST_CHECKPOINT);
    let wav = c.root.join(&c.eval[0].path);
    let out = hmc(&["score", "--ckpt", ckpt.to_str().unwrap(), "--wav", wav.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let fields: Vec<&str> = lines[0].split(' ').collect();
    assert_eq!(fields[0], c.eval[0].utt_id);
    assert!(fields[1].parse::<f32>().is_ok());
}

#[test]
fn binary_eval_prints_eer_with_two_decimals() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let cfg = tiny(dir.path(), &c, "run");
    cmd_train(&cfg).unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, cfg.to_toml()).unwrap();
    let ckpt = cfg.io.checkpoint_dir.join(LAST_CHECKPOINT);
    let out = hmc(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--manifest",
        c.manifest_path(Some(Split::Eval)).to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("last EER: ")).unwrap();
    let pct = line.trim_start_matches("last EER: ").trim_end_matches('%');
    assert_eq!(pct.split('.').nth(1).map(str::len), Some(2), "{line}");
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = hmc(&["train", "--config", "/nonexistent/c.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());

    let typo = dir.path().join("typo.toml");
    fs::write(&typo, "[train]\nstpes = 3\n").unwrap();
    let out = hmc(&["train", "--config", typo.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stpes"));

    let old = dir.path().join("old.hmcf");
    let mut bytes = Checkpoint {
        config: String::new(),
        tensors: Vec::new(),
    }
    .encode();
    bytes[4] = 0;
    fs::write(&old, bytes).unwrap();
    let out = hmc(&["score", "--ckpt", old.to_str().unwrap(), "--wav", "x.wav"]);
    assert_eq!(out.status.code(), Some(4));

    let out = hmc(&["score", "--ckpt", dir.path().join("none.hmcf").to_str().unwrap(), "--wav", "x.wav"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(hmc(&["train", "--stepz", "3"]).status.code(), Some(3));
}

#[test]
fn binary_gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "n_utts = 6\nduration_s = 1.0\nseed = 2\n").unwrap();
    for out in ["a", "b"] {
        let o = hmc(&["gen", "--spec", spec.to_str().unwrap(), "--out", dir.path().join(out).to_str().unwrap()]);
        assert!(o.status.success());
    }
    let read = |d: &str| fs::read(dir.path().join(d).join("wav/utt_00003.wav")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_eq!(
        fs::read(dir.path().join("a/manifest.tsv")).unwrap(),
        fs::read(dir.path().join("b/manifest.tsv")).unwrap()
    );
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "n_utt = 6\n").unwrap();
    let o = hmc(&["gen", "--spec", bad.to_str().unwrap(), "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hmc_dsp::write_wav;
use hmc_metrics::Label;
use hmc_tensor::rng;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SynthError};
use crate::voice::{gen_bonafide, gen_spoof, Artifact, DEFAULT_DURATION_S};

/// Manifest listing every utterance; the splits sit next to it.
pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_utts: usize,
    pub duration_s: f32,
    pub seed: u64,
    pub spoof_artifacts: Vec<Artifact>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_utts: 2000,
            duration_s: DEFAULT_DURATION_S,
            seed: 0,
            spoof_artifacts: Artifact::ALL.to_vec(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_utts < 2 || !self.n_utts.is_multiple_of(2) {
            return Err(SynthError::Config(format!("n_utts = {} must be even and at least 2", self.n_utts)));
        }
        if !(self.duration_s >= 0.5) {
            return Err(SynthError::Config(format!("duration_s = {} is below 0.5 s", self.duration_s)));
        }
        if self.spoof_artifacts.is_empty() {
            return Err(SynthError::Config("spoof_artifacts is empty".into()));
        }
        Ok(())
    }

    /// Train, dev and eval sizes: 70 % and 15 % rounded, eval takes the rest.
    pub fn split_sizes(&self) -> [usize; 3] {
        let n = self.n_utts;
        let train = (0.70 * n as f64).round() as usize;
        let dev = ((0.15 * n as f64).round() as usize).min(n - train);
        [train, dev, n - train - dev]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Dev,
    Eval,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Eval];

    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.tsv",
            Split::Dev => "dev.tsv",
            Split::Eval => "eval.tsv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub path: PathBuf,
    pub label: Label,
    pub artifacts: Vec<Artifact>,
}

impl ManifestEntry {
    fn line(&self) -> String {
        let artifacts = if self.artifacts.is_empty() {
            "-".to_string()
        } else {
            self.artifacts.iter().map(|a| a.name()).collect::<Vec<_>>().join(",")
        };
        format!("{}\t{}\t{}\t{}", self.utt_id, self.path.display(), self.label, artifacts)
    }
}

/// Everything [`build_corpus`] wrote; paths are relative to `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub train: Vec<ManifestEntry>,
    pub dev: Vec<ManifestEntry>,
    pub eval: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn split(&self, s: Split) -> &[ManifestEntry] {
        match s {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Eval => &self.eval,
        }
    }

    pub fn manifest_path(&self, s: Option<Split>) -> PathBuf {
        self.root.join(s.map_or(MANIFEST_FILE, Split::file_name))
    }
}

/// Non-empty random subset of `allowed`.
fn draw_artifacts(seed: u64, index: u64, allowed: &[Artifact]) -> Vec<Artifact> {
    let mut r = rng::substream(seed, "artifacts", index);
    let mut chosen: Vec<Artifact> = allowed.iter().copied().filter(|_| r.random::<bool>()).collect();
    if chosen.is_empty() {
        chosen.push(allowed[r.random_range(0..allowed.len())]);
    }
    chosen.sort_unstable();
    chosen.dedup();
    chosen
}

/// Generates the corpus under `out_dir`: WAVs in `wav/`, the full manifest
/// and one manifest per split. The first half of the utterances is
/// bona-fide. Each class is shuffled on its own and the two are interleaved
/// before cutting, so every split is balanced to within one utterance.
pub fn build_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<Corpus> {
    spec.validate()?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    let wav_dir = out_dir.join("wav");
    fs::create_dir_all(&wav_dir).map_err(io(&wav_dir))?;

    let n = spec.n_utts;
    let entries: Vec<ManifestEntry> = (0..n)
        .map(|i| {
            let spoof = i >= n / 2;
            ManifestEntry {
                utt_id: format!("utt_{i:05}"),
                path: PathBuf::from("wav").join(format!("utt_{i:05}.wav")),
                label: if spoof { Label::Spoof } else { Label::Bonafide },
                artifacts: if spoof {
                    draw_artifacts(spec.seed, i as u64, &spec.spoof_artifacts)
                } else {
                    Vec::new()
                },
            }
        })
        .collect();

    entries.par_iter().enumerate().try_for_each(|(i, e)| -> Result<()> {
        let seed = rng::substream(spec.seed, "utterance", i as u64).random::<u64>();
        let wave = match e.label {
            Label::Bonafide => gen_bonafide(seed, spec.duration_s),
            Label::Spoof => gen_spoof(seed, spec.duration_s, &e.artifacts)?,
        };
        write_wav(out_dir.join(&e.path), &wave)?;
        Ok(())
    })?;

    let mut r = rng::stream(spec.seed, "split");
    let (mut bona, mut spoof): (Vec<usize>, Vec<usize>) = ((0..n / 2).collect(), (n / 2..n).collect());
    bona.shuffle(&mut r);
    spoof.shuffle(&mut r);
    let order: Vec<usize> = bona.into_iter().zip(spoof).flat_map(|(b, s)| [b, s]).collect();
    let [train_n, dev_n, _] = spec.split_sizes();
    let pick = |ix: &[usize]| ix.iter().map(|&i| entries[i].clone()).collect::<Vec<_>>();
    let corpus = Corpus {
        root: out_dir.to_path_buf(),
        train: pick(&order[..train_n]),
        dev: pick(&order[train_n..train_n + dev_n]),
        eval: pick(&order[train_n + dev_n..]),
        entries,
    };
    write_manifest(&corpus.manifest_path(None), &corpus.entries)?;
    for s in Split::ALL {
        write_manifest(&corpus.manifest_path(Some(s)), corpus.split(s))?;
    }
    Ok(corpus)
}

/// One `utt_id<TAB>path<TAB>label<TAB>artifacts` line per entry; `-` marks
/// an empty artifact list.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = String::new();
    for e in entries {
        writeln!(text, "{}", e.line()).expect("write to string");
    }
    fs::write(path, text).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a manifest; relative WAV paths are resolved against the
/// manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let err = |line: usize, msg: String| SynthError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, wav, label, artifacts] = fields[..] else {
            return Err(err(i + 1, format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        if id.is_empty() {
            return Err(err(i + 1, "empty utterance id".into()));
        }
        let label: Label = label.parse().map_err(|m| err(i + 1, m))?;
        let artifacts = if artifacts == "-" {
            Vec::new()
        } else {
            artifacts
                .split(',')
                .map(|a| a.parse::<Artifact>().map_err(|m| err(i + 1, m)))
                .collect::<Result<Vec<_>>>()?
        };
        let wav = Path::new(wav);
        out.push(ManifestEntry {
            utt_id: id.to_string(),
            path: if wav.is_relative() { base.join(wav) } else { wav.to_path_buf() },
            label,
            artifacts,
        });
    }
    Ok(out)
}

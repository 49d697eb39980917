//! Manifest-backed datasets and deterministic batch assembly.
//!
//! Example `k` of a run (the k-th example drawn, counted across steps) is
//! always the same utterance with the same augmentation draws, whatever the
//! worker count: the utterance comes from a per-epoch permutation and the
//! draws from a substream keyed by `k`.

use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};

use hmc_dsp::{read_cache, read_wav, write_cache, AugmentPolicy, FeatureMatrix, Lfcc, LfccConfig, FEATURE_DIM};
use hmc_synth::{read_manifest, ManifestEntry};
use hmc_tensor::{rng, Tensor};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{CliError, Result};

pub fn thread_pool(workers: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("data.workers = {workers}: {e}")))
}

/// Manifest entries with their clean, uncropped features.
pub struct Dataset {
    pub entries: Vec<ManifestEntry>,
    pub features: Vec<FeatureMatrix>,
}

impl Dataset {
    pub fn load(manifest: &Path, cache: Option<&Path>, lfcc: &Lfcc, pool: &ThreadPool) -> Result<Self> {
        let entries = read_manifest(manifest)?;
        if entries.is_empty() {
            return Err(CliError::Config(format!("{} lists no utterances", manifest.display())));
        }
        Dataset::from_entries(entries, cache, lfcc, pool)
    }

    pub fn from_entries(
        entries: Vec<ManifestEntry>,
        cache: Option<&Path>,
        lfcc: &Lfcc,
        pool: &ThreadPool,
    ) -> Result<Self> {
        if let Some(dir) = cache {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let features = pool.install(|| {
            entries
                .par_iter()
                .map(|e| features_for(e, cache, lfcc))
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(Dataset { entries, features })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.label.target()).collect()
    }
}

fn cache_path(dir: &Path, utt_id: &str) -> PathBuf {
    dir.join(format!("{utt_id}.lfcc"))
}

fn features_for(e: &ManifestEntry, cache: Option<&Path>, lfcc: &Lfcc) -> Result<FeatureMatrix> {
    if let Some(dir) = cache {
        let p = cache_path(dir, &e.utt_id);
        if p.exists() {
            return Ok(read_cache(&p)?);
        }
        let f = lfcc.compute(&read_wav(&e.path)?)?;
        write_cache(&p, &f)?;
        return Ok(f);
    }
    Ok(lfcc.compute(&read_wav(&e.path)?)?)
}

pub fn default_lfcc() -> Lfcc {
    Lfcc::new(LfccConfig::default()).expect("default LFCC config is valid")
}

/// `[B, frames, FEATURE_DIM]` from equally long feature matrices.
pub fn stack(feats: &[FeatureMatrix], frames: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(feats.len() * frames * FEATURE_DIM);
    for f in feats {
        data.extend_from_slice(f.data());
    }
    Tensor::new(data, &[feats.len(), frames, FEATURE_DIM]).map_err(|e| CliError::Model(e.into()))
}

/// Centre-cropped eval batches over `range` of the dataset.
pub fn eval_batch(ds: &Dataset, range: std::ops::Range<usize>, frames: usize) -> Result<Tensor> {
    let feats: Vec<FeatureMatrix> = ds.features[range]
        .iter()
        .map(|f| f.crop_or_pad::<rng::Rng>(frames, None))
        .collect();
    stack(&feats, frames)
}

/// Maps the running example counter to a dataset index, reshuffling once
/// per pass over the data.
pub struct Sampler {
    seed: u64,
    n: usize,
    epoch: Option<u64>,
    order: Vec<usize>,
}

impl Sampler {
    pub fn new(seed: u64, n: usize) -> Self {
        Sampler {
            seed,
            n,
            epoch: None,
            order: Vec::new(),
        }
    }

    pub fn index(&mut self, k: u64) -> usize {
        let n = self.n as u64;
        let epoch = k / n;
        if self.epoch != Some(epoch) {
            self.order = (0..self.n).collect();
            self.order.shuffle(&mut rng::substream(self.seed, "epoch", epoch));
            self.epoch = Some(epoch);
        }
        self.order[(k % n) as usize]
    }
}

/// Everything needed to turn example counters into training tensors.
pub struct BatchBuilder<'a> {
    pub ds: &'a Dataset,
    pub policy: AugmentPolicy,
    pub lfcc: &'a Lfcc,
    pub frames: usize,
    pub seed: u64,
    pub pool: &'a ThreadPool,
}

impl BatchBuilder<'_> {
    /// One augmented, randomly cropped example.
    pub fn example(&self, index: usize, k: u64) -> Result<FeatureMatrix> {
        let mut r = rng::substream(self.seed, "example", k);
        let clean = &self.ds.features[index];
        let base: Cow<'_, FeatureMatrix> = if self.policy.touches_waveform() {
            let wave = read_wav(&self.ds.entries[index].path)?;
            let augmented = self.policy.apply_waveform(&wave, &mut r);
            if augmented == wave {
                Cow::Borrowed(clean)
            } else {
                Cow::Owned(self.lfcc.compute(&augmented)?)
            }
        } else {
            Cow::Borrowed(clean)
        };
        let mut f = base.crop_or_pad(self.frames, Some(&mut r));
        self.policy.apply_features(&mut f, &mut r);
        Ok(f)
    }

    /// Batch `step` of size `batch`: features `[B, frames, 120]` and targets.
    pub fn batch(&self, sampler: &mut Sampler, step: usize, batch: usize) -> Result<(Tensor, Vec<u8>)> {
        let picks: Vec<(usize, u64)> = (0..batch)
            .map(|j| {
                let k = (step * batch + j) as u64;
                (sampler.index(k), k)
            })
            .collect();
        let feats = self.pool.install(|| {
            picks
                .par_iter()
                .map(|&(i, k)| self.example(i, k))
                .collect::<Result<Vec<_>>>()
        })?;
        let labels = picks.iter().map(|&(i, _)| self.ds.entries[i].label.target()).collect();
        Ok((stack(&feats, self.frames)?, labels))
    }
}

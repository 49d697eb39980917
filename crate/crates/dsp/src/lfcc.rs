//! Linear-frequency cepstral coefficients with regression deltas.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{DspError, Result};
use crate::features::{FeatureMatrix, FEATURE_DIM};
use crate::wav::Waveform;

#[derive(Debug, Clone, PartialEq)]
pub struct LfccConfig {
    pub win_length: usize,
    pub hop_length: usize,
    pub n_fft: usize,
    pub n_filters: usize,
    pub n_ceps: usize,
    pub log_floor: f32,
    pub delta_window: usize,
}

impl Default for LfccConfig {
    fn default() -> Self {
        LfccConfig {
            win_length: 320,
            hop_length: 160,
            n_fft: 512,
            n_filters: 40,
            n_ceps: 40,
            log_floor: 1e-10,
            delta_window: 2,
        }
    }
}

impl LfccConfig {
    pub fn num_frames(&self, samples: usize) -> usize {
        if samples < self.win_length {
            0
        } else {
            1 + (samples - self.win_length) / self.hop_length
        }
    }
}

/// Reusable analysis state: window, filterbank, DCT matrix and FFT plan.
pub struct Lfcc {
    cfg: LfccConfig,
    window: Vec<f32>,
    filters: Vec<Vec<f32>>,
    dct: Vec<f32>,
    fft: Arc<dyn Fft<f32>>,
}

impl Lfcc {
    pub fn new(cfg: LfccConfig) -> Result<Self> {
        if cfg.win_length == 0 || cfg.win_length > cfg.n_fft || cfg.hop_length == 0 {
            return Err(DspError::ingest(
                "lfcc",
                format!("window {} / hop {} / fft {}", cfg.win_length, cfg.hop_length, cfg.n_fft),
            ));
        }
        if 3 * cfg.n_ceps != FEATURE_DIM || cfg.n_ceps > cfg.n_filters {
            return Err(DspError::ingest(
                "lfcc",
                format!("{} cepstra from {} filters", cfg.n_ceps, cfg.n_filters),
            ));
        }
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);
        Ok(Lfcc {
            window: hamming(cfg.win_length),
            filters: linear_filterbank(cfg.n_filters, cfg.n_fft, 16_000.0),
            dct: dct2_orthonormal(cfg.n_filters, cfg.n_ceps),
            fft,
            cfg,
        })
    }

    pub fn config(&self) -> &LfccConfig {
        &self.cfg
    }

    pub fn filters(&self) -> &[Vec<f32>] {
        &self.filters
    }

    /// One-sided power spectrum of each windowed frame.
    pub fn power_spectrogram(&self, samples: &[f32]) -> Vec<Vec<f32>> {
        let cfg = &self.cfg;
        let bins = cfg.n_fft / 2 + 1;
        let mut buf = vec![Complex::new(0.0f32, 0.0); cfg.n_fft];
        (0..cfg.num_frames(samples.len()))
            .map(|t| {
                let frame = &samples[t * cfg.hop_length..t * cfg.hop_length + cfg.win_length];
                buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
                for (i, (&s, &w)) in frame.iter().zip(&self.window).enumerate() {
                    buf[i].re = s * w;
                }
                self.fft.process(&mut buf);
                buf[..bins].iter().map(|c| c.norm_sqr()).collect()
            })
            .collect()
    }

    /// Filterbank energies per frame.
    pub fn filterbank_energies(&self, samples: &[f32]) -> Vec<Vec<f32>> {
        self.power_spectrogram(samples)
            .iter()
            .map(|p| {
                self.filters
                    .iter()
                    .map(|f| f.iter().zip(p).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect()
    }

    /// Static cepstra, `frames × n_ceps` row-major.
    pub fn cepstra(&self, samples: &[f32]) -> Vec<f32> {
        let nf = self.cfg.n_filters;
        let nc = self.cfg.n_ceps;
        let mut out = Vec::new();
        for energies in self.filterbank_energies(samples) {
            let logs: Vec<f32> = energies.iter().map(|&e| e.max(self.cfg.log_floor).ln()).collect();
            for k in 0..nc {
                out.push((0..nf).map(|n| self.dct[k * nf + n] * logs[n]).sum());
            }
        }
        out
    }

    /// Static, delta and delta-delta coefficients side by side per frame.
    pub fn compute(&self, wave: &Waveform) -> Result<FeatureMatrix> {
        let frames = self.cfg.num_frames(wave.len());
        if frames == 0 {
            return Err(DspError::ingest(
                "samples",
                format!("{} samples is shorter than one {}-sample window", wave.len(), self.cfg.win_length),
            ));
        }
        let nc = self.cfg.n_ceps;
        let stat = self.cepstra(&wave.samples);
        let d1 = delta(&stat, nc, self.cfg.delta_window);
        let d2 = delta(&d1, nc, self.cfg.delta_window);
        let mut data = Vec::with_capacity(frames * FEATURE_DIM);
        for t in 0..frames {
            data.extend_from_slice(&stat[t * nc..(t + 1) * nc]);
            data.extend_from_slice(&d1[t * nc..(t + 1) * nc]);
            data.extend_from_slice(&d2[t * nc..(t + 1) * nc]);
        }
        FeatureMatrix::new(data, frames)
    }
}

/// LFCC features with the given configuration.
pub fn lfcc(wave: &Waveform, cfg: &LfccConfig) -> Result<FeatureMatrix> {
    Lfcc::new(cfg.clone())?.compute(wave)
}

/// Symmetric Hamming window.
pub fn hamming(n: usize) -> Vec<f32> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64;
            (0.54 - 0.46 * x.cos()) as f32
        })
        .collect()
}

/// Triangles with edges equally spaced from 0 Hz to Nyquist. Filter `i`
/// rises from edge `i`, peaks at edge `i + 1` and falls to edge `i + 2`.
pub fn linear_filterbank(n_filters: usize, n_fft: usize, sample_rate: f32) -> Vec<Vec<f32>> {
    let bins = n_fft / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| nyquist * i as f64 / (n_filters + 1) as f64)
        .collect();
    (0..n_filters)
        .map(|i| {
            let (lo, mid, hi) = (edges[i], edges[i + 1], edges[i + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / n_fft as f64;
                    let w = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    w as f32
                })
                .collect()
        })
        .collect()
}

/// Row-major `n_out × n_in` orthonormal DCT-II matrix.
pub fn dct2_orthonormal(n_in: usize, n_out: usize) -> Vec<f32> {
    let n = n_in as f64;
    let mut m = Vec::with_capacity(n_in * n_out);
    for k in 0..n_out {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for i in 0..n_in {
            let arg = std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n);
            m.push((scale * arg.cos()) as f32);
        }
    }
    m
}

/// Regression deltas over time for a `frames × cols` row-major matrix,
/// replicating the edge frames.
pub fn delta(x: &[f32], cols: usize, half_window: usize) -> Vec<f32> {
    assert!(cols > 0 && x.len().is_multiple_of(cols), "delta on {} values with {cols} columns", x.len());
    let frames = x.len() / cols;
    let denom: f32 = 2.0 * (1..=half_window).map(|n| (n * n) as f32).sum::<f32>();
    let mut out = vec![0.0; x.len()];
    if denom == 0.0 {
        return out;
    }
    let last = frames as isize - 1;
    let row = |t: isize| t.clamp(0, last) as usize;
    for t in 0..frames as isize {
        for n in 1..=half_window as isize {
            let (a, b) = (row(t + n), row(t - n));
            for c in 0..cols {
                out[t as usize * cols + c] += n as f32 * (x[a * cols + c] - x[b * cols + c]);
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= denom);
    out
}

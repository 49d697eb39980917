//! Training-time augmentation: frequency masking, colored noise and speed
//! perturbation. Every function draws only from the RNG it is handed.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::features::{FeatureMatrix, STREAM_DIM};
use crate::wav::Waveform;

/// Draws `m` uniformly from `0..=max_bins` (clamped to 20 and to the stream
/// width) and masks that many distinct bins in all three streams.
/// Returns the masked bins.
pub fn spec_augment<R: Rng + ?Sized>(
    f: &mut FeatureMatrix,
    max_bins: usize,
    rng: &mut R,
) -> Vec<usize> {
    let max_bins = max_bins.min(MAX_MASKED_BINS);
    let m = rng.random_range(0..=max_bins);
    mask_bins(f, m, rng)
}

/// Upper bound on masked bins per example.
pub const MAX_MASKED_BINS: usize = 20;

/// Masks `m` distinct bins (clamped to [`MAX_MASKED_BINS`]) chosen uniformly.
pub fn mask_bins<R: Rng + ?Sized>(f: &mut FeatureMatrix, m: usize, rng: &mut R) -> Vec<usize> {
    let m = m.min(MAX_MASKED_BINS).min(STREAM_DIM);
    let bins = index::sample(rng, STREAM_DIM, m).into_vec();
    for &b in &bins {
        f.mask_bin(b);
    }
    bins
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseColor {
    White,
    Pink,
    Brown,
}

impl NoiseColor {
    pub const ALL: [NoiseColor; 3] = [NoiseColor::White, NoiseColor::Pink, NoiseColor::Brown];

    /// Amplitude gain at a nonzero frequency index.
    fn gain(self, k: usize) -> f32 {
        match self {
            NoiseColor::White => 1.0,
            NoiseColor::Pink => 1.0 / (k as f32).sqrt(),
            NoiseColor::Brown => 1.0 / k as f32,
        }
    }
}

/// Zero-mean noise of length `n` whose power spectrum falls 0, 3 or 6 dB
/// per octave.
pub fn colored_noise<R: Rng + ?Sized>(n: usize, color: NoiseColor, rng: &mut R) -> Vec<f32> {
    let white: Vec<f32> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    if color == NoiseColor::White || n < 2 {
        return white;
    }
    let mut planner = FftPlanner::<f32>::new();
    let mut buf: Vec<Complex<f32>> = white.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        *c *= color.gain(k.min(n - k));
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f32).collect()
}

/// Adds noise of the given color scaled so that the signal-to-noise ratio is
/// exactly `snr_db`. Silent input comes back unchanged.
pub fn add_colored_noise<R: Rng + ?Sized>(
    w: &Waveform,
    snr_db: f32,
    color: NoiseColor,
    rng: &mut R,
) -> Waveform {
    let p_signal = w.power();
    if p_signal == 0.0 {
        return w.clone();
    }
    let noise = colored_noise(w.len(), color, rng);
    let p_noise = noise.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / noise.len() as f64;
    if p_noise == 0.0 {
        return w.clone();
    }
    let target = p_signal / 10f64.powf(snr_db as f64 / 10.0);
    let k = (target / p_noise).sqrt() as f32;
    let samples = w.samples.iter().zip(&noise).map(|(s, n)| s + k * n).collect();
    Waveform {
        samples,
        sample_rate: w.sample_rate,
    }
}

/// Linear-interpolation resample to `round(len / factor)` samples.
pub fn speed_perturb(w: &Waveform, factor: f32) -> Waveform {
    assert!(factor > 0.0, "speed factor {factor}");
    let n = w.len();
    let out_len = ((n as f64 / factor as f64).round() as usize).max(1);
    let last = n.saturating_sub(1);
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * factor as f64;
            let j = (pos.floor() as usize).min(last);
            let frac = (pos - j as f64).min(1.0) as f32;
            let a = w.samples[j];
            let b = w.samples[(j + 1).min(last)];
            if frac == 0.0 {
                a
            } else {
                a + frac * (b - a)
            }
        })
        .collect();
    Waveform {
        samples,
        sample_rate: w.sample_rate,
    }
}

/// Per-example augmentation probabilities and ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPolicy {
    pub enabled: bool,
    pub noise_prob: f32,
    pub snr_db: (f32, f32),
    pub speed_prob: f32,
    pub speed_factors: (f32, f32),
    pub max_masked_bins: usize,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            enabled: true,
            noise_prob: 0.5,
            snr_db: (10.0, 40.0),
            speed_prob: 0.3,
            speed_factors: (0.9, 1.1),
            max_masked_bins: MAX_MASKED_BINS,
        }
    }
}

impl AugmentPolicy {
    pub fn disabled() -> Self {
        AugmentPolicy {
            enabled: false,
            ..Self::default()
        }
    }

    /// True when waveform-level augmentation may change the signal.
    pub fn touches_waveform(&self) -> bool {
        self.enabled && (self.noise_prob > 0.0 || self.speed_prob > 0.0)
    }

    pub fn apply_waveform<R: Rng + ?Sized>(&self, w: &Waveform, rng: &mut R) -> Waveform {
        if !self.enabled {
            return w.clone();
        }
        let mut out = w.clone();
        if rng.random::<f32>() < self.speed_prob {
            let (slow, fast) = self.speed_factors;
            let factor = if rng.random::<bool>() { slow } else { fast };
            out = speed_perturb(&out, factor);
        }
        if rng.random::<f32>() < self.noise_prob {
            let (lo, hi) = self.snr_db;
            let snr = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let color = NoiseColor::ALL[rng.random_range(0..3)];
            out = add_colored_noise(&out, snr, color, rng);
        }
        out
    }

    pub fn apply_features<R: Rng + ?Sized>(&self, f: &mut FeatureMatrix, rng: &mut R) {
        if self.enabled && self.max_masked_bins > 0 {
            spec_augment(f, self.max_masked_bins, rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn factor_one_is_identity() {
        let w = Waveform::new((0..1000).map(|i| (i as f32 * 0.01).sin()).collect());
        assert_eq!(speed_perturb(&w, 1.0), w);
    }

    #[test]
    fn speed_length_formula() {
        let w = Waveform::new(vec![0.5; 16_000]);
        let out = speed_perturb(&w, 1.1);
        assert_eq!(out.len(), 14_545);
        assert!(out.samples.iter().all(|&s| s == 0.5));
        assert_eq!(speed_perturb(&w, 0.9).len(), 17_778);
    }

    #[test]
    fn mask_clamps_to_twenty() {
        let mut r = StdRng::seed_from_u64(3);
        let mut f = FeatureMatrix::new(vec![1.0; 120 * 5], 5).unwrap();
        assert_eq!(mask_bins(&mut f, 40, &mut r).len(), 20);
    }

    #[test]
    fn disabled_policy_is_identity() {
        let mut r = StdRng::seed_from_u64(4);
        let p = AugmentPolicy::disabled();
        let w = Waveform::new(vec![0.25; 800]);
        assert_eq!(p.apply_waveform(&w, &mut r), w);
        let mut f = FeatureMatrix::new(vec![1.0; 120 * 3], 3).unwrap();
        let before = f.clone();
        p.apply_features(&mut f, &mut r);
        assert_eq!(f, before);
    }
}

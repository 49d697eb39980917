#![allow(dead_code)]

use hmc_dsp::{Lfcc, LfccConfig, Waveform};

/// Median squared change between consecutive unit-norm magnitude spectra.
/// The median reflects the typical frame-to-frame motion and ignores
/// isolated jumps.
pub fn spectral_flux(w: &Waveform) -> f64 {
    let lf = Lfcc::new(LfccConfig::default()).unwrap();
    let mags: Vec<Vec<f64>> = lf
        .power_spectrogram(&w.samples)
        .into_iter()
        .map(|p| {
            let m: Vec<f64> = p.iter().map(|&v| (v as f64).sqrt()).collect();
            let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            m.into_iter().map(|v| v / norm).collect()
        })
        .collect();
    let mut diffs: Vec<f64> = mags
        .windows(2)
        .map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    diffs.sort_by(f64::total_cmp);
    diffs[diffs.len() / 2]
}

/// Low-quefrency real cepstrum (1..=LIFTER) of one power spectrum: the
/// spectral envelope without level or harmonic fine structure.
fn envelope_cepstrum(power: &[f32]) -> Vec<f64> {
    let n_fft = 2 * (power.len() - 1);
    // Averaging over ±SMOOTH bins (about 400 Hz) fills the valleys between
    // harmonics so that only the envelope survives the log.
    let logs: Vec<f64> = (0..power.len())
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(SMOOTH), (k + SMOOTH).min(power.len() - 1));
            let mean = power[lo..=hi].iter().map(|&p| p as f64).sum::<f64>() / (hi - lo + 1) as f64;
            mean.max(1e-10).ln()
        })
        .collect();
    (1..=LIFTER)
        .map(|q| {
            let mut acc = logs[0] + logs[logs.len() - 1] * if q % 2 == 0 { 1.0 } else { -1.0 };
            for (k, l) in logs.iter().enumerate().take(logs.len() - 1).skip(1) {
                acc += 2.0 * l * (2.0 * std::f64::consts::PI * (k * q) as f64 / n_fft as f64).cos();
            }
            acc / n_fft as f64
        })
        .collect()
}

const SMOOTH: usize = 6;
const TRACK_SMOOTH: usize = 5;

/// Quefrencies below 1.25 ms, under the pitch period of any voice.
const LIFTER: usize = 20;

/// Summed variance across frames of the liftered cepstral envelope, after
/// a 50 ms moving average that keeps syllable-rate motion and suppresses
/// frame-to-frame estimation noise.
pub fn envelope_variance(w: &Waveform) -> f64 {
    let lf = Lfcc::new(LfccConfig::default()).unwrap();
    let raw: Vec<Vec<f64>> = lf.power_spectrogram(&w.samples).iter().map(|p| envelope_cepstrum(p)).collect();
    let env: Vec<Vec<f64>> = raw
        .windows(TRACK_SMOOTH)
        .map(|win| (0..LIFTER).map(|q| win.iter().map(|e| e[q]).sum::<f64>() / TRACK_SMOOTH as f64).collect())
        .collect();
    let frames = env.len() as f64;
    (0..LIFTER)
        .map(|q| {
            let mean = env.iter().map(|e| e[q]).sum::<f64>() / frames;
            env.iter().map(|e| (e[q] - mean).powi(2)).sum::<f64>() / frames
        })
        .sum()
}

/// Highest normalised autocorrelation over lags covering 90–350 Hz.
pub fn pitch_autocorrelation(w: &Waveform) -> f64 {
    let x: Vec<f64> = w.samples.iter().map(|&v| v as f64).collect();
    (16_000 / 350..=16_000 / 90)
        .map(|lag| {
            let (a, b) = (&x[..x.len() - lag], &x[lag..]);
            let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
            let ea: f64 = a.iter().map(|p| p * p).sum();
            let eb: f64 = b.iter().map(|q| q * q).sum();
            dot / (ea * eb).sqrt()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

use std::f32::consts::PI;
use std::fmt;
use std::str::FromStr;

use hmc_dsp::{Waveform, SAMPLE_RATE};
use hmc_tensor::rng::{self, Rng};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SynthError};

pub const DEFAULT_DURATION_S: f32 = 4.0;
/// Peak absolute sample value of every generated utterance.
pub const PEAK: f32 = 0.9;

const SR: f32 = SAMPLE_RATE as f32;
/// Samples per control frame (5 ms).
const HOP: usize = 80;
const FORMANT_DEV: [f32; 3] = [250.0, 600.0, 300.0];
const FORMANT_RANGE: [(f32, f32); 3] = [(300.0, 1000.0), (700.0, 2600.0), (1900.0, 3600.0)];
const MIN_SPACING: f32 = 400.0;
/// Bandwidth factor for the frozen envelope: averaging a moving resonance
/// over time leaves a broader peak at its mean frequency.
const SMOOTH_BROADENING: f32 = 2.5;
/// Breath noise level relative to the voiced peak, following the gain.
const BREATH_LEVEL: f32 = 0.003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    /// Spectral envelope frozen at its time average for the whole
    /// utterance: formants fixed at their means with broadened bandwidths.
    OverSmooth,
    /// Exactly periodic excitation: no jitter, vibrato, intonation or
    /// breath noise.
    Buzz,
    /// Abrupt envelope and gain jumps at random frame boundaries.
    Seam,
}

impl Artifact {
    pub const ALL: [Artifact; 3] = [Artifact::OverSmooth, Artifact::Buzz, Artifact::Seam];

    pub fn name(self) -> &'static str {
        match self {
            Artifact::OverSmooth => "over_smooth",
            Artifact::Buzz => "buzz",
            Artifact::Seam => "seam",
        }
    }
}

impl fmt::Display for Artifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Artifact {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Artifact::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown artifact {s:?}"))
    }
}

/// Speaker-level constants shared by the bona-fide and spoof renderings of
/// one seed.
struct Voice {
    f0: f32,
    formants: [f32; 3],
    bandwidths: [f32; 3],
    syllable_s: f32,
}

impl Voice {
    fn draw(seed: u64) -> Voice {
        let mut r = rng::stream(seed, "voice");
        let formants = [
            r.random_range(450.0..700.0),
            r.random_range(1100.0..1800.0),
            r.random_range(2400.0..3000.0),
        ];
        let bandwidths = [80.0, 110.0, 160.0].map(|b: f32| b * r.random_range(0.8..1.2));
        Voice {
            f0: r.random_range(100.0..300.0),
            formants,
            bandwidths,
            syllable_s: 1.0 / r.random_range(3.0..6.0),
        }
    }
}

/// Smooth random contour through knots spaced about `spacing` frames apart,
/// with raised-cosine interpolation.
fn contour(r: &mut Rng, frames: usize, spacing: f32, mut draw: impl FnMut(&mut Rng) -> f32) -> Vec<f32> {
    let mut knots = vec![(0usize, draw(r))];
    while knots.last().expect("non-empty").0 < frames {
        let step = (spacing * r.random_range(0.7..1.3)).max(1.0) as usize;
        let at = knots.last().expect("non-empty").0 + step;
        knots.push((at, draw(r)));
    }
    let mut out = Vec::with_capacity(frames);
    let mut k = 0;
    for t in 0..frames {
        while knots[k + 1].0 <= t {
            k += 1;
        }
        let ((a, va), (b, vb)) = (knots[k], knots[k + 1]);
        let u = (t - a) as f32 / (b - a) as f32;
        let w = 0.5 - 0.5 * (PI * u).cos();
        out.push(va + w * (vb - va));
    }
    out
}

/// Per-frame control tracks.
struct Controls {
    f0_scale: Vec<f32>,
    formants: Vec<[f32; 3]>,
    gain: Vec<f32>,
}

fn controls(seed: u64, voice: &Voice, frames: usize, artifacts: &[Artifact]) -> Controls {
    let has = |a| artifacts.contains(&a);
    let frames_per_s = SR / HOP as f32;
    let syllable = voice.syllable_s * frames_per_s;

    let mut r = rng::stream(seed, "formants");
    let tracks: Vec<Vec<f32>> = (0..3)
        .map(|i| contour(&mut r, frames, syllable, |r| r.random_range(-1.0..1.0) * FORMANT_DEV[i]))
        .collect();
    let mut formants: Vec<[f32; 3]> = (0..frames)
        .map(|t| {
            std::array::from_fn(|i| {
                let moving = if has(Artifact::OverSmooth) { 0.0 } else { tracks[i][t] };
                voice.formants[i] + moving
            })
        })
        .collect();

    let mut r = rng::stream(seed, "gain");
    let mut gain = contour(&mut r, frames, syllable / 2.0, |r| r.random_range(0.35..1.0));

    let mut r = rng::stream(seed, "intonation");
    let intonation = contour(&mut r, frames, 0.5 * frames_per_s, |r| r.random_range(-0.12..0.12));
    let vibrato_hz = r.random_range(4.5..6.5);
    let vibrato_phase = r.random_range(0.0..2.0 * PI);
    let f0_scale = (0..frames)
        .map(|t| {
            if has(Artifact::Buzz) {
                1.0
            } else {
                let s = t as f32 / frames_per_s;
                (1.0 + intonation[t]) * (1.0 + 0.015 * (2.0 * PI * vibrato_hz * s + vibrato_phase).sin())
            }
        })
        .collect();

    if has(Artifact::Seam) {
        let mut r = rng::stream(seed, "seam");
        let duration = frames as f32 / frames_per_s;
        let count = ((duration * r.random_range(2.0..4.0)).round() as usize).max(1);
        let mut cuts: Vec<usize> = (0..count).map(|_| r.random_range(1..frames.max(2))).collect();
        cuts.sort_unstable();
        cuts.push(frames);
        let mut start = cuts[0];
        for &end in &cuts[1..] {
            let offset: [f32; 3] = std::array::from_fn(|i| r.random_range(-1.0..1.0) * FORMANT_DEV[i]);
            let scale = 2f32.powf(r.random_range(-1.0..1.0));
            for t in start..end {
                for i in 0..3 {
                    formants[t][i] += offset[i];
                }
                gain[t] *= scale;
            }
            start = end;
        }
    }
    for f in &mut formants {
        for i in 0..3 {
            f[i] = f[i].clamp(FORMANT_RANGE[i].0, FORMANT_RANGE[i].1);
        }
        // Keep the resonators apart so they never merge into one peak.
        f[1] = f[1].max(f[0] + MIN_SPACING);
        f[2] = f[2].max(f[1] + MIN_SPACING);
    }
    Controls {
        f0_scale,
        formants,
        gain,
    }
}

/// Two-pole resonator with unit gain at its centre frequency.
#[derive(Default)]
struct Resonator {
    b0: f32,
    a1: f32,
    a2: f32,
    y1: f32,
    y2: f32,
}

impl Resonator {
    fn tune(&mut self, freq: f32, bandwidth: f32) {
        let r = (-PI * bandwidth / SR).exp();
        let theta = 2.0 * PI * freq / SR;
        self.a1 = 2.0 * r * theta.cos();
        self.a2 = -r * r;
        self.b0 = (1.0 - r) * (1.0 - 2.0 * r * (2.0 * theta).cos() + r * r).sqrt();
    }

    fn process(&mut self, x: f32) -> f32 {
        let y = self.b0 * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn render(seed: u64, duration_s: f32, artifacts: &[Artifact]) -> Waveform {
    let n = ((duration_s * SR).round() as usize).max(1);
    let frames = n.div_ceil(HOP);
    let voice = Voice::draw(seed);
    let ctl = controls(seed, &voice, frames, artifacts);
    let broadening = if artifacts.contains(&Artifact::OverSmooth) { SMOOTH_BROADENING } else { 1.0 };
    let exact = artifacts.contains(&Artifact::Buzz);
    // Breath is the aperiodic part of the excitation.
    let breath_level = if exact { 0.0 } else { BREATH_LEVEL };

    let mut jitter_rng = rng::stream(seed, "jitter");
    let draw_jitter = |r: &mut Rng| {
        if exact {
            1.0
        } else {
            let z: f32 = StandardNormal.sample(r);
            1.0 + 0.01 * z.clamp(-3.0, 3.0)
        }
    };
    let mut jitter = draw_jitter(&mut jitter_rng);
    let mut phase = 0.0f32;
    let mut filters: [Resonator; 3] = Default::default();
    let mut voiced = Vec::with_capacity(n);
    for t in 0..frames {
        for (i, f) in filters.iter_mut().enumerate() {
            f.tune(ctl.formants[t][i], voice.bandwidths[i] * broadening);
        }
        let step = voice.f0 * ctl.f0_scale[t] / SR;
        for _ in 0..HOP.min(n - t * HOP) {
            phase += step * jitter;
            if phase >= 1.0 {
                phase -= 1.0;
                jitter = draw_jitter(&mut jitter_rng);
            }
            let mut y = 2.0 * phase - 1.0;
            for f in &mut filters {
                y = f.process(y);
            }
            voiced.push(y * ctl.gain[t]);
        }
    }
    let gain_at = |i: usize| ctl.gain[i / HOP];

    let peak = voiced.iter().fold(0.0f32, |m, v| m.max(v.abs())).max(f32::MIN_POSITIVE);
    let mut breath = rng::stream(seed, "breath");
    let mixed: Vec<f32> = voiced
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let z: f32 = StandardNormal.sample(&mut breath);
            v / peak + breath_level * gain_at(i) * z
        })
        .collect();
    let peak = mixed.iter().fold(0.0f32, |m, v| m.max(v.abs())).max(f32::MIN_POSITIVE);
    Waveform::new(mixed.into_iter().map(|v| v * (PEAK / peak)).collect())
}

/// Natural-sounding rendering of the voice drawn from `seed`.
pub fn gen_bonafide(seed: u64, duration_s: f32) -> Waveform {
    render(seed, duration_s, &[])
}

/// The same voice as [`gen_bonafide`] with the chosen artifacts applied.
pub fn gen_spoof(seed: u64, duration_s: f32, artifacts: &[Artifact]) -> Result<Waveform> {
    if artifacts.is_empty() {
        return Err(SynthError::Config("a spoof needs at least one artifact".into()));
    }
    Ok(render(seed, duration_s, artifacts))
}

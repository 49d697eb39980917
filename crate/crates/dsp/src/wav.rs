use std::path::Path;

use crate::error::{DspError, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono PCM audio as floats in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>) -> Self {
        Waveform {
            samples,
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f32 {
        self.samples.len() as f32 / self.sample_rate as f32
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / self.samples.len() as f64
    }
}

/// Reads a 16-bit mono 16 kHz PCM WAV file, scaling samples by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|source| match source {
        hound::Error::IoError(source) => DspError::Io {
            path: path.to_path_buf(),
            source,
        },
        source => DspError::Wav {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(DspError::ingest("sample_format", "expected integer PCM"));
    }
    if spec.bits_per_sample != 16 {
        return Err(DspError::ingest(
            "bits_per_sample",
            format!("expected 16, found {}", spec.bits_per_sample),
        ));
    }
    if spec.channels != 1 {
        return Err(DspError::ingest("channels", format!("expected 1, found {}", spec.channels)));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(DspError::ingest(
            "sample_rate",
            format!("expected {SAMPLE_RATE}, found {}", spec.sample_rate),
        ));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<std::result::Result<Vec<f32>, _>>()
        .map_err(|source| DspError::Wav {
            path: path.to_path_buf(),
            source,
        })?;
    if samples.is_empty() {
        return Err(DspError::ingest("data", "no samples"));
    }
    Ok(Waveform::new(samples))
}

/// Writes 16-bit mono PCM; values are rounded and clamped to the i16 range.
pub fn write_wav(path: impl AsRef<Path>, wave: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let wrap = |source| DspError::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in &wave.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

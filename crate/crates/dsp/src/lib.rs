//! Audio front end: 16 kHz PCM ingest, 120-dimensional LFCC features,
//! fixed-length cropping and training-time augmentation.

pub mod augment;
pub mod cache;
mod error;
pub mod features;
pub mod lfcc;
pub mod wav;

pub use augment::{
    add_colored_noise, colored_noise, mask_bins, spec_augment, speed_perturb, AugmentPolicy,
    NoiseColor, MAX_MASKED_BINS,
};
pub use cache::{read_cache, write_cache};
pub use error::{DspError, Result};
pub use features::{FeatureMatrix, FEATURE_DIM, STREAM_DIM, TARGET_FRAMES};
pub use lfcc::{delta, lfcc, Lfcc, LfccConfig};
pub use wav::{read_wav, write_wav, Waveform, SAMPLE_RATE};

//! Deterministic synthetic speech for desk-scale training.
//!
//! Bona-fide utterances are a jittered harmonic source with vibrato and an
//! intonation contour, shaped by three slowly moving formant resonators and
//! mixed with faint breath noise. Spoof utterances share the source but carry
//! one or more artifacts: a frozen spectral envelope (`over_smooth`), an
//! exactly periodic excitation (`buzz`) or abrupt envelope jumps (`seam`).

mod corpus;
mod error;
mod voice;

pub use corpus::{
    build_corpus, read_manifest, write_manifest, Corpus, ManifestEntry, Split, SynthSpec, MANIFEST_FILE,
};
pub use error::{Result, SynthError};
pub use voice::{gen_bonafide, gen_spoof, Artifact, DEFAULT_DURATION_S, PEAK};

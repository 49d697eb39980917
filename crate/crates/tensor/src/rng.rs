//! Seeded random streams.
//!
//! One experiment seed fans out into independent per-purpose streams, so
//! that e.g. turning augmentation on or off leaves weight init untouched.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Stream for `purpose` under `seed`.
pub fn stream(seed: u64, purpose: &str) -> Rng {
    substream(seed, purpose, 0)
}

/// Indexed stream, e.g. one per utterance or per training step.
pub fn substream(seed: u64, purpose: &str, index: u64) -> Rng {
    let mixed =
        splitmix64(splitmix64(seed) ^ fnv1a(purpose)) ^ splitmix64(index.wrapping_add(0xA5A5_A5A5));
    Rng::seed_from_u64(splitmix64(mixed))
}

//! Seeded randomness.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded through
//! [`SeedableRng::seed_from_u64`]. ChaCha8 output is specified independently
//! of platform and word size, so datasets and parameters generated from the
//! same seed are identical everywhere. Independent streams (one per epoch,
//! per instance, per fold, ...) are derived with [`derive_seed`], a
//! SplitMix64 finalizer over `(seed, stream)`.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Generator for `seed`.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a parent seed and a stream id into a child seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named sub-streams, so call sites never collide by accident.
pub(crate) mod stream {
    pub const INIT: u64 = 1;
    pub const DROPOUT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const POSITIVE: u64 = 5;
    pub const NEGATIVE: u64 = 6;
    pub const NOISE: u64 = 7;
}

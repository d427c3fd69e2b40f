//! Seed derivation for reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(seed) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93)) ^ index)
}

pub fn rng_for(seed: u64, stream: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Named streams so that different consumers of one seed never overlap.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const PREDICTIVE: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
    pub const SAMPLE_THETA: u64 = 5;
    pub const DATA: u64 = 6;
    pub const THINNING: u64 = 7;
    pub const BASELINE: u64 = 8;
}

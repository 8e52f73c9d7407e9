//! Counter-based seed derivation.
//!
//! Every random stream in a sweep is addressed by a path of integers
//! (cell index, trial index, node, ...) hashed together with the master seed,
//! so a trial's randomness never depends on execution order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep unrelated consumers of the same trial seed apart.
pub mod stream {
    pub const SPLIT: u64 = 0x5350_4c49;
    pub const SHARD: u64 = 0x5348_4152;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const MASK: u64 = 0x4d41_534b;
    pub const TRAIN: u64 = 0x5452_4149;
    pub const BASELINE: u64 = 0x4241_5345;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a path of indices.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Deterministic, platform-stable generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub type TrialRng = ChaCha8Rng;

//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose seed is
//! derived from a root seed and a path of stream labels, so that a trial's
//! randomness depends only on its index and never on how trials are spread
//! over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream labels used by the simulation loops.
pub mod stream {
    pub const CHANNEL: u64 = 0x4348_414e;
    pub const SYMBOLS: u64 = 0x5359_4d42;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const BITS: u64 = 0x4249_5453;
    pub const CODE: u64 = 0x434f_4445;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a root seed with a path of labels into a child seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn child_rng(seed: u64, path: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(seed, path))
}

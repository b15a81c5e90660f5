//! Counter-based seed derivation.
//!
//! Every random draw in the pipeline is keyed by a tuple such as
//! `(master, stream, sample, method, draw)`. The tuple is folded through
//! SplitMix64 into a fresh ChaCha8 seed, so results never depend on the order
//! in which tasks execute or on how many workers run them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep unrelated consumers of the same master seed apart.
pub mod stream {
    pub const DATA_PATTERN: u64 = 0x01;
    pub const DATA_NOISE: u64 = 0x02;
    pub const SPLIT: u64 = 0x03;
    pub const INIT: u64 = 0x04;
    pub const SHUFFLE: u64 = 0x05;
    pub const EXPLAIN: u64 = 0x10;
    pub const BASELINE: u64 = 0x11;
    pub const METRIC: u64 = 0x20;
    pub const SELECT: u64 = 0x21;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

/// Stable 64-bit tag for a string, used to fold method and metric names into seeds.
pub fn tag(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

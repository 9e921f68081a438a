//! Seed derivation. Every random stream in the crate is a `ChaCha8Rng`
//! seeded from a root seed and a short path of stream labels, so runs are
//! reproducible and independent streams never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a root seed with a sequence of stream labels.
pub fn derive(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(root: u64, path: &[u64]) -> Rng {
    rng(derive(root, path))
}

/// Stream labels used by training and analysis.
pub mod stream {
    pub const ENCODER: u64 = 1;
    pub const INIT: u64 = 2;
    pub const DATA: u64 = 3;
    pub const BANK: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const DECODE: u64 = 6;
    pub const FAMILY: u64 = 7;
    pub const FIXED_POINTS: u64 = 8;
}

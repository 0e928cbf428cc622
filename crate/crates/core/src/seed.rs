//! Explicit, hierarchical seeding. No operation touches a global generator;
//! sub-tasks get their own stream derived from `(parent, index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child stream of `parent`.
pub fn derive(parent: u64, index: u64) -> u64 {
    mix(mix(parent) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Seed for a named child stream, e.g. `derive_named(seed, "sample")`.
pub fn derive_named(parent: u64, name: &str) -> u64 {
    name.bytes()
        .fold(mix(parent), |acc, b| mix(acc ^ u64::from(b)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

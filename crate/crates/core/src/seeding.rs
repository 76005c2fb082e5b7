//! Deterministic seed derivation.
//!
//! Every stochastic component (design sampling, phantom replicates,
//! optimizer restarts, Monte Carlo oracles) derives its own stream from a
//! single master seed so that reruns are byte-identical and adding
//! restarts never perturbs earlier streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; decorrelates (seed, tag) pairs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(seed, tag)`.
pub fn derive(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Seeded RNG for the stream identified by `(seed, tag)`.
pub fn stream(seed: u64, tag: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive(seed, tag))
}

/// Stream tags, one per consumer, so streams never collide.
pub mod tags {
    pub const BASE_DESIGN: u64 = 0x01;
    pub const PHANTOM: u64 = 0x02;
    pub const OPTIMIZER_MIN: u64 = 0x03;
    pub const OPTIMIZER_MAX: u64 = 0x04;
    pub const ORACLE: u64 = 0x05;
    pub const VALIDATION: u64 = 0x06;
    pub const THETA_SAMPLER: u64 = 0x07;
}

//! Seeded randomness.
//!
//! Every stochastic choice in the engine flows through a [`ChaCha8Rng`]
//! created here, with sub-streams derived via SplitMix64 so that unrelated
//! consumers (weight init, shuffling, dropout, selection) never share a
//! stream. Shuffling and sampling are hand-rolled Fisher–Yates so the byte
//! reproducibility contract depends only on this crate, not on upstream
//! algorithm changes.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

/// Build the engine's RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from [0, 1).
pub fn next_uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

/// SplitMix64 finalizer; decorrelates nearby seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed for a named stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Standard normal draw via Box–Muller.
pub fn next_gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// In-place Fisher–Yates shuffle.
pub fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// `m` distinct values sampled uniformly from `0..n` (partial Fisher–Yates).
pub fn sample_without_replacement(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    debug_assert!(m <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool
}

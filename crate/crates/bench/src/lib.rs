//! Shared fixtures for the criterion benches.

use smc_core::rng::Xoshiro256;

/// `n` standard normal draws from a fixed seed.
pub fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256::seed_from_u64(seed);
    (0..n).map(|_| rng.standard_normal()).collect()
}

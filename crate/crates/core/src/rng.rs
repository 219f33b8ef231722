//! Portable pseudo-random generation.
//!
//! The generator is xoshiro256** seeded by four successive outputs of
//! SplitMix64 started at the 64-bit seed. Uniform reals in [0,1) take the top
//! 53 bits: `(next_u64() >> 11) * 2^-53`. Constants:
//!
//! * SplitMix64: increment `0x9E3779B97F4A7C15`, finalizer multipliers
//!   `0xBF58476D1CE4E5B9` (shift 30) and `0x94D049BB133111EB` (shifts 27, 31).
//! * xoshiro256**: output `rotl(s1 * 5, 7) * 9`; state update
//!   `t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)`.
//!
//! All arithmetic is wrapping on unsigned 64-bit integers, so any language
//! with 64-bit integers reproduces the same streams.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; a bijection on u64.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(GOLDEN_GAMMA);
        mix64(self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Xoshiro256 {
    s: [u64; 4],
}

impl Xoshiro256 {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Xoshiro256 { s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()] }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box-Muller (cosine branch only, two uniforms per draw).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Maps replication indices to simulator seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub base_seed: u64,
}

impl SeedPlan {
    pub fn new(base_seed: u64) -> Self {
        SeedPlan { base_seed }
    }

    /// `mix64(mix64(base) ^ index)`: injective over indices for a fixed
    /// base. Mixing the base first keeps nearby bases from reusing each
    /// other's seeds (with `base ^ index`, bases 0 and 1 share every seed
    /// below the largest index, only in a different order).
    pub fn derive_seed(&self, replication_index: u64) -> u64 {
        mix64(mix64(self.base_seed) ^ replication_index)
    }

    /// Seed for the single long trajectory used by warmup and batch-means
    /// analyses. Drawn from the top of the index space, disjoint from the
    /// replication indices 0..2^32.
    pub fn trajectory_seed(&self) -> u64 {
        self.derive_seed(u64::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_and_stable() {
        let plan = SeedPlan::new(0);
        assert_ne!(plan.derive_seed(0), plan.derive_seed(1));
        assert_eq!(plan.derive_seed(17), plan.derive_seed(17));
    }

    #[test]
    fn injective_on_a_window() {
        let plan = SeedPlan::new(0xDEAD_BEEF);
        let mut seen = std::collections::HashSet::new();
        for i in 0..100_000u64 {
            assert!(seen.insert(plan.derive_seed(i)));
        }
        assert!(!seen.contains(&plan.trajectory_seed()));
    }

    #[test]
    fn nearby_bases_share_no_seeds() {
        let seeds = |base: u64| -> std::collections::HashSet<u64> {
            let plan = SeedPlan::new(base);
            (0..10_000).map(|i| plan.derive_seed(i)).collect()
        };
        let first = seeds(10_000);
        for base in [10_001, 10_002, 9_999, 0] {
            assert!(first.is_disjoint(&seeds(base)), "base {base}");
        }
    }

    #[test]
    fn frozen_seed_table() {
        let plan = SeedPlan::new(42);
        let got: Vec<u64> = (0..16).map(|i| plan.derive_seed(i)).collect();
        assert_eq!(got, SEEDS_BASE_42);
    }

    // computed once from mix64(mix64(42) ^ i) with an independent script
    const SEEDS_BASE_42: [u64; 16] = [
        0x97ea_87f7_e45c_00a5, 0x9018_83d2_4274_28f4, 0x387d_5553_c3ca_7756, 0x3491_b1ed_ab0b_e18e,
        0x0270_4c31_b1c2_51b9, 0x80c3_2873_bfae_b184, 0x958a_bb92_2833_dad1, 0xec82_485e_ec5d_3ee6,
        0x1e29_207e_d5dc_9fc2, 0x0c2e_244d_9d87_ace8, 0x8b1c_258f_0371_0e31, 0xddd6_93b7_4b7b_912b,
        0xd295_c3bb_f103_a2ad, 0x9a0e_ed32_0e49_fa7c, 0xd5db_f37f_5325_2a9b, 0x4665_e5b3_3b46_b66a,
    ];

    #[test]
    fn xoshiro_reference_stream() {
        // reference: splitmix64(0) first outputs are the published
        // e220a8397b1dcdaf, 6e789e6aa1b965f4, 06c45d188009454f, f88bb8a8724c81ec
        let mut sm = SplitMix64::new(0);
        assert_eq!(sm.next_u64(), 0xe220_a839_7b1d_cdaf);
        assert_eq!(sm.next_u64(), 0x6e78_9e6a_a1b9_65f4);
        assert_eq!(sm.next_u64(), 0x06c4_5d18_8009_454f);
        assert_eq!(sm.next_u64(), 0xf88b_b8a8_724c_81ec);
        let mut a = Xoshiro256::seed_from_u64(7);
        let mut b = Xoshiro256::seed_from_u64(7);
        for _ in 0..1000 {
            let u = a.uniform();
            assert!((0.0..1.0).contains(&u));
            assert_eq!(u.to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = Xoshiro256::seed_from_u64(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.standard_normal()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(m.abs() < 0.01, "{m}");
        assert!((v - 1.0).abs() < 0.01, "{v}");
    }
}

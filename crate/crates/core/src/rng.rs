//! Counter-based randomness.
//!
//! Every random quantity attached to a site of the environment is a pure
//! function of `(seed, stream, index, lane)`. Realizing sites in any order,
//! from any thread, or after a restart yields the same values, which is what
//! makes environments prefix-stable.

use rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const LANE_GAMMA: u64 = 0xD1B5_4A32_D192_ED03;

/// Stream tags. Environment and walk randomness never share a key.
pub mod stream {
    pub const ENVIRONMENT: u64 = 0x454E_5649;
    pub const WALK: u64 = 0x5741_4C4B;
    pub const RESERVOIR: u64 = 0x5245_5356;
    pub const MOMENTS: u64 = 0x4D4F_4D53;
    pub const SEEDS: u64 = 0x5345_4544;
}

/// SplitMix64 finalizer: a bijective avalanche mix of one word.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed hash from counters to uniformly distributed words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(mix64(seed ^ GOLDEN_GAMMA).wrapping_add(stream.wrapping_mul(LANE_GAMMA)));
        Self { key }
    }

    #[inline]
    pub fn word(&self, index: u64, lane: u64) -> u64 {
        let a = mix64(self.key ^ index.wrapping_mul(GOLDEN_GAMMA));
        mix64(a.wrapping_add(lane.wrapping_add(1).wrapping_mul(LANE_GAMMA)))
    }

    /// Uniform draw on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&self, index: u64, lane: u64) -> f64 {
        unit_f64(self.word(index, lane))
    }
}

#[inline(always)]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential generator for walk steps, seeded from a counter-derived word.
pub fn walk_rng(seed: u64, stream_tag: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(CounterRng::new(seed, stream_tag).word(0, 0))
}

/// Derive the seed of the `j`-th child of `parent` (used for seed grids).
pub fn child_seed(parent: u64, j: u64) -> u64 {
    CounterRng::new(parent, stream::SEEDS).word(j, 0)
}

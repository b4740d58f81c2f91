//! Seeded randomness.
//!
//! Every random draw in the crate comes from [`stream`], a SplitMix64
//! generator keyed by the run seed and a per-purpose stream id, so results
//! do not depend on thread scheduling or on the platform's default RNG.

use rand::SeedableRng;
pub use rand_xoshiro::SplitMix64 as Rng;

/// Identifies the generator family in manifests and reports.
pub const RNG_NAME: &str = "splitmix64-v1";

/// Generator for `(seed, stream)`. Distinct streams are decorrelated by
/// mixing the stream id through one SplitMix64 round.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut z = stream.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    Rng::seed_from_u64(seed ^ z)
}

//! Seed derivation.
//!
//! Every random stream in an audit is derived from the trial seed through
//! [`mix64`], so any single number in a report can be regenerated in
//! isolation. The mixer is the SplitMix64 finalizer applied once per input
//! word, chained through a Weyl increment of `0x9E37_79B9_7F4A_7C15`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Weyl increment used to chain words through the finalizer.
pub const MIX_INCREMENT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags used when a seed feeds something other than an explainer.
pub mod stream {
    pub const SPLIT: u64 = 0x5350_4C49_5400_0000;
    pub const MODEL: u64 = 0x4D4F_4445_4C00_0000;
    pub const PREDICTION_GAP: u64 = 0x5052_4741_5000_0000;
    pub const INSTABILITY: u64 = 0x5354_4142_0000_0000;
    pub const PERMUTATION: u64 = 0x5045_524D_0000_0000;
}

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes an ordered list of words into one 64-bit seed.
///
/// Order matters: `mix64(&[a, b]) != mix64(&[b, a])` in general.
pub fn mix64(parts: &[u64]) -> u64 {
    parts.iter().fold(MIX_INCREMENT, |h, &p| {
        finalize(h.wrapping_add(MIX_INCREMENT) ^ p)
    })
}

/// The canonical seed for one explanation: `mix64(trial, method, instance, replicate)`.
pub fn instance_seed(trial_seed: u64, method_id: u64, instance_index: u64, replicate: u64) -> u64 {
    mix64(&[trial_seed, method_id, instance_index, replicate])
}

/// Portable, seedable generator used everywhere in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

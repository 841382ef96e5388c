//! Deterministic seed derivation for parallel Monte-Carlo work.
//!
//! Every random draw in a sweep comes from its own ChaCha8 stream whose seed
//! is a pure function of the master seed and the draw's coordinates:
//!
//! ```text
//! point_seed = derive(master, [snr_index, distortion_index])
//! trial_seed = derive(point_seed, [trial_index])
//! ```
//!
//! so a single flagged trial can be replayed from the CSV `seed` column and
//! its trial index, independent of how work was split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of coordinates into `base`, one mixing round per coordinate.
pub fn derive(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix64(base), |acc, &c| mix64(acc ^ mix64(c.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// Seed of one `(snr, distortion)` sweep point.
pub fn point_seed(master: u64, snr_index: usize, distortion_index: usize) -> u64 {
    derive(master, &[snr_index as u64, distortion_index as u64])
}

/// Seed of one trial within a Monte-Carlo run.
pub fn trial_seed(run_seed: u64, trial_index: u64) -> u64 {
    derive(run_seed, &[trial_index])
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

//! Deterministic per-trial random streams.
//!
//! A run seed, a trial index and a stream tag are mixed with SplitMix64
//! finalizers into the 64-bit seed of a ChaCha8 generator, so every trial owns
//! an independent stream that does not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type TrialRng = ChaCha8Rng;

/// Stream tags separating the random draws made within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Grid = 1,
    Utilities = 2,
    Algorithm = 3,
    Baseline = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, trial: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(trial)) ^ stream as u64)
}

pub fn trial_rng(seed: u64, trial: u64, stream: Stream) -> TrialRng {
    TrialRng::seed_from_u64(derive_seed(seed, trial, stream))
}

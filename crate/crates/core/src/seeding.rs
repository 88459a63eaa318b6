//! Seed splitting. Every random stream of a run is a ChaCha8 stream keyed by a
//! `u64` seed and a stream number, so results do not depend on the order in
//! which trials or phases are scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream that draws the hidden sick set.
pub const TRUTH_STREAM: u64 = 0;
/// Stream that drives test designs and channel noise.
pub const SIMULATION_STREAM: u64 = 1;
/// Stream that yields the public seeds written to the transcript header.
pub const PUBLIC_STREAM: u64 = 2;

pub fn sub_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of trial `trial` in an experiment with base seed `base`: the first
/// word of stream `trial` under `base`.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    sub_rng(base, trial).next_u64()
}

/// Codebook and fallback seeds for a run with master seed `seed`.
pub fn public_seeds(seed: u64) -> (u64, u64) {
    let mut rng = sub_rng(seed, PUBLIC_STREAM);
    let codebook = rng.next_u64();
    let fallback = rng.next_u64();
    (codebook, fallback)
}

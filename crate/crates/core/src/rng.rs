//! Seed-stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! master seed, with the 64-bit stream id set to `(index << 4) | purpose`.
//! `index` is the trajectory (or task) number, `purpose` separates independent
//! uses within one task. Streams depend only on these two numbers, so results
//! do not depend on how tasks are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIELD: u64 = 1;
pub const NOISE: u64 = 2;
pub const BOOTSTRAP: u64 = 3;
pub const POWER: u64 = 4;
pub const FIXTURE: u64 = 5;

pub fn stream(master: u64, index: u64, purpose: u64) -> ChaCha8Rng {
    assert!(purpose < 16, "purpose tag must fit in four bits");
    assert!(index < (1 << 60), "task index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((index << 4) | purpose);
    rng
}

/// A 64-bit seed for a sub-component (e.g. the field sampler of trajectory `index`).
pub fn derive_seed(master: u64, index: u64, purpose: u64) -> u64 {
    stream(master, index, purpose).next_u64()
}

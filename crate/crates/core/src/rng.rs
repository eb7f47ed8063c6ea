//! Seed derivation and keyed random streams.
//!
//! Every draw is addressed by `(seed, stream)`: a replication gets its own
//! seed, and inside a run each oracle call reads a fresh stream keyed by its
//! iteration and call slot. Samples within a call are consumed in index
//! order, so sample `s` of call `(k, slot)` is fixed by the key alone.

use rand::SeedableRng;

use crate::problem::SampleRng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replication `index` of a batch keyed by `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Generator positioned at the start of stream `stream` for `seed`.
pub fn keyed_rng(seed: u64, stream: u64) -> SampleRng {
    let mut rng = SampleRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

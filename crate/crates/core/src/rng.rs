//! Seed-stream derivation. Every random decision in a run (weight init,
//! split shuffle, per-epoch batch shuffle, per-worker latency draws) pulls
//! from its own ChaCha8 stream derived from the run seed, so changing one
//! consumer never perturbs another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_WEIGHT_INIT: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_BATCHES: u64 = 3;
pub const STREAM_LATENCY: u64 = 4;

/// SplitMix64 finalizer; decorrelates (seed, stream) pairs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream))
}

/// Sub-stream of a stream (e.g. per-epoch batch shuffles, per-worker latency).
pub fn substream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(derive(seed, stream) ^ mix(index.wrapping_add(0x5bd1_e995))))
}

//! Counter-keyed random streams.
//!
//! Every random decision in the library draws from a stream whose seed is a
//! pure function of a master seed and a tuple of coordinates (iteration,
//! row, repetition, system, ...). Streams never depend on scheduling order,
//! so parallel and sequential execution produce the same bits.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

/// The generator behind every stream.
pub type Stream = SplitMix64;

/// Finalizer of SplitMix64 / Murmur3; a bijective avalanche mix on u64.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit key from a seed and a coordinate path.
pub fn derive_key(seed: u64, path: &[u64]) -> u64 {
    let mut key = mix64(seed ^ 0x6a09_e667_f3bc_c909);
    for (depth, &coord) in path.iter().enumerate() {
        key = mix64(key ^ mix64(coord.wrapping_add((depth as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))));
    }
    key
}

/// Opens the stream addressed by `(seed, path...)`.
pub fn stream(seed: u64, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_key(seed, path))
}

/// Stable 64-bit FNV-1a hash, used to key streams by string identifiers.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Domain tags keep streams for different purposes disjoint.
pub mod tag {
    pub const TUKEY_ITER: u64 = 1;
    pub const TOPIC_SUBSET: u64 = 2;
    pub const SAMPLE_RANKING: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
    pub const TUKEY_SEED: u64 = 5;
}

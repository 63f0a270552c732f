//! Counter-based random streams.
//!
//! Every random draw in the laboratory comes from a ChaCha8 stream keyed by
//! the experiment's root seed. The 64-bit stream id is a SplitMix64 hash of
//! `(root, path...)`, where the path names the trial and the purpose of the
//! draw. Two different paths never share a stream, so trials can run on any
//! worker in any order and still see identical randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes. Values are part of the reproducibility contract.
pub mod purpose {
    pub const INSTANCE: u64 = 0x01;
    pub const PAIR_COUPLING: u64 = 0x02;
    pub const PAIR_FRESH: u64 = 0x03;
    pub const ROUNDING: u64 = 0x04;
    pub const TRIAL: u64 = 0x05;
    pub const BATCH: u64 = 0x06;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of `(root, path...)`.
pub fn derive(root: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(root);
    for &p in path {
        h = splitmix64(splitmix64(h) ^ p);
    }
    h
}

/// The stream addressed by `(root, path...)`.
pub fn stream(root: u64, path: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(derive(root, path));
    rng
}

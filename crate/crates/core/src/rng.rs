//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream whose key is
//! derived from `(seed, module, index)`, so independent samples can be
//! generated in any order (or concurrently) and still reproduce exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stream keyed by `(seed, module, index)`.
pub fn stream(seed: u64, module: &str, index: u64) -> StreamRng {
    let tag = fnv1a(module.as_bytes());
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..32].copy_from_slice(&splitmix(seed ^ tag.rotate_left(17) ^ index).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

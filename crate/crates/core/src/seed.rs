//! Stable seed derivation.
//!
//! Every random stream in the harness is keyed by a root seed plus a
//! stream label and an index, so runs replay exactly regardless of thread
//! scheduling or iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over bytes; stable across platforms and toolchains.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Counter-based split: child seed for `(stream, index)` under `root`.
pub fn derive(root: u64, stream: &str, index: u64) -> u64 {
    mix64(mix64(root ^ fnv1a(stream.as_bytes())).wrapping_add(mix64(index)))
}

pub fn rng(root: u64, stream: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, stream, index))
}

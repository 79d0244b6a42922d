//! Deterministic random streams derived from a single root seed.
//!
//! Every consumer of randomness asks for a stream by label. Streams are
//! independent ChaCha generators keyed by `(root seed, label)`, so adding a
//! new consumer never perturbs the values an existing one draws.

pub use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha12Rng;

/// A per-purpose random stream.
pub type Stream = ChaCha12Rng;

/// Derives the stream for `label` under `root` seed.
///
/// The 256-bit ChaCha key is filled from four FNV-1a hashes of the label
/// bytes (with distinct tweaks) mixed with the root seed.
pub fn stream(root: u64, label: &str) -> Stream {
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        let h = fnv1a(label.as_bytes(), i as u64).wrapping_add(root.rotate_left(17 * i as u32));
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

fn fnv1a(bytes: &[u8], tweak: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ tweak.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // one extra round so the tweak also diffuses on empty labels
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^ (h >> 33)
}

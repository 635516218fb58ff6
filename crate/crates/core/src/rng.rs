//! Seeded random streams. Every consumer derives its own ChaCha8 stream from
//! the global seed and a stable key, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

fn digest(seed: u64, key: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let out = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&out);
    bytes
}

/// Independent stream for `(seed, key)`.
pub fn stream(seed: u64, key: &str) -> StreamRng {
    ChaCha8Rng::from_seed(digest(seed, key))
}

/// First eight bytes of SHA-256, stable across platforms and releases.
pub fn stable_hash(text: &str) -> u64 {
    let out = Sha256::digest(text.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&out[..8]);
    u64::from_le_bytes(b)
}

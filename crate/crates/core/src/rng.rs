//! Seeded random streams.
//!
//! Every random decision in the pipeline draws from a `ChaCha8Rng` whose seed
//! is derived from the run seed plus a key naming the decision site, so output
//! never depends on iteration or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Stream for a plain integer seed.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream keyed by `(seed, parts...)`. Parts are length-prefixed before
/// hashing so `["ab", "c"]` and `["a", "bc"]` give different streams.
pub fn keyed(seed: u64, parts: &[&str]) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

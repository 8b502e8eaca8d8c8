//! Seed derivation. Every random stream is keyed by
//! `SHA-256(global_seed_le ‖ purpose ‖ 0x00 ‖ id)`, truncated to its first
//! eight bytes (little-endian), so adding a new consumer never shifts an
//! existing stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(global: u64, purpose: &str, id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    hasher.update(purpose.as_bytes());
    hasher.update([0u8]);
    hasher.update(id.as_bytes());
    let digest = hasher.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

pub fn derive_rng(global: u64, purpose: &str, id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(global, purpose, id))
}

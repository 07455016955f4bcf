//! Stable seed derivation.
//!
//! Every random stream in the workbench is keyed by a parent seed plus a path
//! of names, hashed with SHA-256, so adding a new stream never shifts the
//! values produced by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn derive_seed(seed: u64, path: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in path {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn rng_for(seed: u64, path: &[&str]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

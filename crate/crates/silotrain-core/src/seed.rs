//! Deterministic seed derivation.
//!
//! Every role and every run stage gets its own stream seed so that shuffles
//! in one place never perturb draws in another. Derivation hashes the base
//! seed together with a purpose tag; the first eight digest bytes become the
//! child seed.

use sha2::{Digest, Sha256};

/// Derives a child seed from `base` and a purpose `tag`.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

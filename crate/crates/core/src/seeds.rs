//! Named RNG streams derived from a master seed.

use sha2::{Digest, Sha256};

/// Stable 64-bit seed for the stream named by `labels` under `master`.
///
/// Labels are length-prefixed before hashing so `["ab", "c"]` and
/// `["a", "bc"]` name different streams.
pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

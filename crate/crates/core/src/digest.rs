//! Stable hashing helpers shared by fixtures, split assignment and manifests.

use sha2::{Digest, Sha256};

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// 64-bit key derived from the first eight bytes of SHA-256.
pub fn hash64(bytes: impl AsRef<[u8]>) -> u64 {
    let digest = Sha256::digest(bytes.as_ref());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(head)
}

/// The 16-hex-digit form of [`hash64`] used as a fixture key.
pub fn hash64_hex(bytes: impl AsRef<[u8]>) -> String {
    format!("{:016x}", hash64(bytes))
}

/// Seeded ordering key: records are shuffled by sorting on this.
pub(crate) fn seeded_key(seed: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_be_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(head)
}

//! Small helpers shared across phases.

use sha2::{Digest, Sha256};

/// Derives a stable sub-seed from a master seed and a namespace label.
///
/// Labels partition the randomness so phases (and tasks within a phase)
/// cannot bleed entropy into each other when one of them changes how much
/// randomness it consumes.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let digest = Sha256::digest(format!("{master}:{label}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

/// Rounds to two decimal places, the precision used in reported tables.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Hex-encoded SHA-256 of arbitrary bytes, used for manifest content digests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

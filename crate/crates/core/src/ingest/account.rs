//! Account-metadata extraction with anonymization.

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AccountMetadata;

/// Raw account record as found in `meta.json`. Everything is optional; the
/// extractor tolerates sparse profiles.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RawProfile {
    #[serde(default)]
    pub account_id: Option<String>,
    #[serde(default)]
    pub display_name: Option<String>,
    #[serde(default)]
    pub bio: Option<String>,
    #[serde(default)]
    pub certifications: Vec<String>,
    #[serde(default)]
    pub scope_hints: Vec<String>,
}

fn scrub(text: &str) -> String {
    // Phone-like digit runs (7+ digits, optional separators) and @handles.
    let phone = Regex::new(r"\+?\d[\d\-\s]{5,}\d").unwrap();
    let handle = Regex::new(r"@[A-Za-z0-9_]+").unwrap();
    let no_phones = phone.replace_all(text, "[redacted]");
    handle.replace_all(&no_phones, "[redacted]").into_owned()
}

/// Hashes the platform identity and scrubs contact details, keeping only the
/// professional context fields.
pub fn extract_account_metadata(profile: &RawProfile) -> AccountMetadata {
    let identity = profile
        .account_id
        .clone()
        .or_else(|| profile.display_name.clone())
        .unwrap_or_default();
    let mut hasher = Sha256::new();
    hasher.update(identity.as_bytes());
    let digest = hasher.finalize();
    let mut hash = String::from("acct-");
    for byte in digest.iter().take(8) {
        hash.push_str(&format!("{byte:02x}"));
    }
    AccountMetadata {
        account_id_hash: hash,
        profile_summary: scrub(profile.bio.as_deref().unwrap_or("")),
        certifications: profile.certifications.iter().map(|c| scrub(c)).collect(),
        service_scope_hints: profile.scope_hints.iter().map(|h| scrub(h)).collect(),
    }
}

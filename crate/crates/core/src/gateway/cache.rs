//! Record/replay cache mapping request fingerprints to response texts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::schema::{read_jsonl, write_jsonl};

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    fingerprint: String,
    response: String,
}

/// In-memory fingerprint → response map with jsonl persistence. Later entries
/// for the same fingerprint win, so re-recording a run overwrites cleanly.
#[derive(Debug, Clone, Default)]
pub struct ReplayCache {
    entries: BTreeMap<String, String>,
}

impl ReplayCache {
    pub fn new() -> ReplayCache {
        ReplayCache::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ReplayCache> {
        let lines: Vec<CacheLine> = read_jsonl(path)?;
        let mut cache = ReplayCache::new();
        for line in lines {
            cache.entries.insert(line.fingerprint, line.response);
        }
        Ok(cache)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let lines: Vec<CacheLine> = self
            .entries
            .iter()
            .map(|(fingerprint, response)| CacheLine {
                fingerprint: fingerprint.clone(),
                response: response.clone(),
            })
            .collect();
        write_jsonl(path, &lines)
    }

    pub fn get(&self, fingerprint: &str) -> Option<&str> {
        self.entries.get(fingerprint).map(String::as_str)
    }

    pub fn put(&mut self, fingerprint: String, response: String) {
        self.entries.insert(fingerprint, response);
    }

    pub fn remove(&mut self, fingerprint: &str) -> Option<String> {
        self.entries.remove(fingerprint)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

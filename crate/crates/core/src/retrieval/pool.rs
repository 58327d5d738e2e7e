//! Exact-scan retrieval pools with snapshot serialization.

use std::collections::BTreeSet;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{cosine, EmbeddingVector};
use crate::error::{Error, Result};
use crate::schema::{read_jsonl, write_jsonl};

/// One pool entry: text, its vector, and an opaque payload the caller
/// interprets (e.g. the reply that followed the text in the source stream).
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub entry_id: String,
    pub text: String,
    pub vector: EmbeddingVector,
    pub payload: serde_json::Value,
}

/// A retrieval result with its similarity score.
#[derive(Debug, Clone)]
pub struct ScoredEntry<'a> {
    pub entry: &'a PoolEntry,
    pub score: f32,
}

/// Immutable-after-build pool of embedded texts. Entry ids are unique and all
/// vectors share the pool dimension.
#[derive(Debug, Clone, Default)]
pub struct RetrievalPool {
    entries: Vec<PoolEntry>,
    ids: BTreeSet<String>,
}

impl RetrievalPool {
    pub fn new() -> RetrievalPool {
        RetrievalPool::default()
    }

    pub fn insert(&mut self, entry: PoolEntry) -> Result<()> {
        if !self.ids.insert(entry.entry_id.clone()) {
            return Err(Error::Precondition(format!(
                "duplicate pool entry id {}",
                entry.entry_id
            )));
        }
        if let Some(first) = self.entries.first() {
            if first.vector.dim() != entry.vector.dim() {
                return Err(Error::Precondition(format!(
                    "pool dimension mismatch: {} vs {}",
                    first.vector.dim(),
                    entry.vector.dim()
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn get(&self, entry_id: &str) -> Option<&PoolEntry> {
        self.entries.iter().find(|e| e.entry_id == entry_id)
    }

    /// Entries ranked by descending cosine to the query, ties broken by
    /// ascending entry id. Asking for more than the pool holds returns the
    /// whole pool sorted; an empty pool returns nothing.
    pub fn top_k(&self, query: &EmbeddingVector, k: usize) -> Vec<ScoredEntry<'_>> {
        let mut scored: Vec<ScoredEntry<'_>> = self
            .entries
            .iter()
            .map(|entry| ScoredEntry {
                score: cosine(&entry.vector, query),
                entry,
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.entry.entry_id.cmp(&b.entry.entry_id))
        });
        scored.truncate(k);
        scored
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let records: Vec<PoolRecord> = self.entries.iter().map(PoolRecord::from).collect();
        write_jsonl(path, &records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RetrievalPool> {
        let records: Vec<PoolRecord> = read_jsonl(path)?;
        let mut pool = RetrievalPool::new();
        for record in records {
            pool.insert(record.try_into()?)?;
        }
        Ok(pool)
    }
}

/// Snapshot line format: id, text, payload, and the vector as base64 of
/// little-endian f32 bytes.
#[derive(Debug, Serialize, Deserialize)]
struct PoolRecord {
    entry_id: String,
    text: String,
    payload: serde_json::Value,
    vector_b64: String,
}

impl From<&PoolEntry> for PoolRecord {
    fn from(entry: &PoolEntry) -> PoolRecord {
        let mut bytes = Vec::with_capacity(entry.vector.dim() * 4);
        for v in entry.vector.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        PoolRecord {
            entry_id: entry.entry_id.clone(),
            text: entry.text.clone(),
            payload: entry.payload.clone(),
            vector_b64: BASE64.encode(bytes),
        }
    }
}

impl TryFrom<PoolRecord> for PoolEntry {
    type Error = Error;

    fn try_from(record: PoolRecord) -> Result<PoolEntry> {
        let bytes = BASE64
            .decode(&record.vector_b64)
            .map_err(|e| Error::Config(format!("bad vector encoding: {e}")))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::Config("vector byte length not a multiple of 4".into()));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(PoolEntry {
            entry_id: record.entry_id,
            text: record.text,
            vector: EmbeddingVector::new(values),
            payload: record.payload,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{EmbeddingProvider, OfflineHashProvider};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pool_of(vectors: Vec<Vec<f32>>) -> RetrievalPool {
        let mut pool = RetrievalPool::new();
        for (i, values) in vectors.into_iter().enumerate() {
            pool.insert(PoolEntry {
                entry_id: format!("e{i:04}"),
                text: format!("text {i}"),
                vector: EmbeddingVector::new(values),
                payload: serde_json::json!({ "i": i }),
            })
            .unwrap();
        }
        pool
    }

    /// Exhaustive-scan oracle: score everything, sort by (-score, id).
    fn brute_force<'a>(
        pool: &'a RetrievalPool,
        query: &EmbeddingVector,
        k: usize,
    ) -> Vec<&'a str> {
        let mut all: Vec<(f32, &str)> = pool
            .entries()
            .iter()
            .map(|e| {
                let dot: f32 = e
                    .vector
                    .values()
                    .iter()
                    .zip(query.values())
                    .map(|(x, y)| x * y)
                    .sum();
                let na = e.vector.values().iter().map(|v| v * v).sum::<f32>().sqrt();
                let nb = query.values().iter().map(|v| v * v).sum::<f32>().sqrt();
                let score = if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    dot / (na * nb)
                };
                (score, e.entry_id.as_str())
            })
            .collect();
        all.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.1.cmp(b.1))
        });
        all.into_iter().take(k).map(|(_, id)| id).collect()
    }

    #[test]
    fn k_one_returns_global_max() {
        let pool = pool_of(vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0]]);
        let query = EmbeddingVector::new(vec![1.0, 0.0]);
        let hits = pool.top_k(&query, 1);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].entry.entry_id, "e0000");
    }

    #[test]
    fn k_beyond_pool_size_returns_whole_pool_sorted() {
        let pool = pool_of(vec![vec![0.1, 0.9], vec![1.0, 0.0], vec![0.5, 0.5]]);
        let query = EmbeddingVector::new(vec![1.0, 0.0]);
        let hits = pool.top_k(&query, pool.len() + 5);
        assert_eq!(hits.len(), 3);
        assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn empty_pool_returns_empty() {
        let pool = RetrievalPool::new();
        let query = EmbeddingVector::new(vec![1.0]);
        assert!(pool.top_k(&query, 3).is_empty());
    }

    #[test]
    fn ranking_matches_exhaustive_scan_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let vectors: Vec<Vec<f32>> = (0..1000)
            .map(|_| (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let pool = pool_of(vectors);
        let query =
            EmbeddingVector::new((0..16).map(|_| rng.gen_range(-1.0f32..1.0)).collect());
        for k in [1usize, 5, 50] {
            let got: Vec<&str> = pool
                .top_k(&query, k)
                .iter()
                .map(|s| s.entry.entry_id.as_str())
                .collect();
            assert_eq!(got, brute_force(&pool, &query, k), "k={k}");
        }
    }

    #[test]
    fn ranking_is_invariant_under_positive_query_rescaling() {
        let provider = OfflineHashProvider::default();
        let texts = ["alpha beta", "beta gamma", "gamma delta", "delta epsilon"];
        let mut pool = RetrievalPool::new();
        for (i, t) in texts.iter().enumerate() {
            pool.insert(PoolEntry {
                entry_id: format!("t{i}"),
                text: t.to_string(),
                vector: provider.embed(t).unwrap(),
                payload: serde_json::Value::Null,
            })
            .unwrap();
        }
        let query = provider.embed("beta").unwrap();
        let scaled =
            EmbeddingVector::new(query.values().iter().map(|v| v * 3.5).collect());
        let a: Vec<&str> = pool.top_k(&query, 4).iter().map(|s| s.entry.entry_id.as_str()).collect();
        let b: Vec<&str> = pool.top_k(&scaled, 4).iter().map(|s| s.entry.entry_id.as_str()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_entry_id_is_rejected() {
        let mut pool = RetrievalPool::new();
        let entry = PoolEntry {
            entry_id: "dup".into(),
            text: "x".into(),
            vector: EmbeddingVector::new(vec![1.0]),
            payload: serde_json::Value::Null,
        };
        pool.insert(entry.clone()).unwrap();
        assert!(pool.insert(entry).is_err());
    }

    #[test]
    fn snapshot_round_trip_preserves_entries() {
        let provider = OfflineHashProvider::default();
        let mut pool = RetrievalPool::new();
        for (i, text) in ["one", "two", "three"].iter().enumerate() {
            pool.insert(PoolEntry {
                entry_id: format!("s{i}"),
                text: text.to_string(),
                vector: provider.embed(text).unwrap(),
                payload: serde_json::json!({ "text": text }),
            })
            .unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.jsonl");
        pool.save(&path).unwrap();
        let loaded = RetrievalPool::load(&path).unwrap();
        assert_eq!(pool.entries(), loaded.entries());
        assert_eq!(loaded.get("s1").unwrap().text, "two");
    }
}

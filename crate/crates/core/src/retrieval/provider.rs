//! Embedding providers.
//!
//! The offline provider is a seeded random projection of token hash counts:
//! no model download, deterministic across runs, good enough to make cosine
//! thresholds meaningful on fixture-scale corpora. Runs record the provider
//! identity in the manifest so thresholds are interpreted per-provider.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EmbeddingVector;
use crate::error::Result;

/// Fixed dimension of the offline provider.
pub const OFFLINE_DIM: usize = 256;

/// Something that can turn text into a vector.
///
/// The contract is determinism under a fixed provider snapshot: same text,
/// same vector. Vectors are L2-normalized on ingestion.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;

    fn dim(&self) -> usize;

    /// Stable identity string recorded in run manifests.
    fn identity(&self) -> String;
}

/// Deterministic offline embedder: FNV-hash each token, expand every hash
/// into a seeded ±1 projection row, accumulate counts, normalize.
#[derive(Debug, Clone)]
pub struct OfflineHashProvider {
    seed: u64,
    dim: usize,
}

impl Default for OfflineHashProvider {
    fn default() -> Self {
        OfflineHashProvider::new(7)
    }
}

impl OfflineHashProvider {
    pub fn new(seed: u64) -> OfflineHashProvider {
        OfflineHashProvider {
            seed,
            dim: OFFLINE_DIM,
        }
    }

    /// Lowercased tokens: ASCII alphanumeric runs, plus one token per
    /// non-ASCII character so CJK text contributes per-character signals.
    fn tokenize(text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut current = String::new();
        for c in text.chars() {
            if c.is_ascii_alphanumeric() {
                current.extend(c.to_lowercase());
            } else {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                if !c.is_ascii() && !c.is_whitespace() {
                    tokens.push(c.to_string());
                }
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
        tokens
    }

    fn projection_row(&self, token_hash: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ token_hash)
    }
}

impl EmbeddingProvider for OfflineHashProvider {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let tokens = Self::tokenize(text);
        if tokens.is_empty() {
            // Zero-information vector: all-equal components pre-normalization.
            return Ok(EmbeddingVector::new(vec![1.0; self.dim]).normalized());
        }
        let mut acc = vec![0.0f32; self.dim];
        for token in &tokens {
            let mut rng = self.projection_row(fnv1a(token.as_bytes()));
            for slot in acc.iter_mut() {
                *slot += if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
        }
        Ok(EmbeddingVector::new(acc).normalized())
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> String {
        format!("offline-hash-v1/dim{}/seed{}", self.dim, self.seed)
    }
}

/// FNV-1a, 64-bit. Stable across runs and platforms, unlike the std hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::cosine;

    #[test]
    fn embedding_is_deterministic() {
        let provider = OfflineHashProvider::new(42);
        let a = provider.embed("does the awd version burn more fuel").unwrap();
        let b = provider.embed("does the awd version burn more fuel").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_texts_produce_distinct_vectors() {
        // Hash-projection oracle: on a fixture set of pairwise-distinct
        // texts, every pair differs in at least one coordinate.
        let provider = OfflineHashProvider::new(42);
        let texts = [
            "how much is the clearance model",
            "what is the fuel consumption",
            "can i book a test drive",
            "is breakfast included",
            "do you have rooms with a view",
            "seat heating availability",
        ];
        let vectors: Vec<_> = texts.iter().map(|t| provider.embed(t).unwrap()).collect();
        for i in 0..vectors.len() {
            for j in (i + 1)..vectors.len() {
                assert_ne!(vectors[i], vectors[j], "{} vs {}", texts[i], texts[j]);
            }
        }
    }

    #[test]
    fn empty_string_embeds_to_uniform_vector() {
        let provider = OfflineHashProvider::new(1);
        let v = provider.embed("").unwrap();
        let first = v.values()[0];
        assert!(v.values().iter().all(|&x| (x - first).abs() < 1e-9));
        assert!((v.l2_norm() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn vectors_are_unit_length() {
        let provider = OfflineHashProvider::default();
        let v = provider.embed("all three units are quattro ultra awd").unwrap();
        assert!((v.l2_norm() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn similar_texts_score_higher_than_unrelated() {
        let provider = OfflineHashProvider::default();
        let q = provider.embed("fuel consumption of the awd version").unwrap();
        let close = provider.embed("awd fuel consumption in the city").unwrap();
        let far = provider.embed("sea view room with breakfast buffet").unwrap();
        assert!(cosine(&q, &close) > cosine(&q, &far));
    }

    #[test]
    fn cjk_characters_tokenize_per_character() {
        let tokens = OfflineHashProvider::tokenize("新能源suv多少钱");
        assert!(tokens.contains(&"新".to_string()));
        assert!(tokens.contains(&"suv".to_string()));
        assert_eq!(tokens.len(), 7);
    }
}

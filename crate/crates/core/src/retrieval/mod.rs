//! Embedding provider abstraction and exact nearest-neighbor pools.
//!
//! Pools back QA alignment, persona matching, in-loop evidence retrieval, and
//! dialogue filtering. Similarity is cosine over L2-normalized vectors, so
//! thresholds are scale-free. Lookup is an exact scan: pools stay small at
//! desk scale and exactness keeps the oracles trivial.

mod kb;
mod pool;
mod provider;

pub use kb::{kb_lookup, KbEntry, KbRegistry, KnowledgeBase};
pub use pool::{PoolEntry, RetrievalPool, ScoredEntry};
pub use provider::{EmbeddingProvider, OfflineHashProvider, OFFLINE_DIM};

use serde::{Deserialize, Serialize};

/// A fixed-length real vector. Finite values; dimension is constant within a pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    /// Wrap raw components. Non-finite components are a programmer error.
    pub fn new(values: Vec<f32>) -> EmbeddingVector {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        EmbeddingVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn l2_norm(&self) -> f32 {
        self.values.iter().map(|v| v * v).sum::<f32>().sqrt()
    }

    /// Scale to unit length. A zero vector is returned unchanged.
    pub fn normalized(mut self) -> EmbeddingVector {
        let norm = self.l2_norm();
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
        self
    }

    /// Componentwise mean of several vectors, renormalized.
    ///
    /// The mean is order-insensitive, which is what makes aggregated dialogue
    /// representations stable under turn reordering of equal texts.
    pub fn normalized_mean(vectors: &[EmbeddingVector]) -> Option<EmbeddingVector> {
        let first = vectors.first()?;
        let dim = first.dim();
        let mut acc = vec![0.0f32; dim];
        for v in vectors {
            assert_eq!(v.dim(), dim, "mixed dimensions in mean");
            for (a, x) in acc.iter_mut().zip(v.values()) {
                *a += x;
            }
        }
        let n = vectors.len() as f32;
        for a in &mut acc {
            *a /= n;
        }
        Some(EmbeddingVector::new(acc).normalized())
    }
}

/// Cosine similarity in [-1, 1]. Symmetric; cosine(v, v) = 1 for nonzero v.
///
/// Both vectors must share a dimension. A zero vector yields the defined
/// result 0 with a warning rather than NaN.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f32 {
    assert_eq!(a.dim(), b.dim(), "cosine requires equal dimensions");
    let dot: f32 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    let na = a.l2_norm();
    let nb = b.l2_norm();
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine over a zero vector; returning 0");
        return 0.0;
    }
    dot / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_of_vector_with_itself_is_one() {
        let v = EmbeddingVector::new(vec![0.3, -1.2, 4.0]);
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_unit_vectors_have_zero_cosine() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]);
        let b = EmbeddingVector::new(vec![0.0, 1.0]);
        assert_eq!(cosine(&a, &b), 0.0);
    }

    #[test]
    fn cosine_matches_direct_formula_evaluation() {
        // ([1,2],[2,1]): dot = 4, norms = sqrt(5) each, cos = 4/5.
        let a = EmbeddingVector::new(vec![1.0, 2.0]);
        let b = EmbeddingVector::new(vec![2.0, 1.0]);
        assert!((cosine(&a, &b) - 0.8).abs() < 1e-6);
    }

    #[test]
    fn zero_vector_yields_defined_zero() {
        let a = EmbeddingVector::new(vec![0.0, 0.0]);
        let b = EmbeddingVector::new(vec![1.0, 1.0]);
        assert_eq!(cosine(&a, &b), 0.0);
    }

    #[test]
    fn cosine_is_symmetric() {
        let a = EmbeddingVector::new(vec![1.0, 2.0, 3.0]);
        let b = EmbeddingVector::new(vec![-2.0, 0.5, 1.0]);
        assert_eq!(cosine(&a, &b), cosine(&b, &a));
    }

    #[test]
    fn normalized_mean_of_one_is_the_normalized_vector() {
        let v = EmbeddingVector::new(vec![3.0, 4.0]);
        let mean = EmbeddingVector::normalized_mean(std::slice::from_ref(&v)).unwrap();
        assert!((mean.values()[0] - 0.6).abs() < 1e-6);
        assert!((mean.values()[1] - 0.8).abs() < 1e-6);
    }
}

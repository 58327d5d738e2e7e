//! Budget-controlled mixing of public and synthetic training dialogues.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::derive_seed;

/// Composition record written next to every mixed training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixManifest {
    pub budget: usize,
    pub synth_ratio: f64,
    pub synthetic_count: usize,
    pub public_count: usize,
    pub seed: u64,
}

/// Draws exactly `budget` items: round(synth_ratio * budget) synthetic plus
/// the remainder public, each sampled uniformly without replacement. The
/// output lists synthetic picks first, then public picks, both in pool order.
pub fn mix_training_budget<T: Clone>(
    public: &[T],
    synthetic: &[T],
    budget: usize,
    synth_ratio: f64,
    seed: u64,
) -> Result<(Vec<T>, MixManifest)> {
    if !(0.0..=1.0).contains(&synth_ratio) {
        return Err(Error::Precondition(format!(
            "synth_ratio must lie in [0, 1], got {synth_ratio}"
        )));
    }
    let synthetic_count = (synth_ratio * budget as f64).round() as usize;
    let public_count = budget - synthetic_count;
    if synthetic.len() < synthetic_count {
        return Err(Error::InsufficientPool {
            pool: "synthetic dialogues".to_string(),
            required: synthetic_count,
            available: synthetic.len(),
        });
    }
    if public.len() < public_count {
        return Err(Error::InsufficientPool {
            pool: "public dialogues".to_string(),
            required: public_count,
            available: public.len(),
        });
    }

    let draw = |pool: &[T], count: usize, label: &str| -> Vec<T> {
        if count == 0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label));
        let mut picked = rand::seq::index::sample(&mut rng, pool.len(), count).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| pool[i].clone()).collect()
    };
    let mut mixed = draw(synthetic, synthetic_count, "synthetic");
    mixed.extend(draw(public, public_count, "public"));

    Ok((
        mixed,
        MixManifest {
            budget,
            synth_ratio,
            synthetic_count,
            public_count,
            seed,
        },
    ))
}

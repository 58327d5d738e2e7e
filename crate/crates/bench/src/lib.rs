//! Synthetic workload builders shared by the criterion benches.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamforge_core::evaluation::{DialogueStateAnnotation, TurnState};
use streamforge_core::filter::DialogueRepresentation;
use streamforge_core::retrieval::{EmbeddingVector, PoolEntry, RetrievalPool};
use streamforge_core::schema::{Domain, Role, SessionQuadruplet, Turn};

pub fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    let mut values: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let norm = values.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-12);
    for v in &mut values {
        *v /= norm;
    }
    EmbeddingVector::new(values)
}

/// Representations drawn from a few cluster centroids, so the similarity
/// graph has realistic edge density instead of being empty or complete.
pub fn clustered_representations(n: usize, dim: usize, seed: u64) -> Vec<DialogueRepresentation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids: Vec<(EmbeddingVector, EmbeddingVector)> = (0..4)
        .map(|_| (random_unit_vector(&mut rng, dim), random_unit_vector(&mut rng, dim)))
        .collect();
    (0..n)
        .map(|i| {
            let (cu, ca) = &centroids[i % centroids.len()];
            let jitter = |base: &EmbeddingVector, rng: &mut ChaCha8Rng| {
                let mut values: Vec<f32> = base
                    .values()
                    .iter()
                    .map(|v| v + rng.gen_range(-0.05f32..0.05))
                    .collect();
                let norm = values.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-12);
                for v in &mut values {
                    *v /= norm;
                }
                EmbeddingVector::new(values)
            };
            DialogueRepresentation {
                dialogue_id: format!("dlg-{i:06}"),
                u_vec: jitter(cu, &mut rng),
                a_vec: jitter(ca, &mut rng),
            }
        })
        .collect()
}

pub fn random_pool(n: usize, dim: usize, seed: u64) -> RetrievalPool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = RetrievalPool::new();
    for i in 0..n {
        pool.insert(PoolEntry {
            entry_id: format!("e-{i:06}"),
            text: format!("entry {i}"),
            vector: random_unit_vector(&mut rng, dim),
            payload: serde_json::Value::Null,
        })
        .expect("bench entry ids are unique");
    }
    pool
}

pub fn synthetic_sessions(n: usize, turns: usize, seed: u64) -> Vec<SessionQuadruplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domains = [Domain::Automotive, Domain::Other("realestate".to_string())];
    (0..n)
        .map(|i| {
            let domain = domains[rng.gen_range(0..domains.len())].clone();
            let history = (0..turns)
                .map(|t| {
                    if t % 2 == 0 {
                        let mut turn = Turn::user(t, format!("user message {t} of {i}"));
                        turn.inform_block = Some(BTreeMap::from([(
                            format!("slot_{}", t % 5),
                            format!("value_{}", rng.gen_range(0..8)),
                        )]));
                        turn
                    } else {
                        Turn {
                            index: t,
                            role: Role::Agent,
                            text: format!("agent reply {t} of {i}"),
                            inform_block: None,
                            request_block: None,
                            evidence_ids: None,
                        }
                    }
                })
                .collect();
            SessionQuadruplet {
                dialogue_id: format!("dlg-{i:06}"),
                user_persona_id: "up-bench-0000".to_string(),
                agent_persona_id: "ap-bench-0000".to_string(),
                blueprint_id: "bp-bench-0000".to_string(),
                domain,
                history,
            }
        })
        .collect()
}

pub fn synthetic_annotations(n: usize, turns: usize, seed: u64) -> Vec<DialogueStateAnnotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut state: BTreeMap<String, String> = BTreeMap::new();
            let turns = (0..turns)
                .map(|t| {
                    state.insert(
                        format!("slot_{}", rng.gen_range(0..6)),
                        format!("value_{}", rng.gen_range(0..10)),
                    );
                    TurnState {
                        turn_index: t,
                        state: state.clone(),
                    }
                })
                .collect();
            DialogueStateAnnotation {
                dialogue_id: format!("dlg-{i:06}"),
                turns,
            }
        })
        .collect()
}

//! Builders for the retrieval pools the generation loop draws evidence from.
//!
//! Pool entries are keyed by the text retrieval matches against; the payload
//! carries the reply shown to the generator. Entry ids are index-based, so a
//! pool built from the same inputs is identical across runs.

use crate::error::Result;
use crate::ingest::QaPair;
use crate::retrieval::{EmbeddingProvider, PoolEntry, RetrievalPool};
use crate::schema::{Role, SeedDialogue};

/// Seed openings: the first user turn of each seed dialogue, keyed by its
/// own text. Used to rewrite openings around a persona's primary inquiry.
pub fn build_opening_pool(
    seeds: &[SeedDialogue],
    provider: &dyn EmbeddingProvider,
) -> Result<RetrievalPool> {
    let mut pool = RetrievalPool::new();
    for seed in seeds {
        let Some(first) = seed.turns.first() else {
            continue;
        };
        if first.role != Role::User {
            log::warn!("seed {} opens with the agent, skipped", seed.dialogue_id);
            continue;
        }
        pool.insert(PoolEntry {
            entry_id: format!("open-{}", seed.dialogue_id),
            text: first.text.clone(),
            vector: provider.embed(&first.text)?,
            payload: serde_json::json!({ "seed": seed.dialogue_id }),
        })?;
    }
    Ok(pool)
}

/// Expert evidence for agent generation: each pair's question is the key,
/// the paired expert response is the reply.
pub fn build_user_query_pool(
    pairs: &[QaPair],
    provider: &dyn EmbeddingProvider,
) -> Result<RetrievalPool> {
    let mut pool = RetrievalPool::new();
    for (i, pair) in pairs.iter().enumerate() {
        pool.insert(PoolEntry {
            entry_id: format!("arg-{i:05}"),
            text: pair.question.text.clone(),
            vector: provider.embed(&pair.question.text)?,
            payload: serde_json::json!({ "reply": pair.response.text }),
        })?;
    }
    Ok(pool)
}

/// Behavioral evidence for user simulation: an agent message is the key and
/// the user message that followed it is the reply. Pairs are linked when
/// consecutive and in ascending response order (a timestamp drop marks a
/// source boundary, across which no follow-up relation holds).
pub fn build_agent_message_pool(
    pairs: &[QaPair],
    provider: &dyn EmbeddingProvider,
) -> Result<RetrievalPool> {
    let mut pool = RetrievalPool::new();
    for (i, window) in pairs.windows(2).enumerate() {
        let (current, next) = (&window[0], &window[1]);
        if next.response.timestamp <= current.response.timestamp {
            continue;
        }
        pool.insert(PoolEntry {
            entry_id: format!("uus-{i:05}"),
            text: current.response.text.clone(),
            vector: provider.embed(&current.response.text)?,
            payload: serde_json::json!({ "reply": next.question.text }),
        })?;
    }
    Ok(pool)
}

//! Dialogue state and retrieved-evidence containers for the generation loop.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::retrieval::ScoredEntry;
use crate::schema::{Role, Turn};

/// Mutable per-session state threaded through the UUS/ARG loop.
///
/// `cumulative_inform` is the left-fold of all turn inform blocks in history
/// order; a later turn may overwrite a slot (an explicit user revision), but
/// slots are never removed. `pending_requests` holds only slots the agent has
/// asked for that the user has not yet informed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    pub history: Vec<Turn>,
    pub cumulative_inform: BTreeMap<String, String>,
    pub pending_requests: Vec<String>,
    pub current_stage: String,
    pub turn_budget_remaining: usize,
    /// Slot revisions observed so far: (turn index, slot, old value).
    pub revisions: Vec<(usize, String, String)>,
}

impl DialogueState {
    pub fn new(initial_stage: impl Into<String>, max_turns: usize) -> DialogueState {
        DialogueState {
            history: Vec::new(),
            cumulative_inform: BTreeMap::new(),
            pending_requests: Vec::new(),
            current_stage: initial_stage.into(),
            turn_budget_remaining: max_turns,
            revisions: Vec::new(),
        }
    }

    pub fn latest_user_text(&self) -> Option<&str> {
        self.history
            .iter()
            .rev()
            .find(|t| t.role == Role::User)
            .map(|t| t.text.as_str())
    }

    pub fn last_turn(&self) -> Option<&Turn> {
        self.history.last()
    }

    /// Appends a user turn: folds its inform delta into the cumulative state
    /// (logging overwrites as revisions) and clears answered requests.
    pub fn push_user_turn(&mut self, turn: Turn) {
        debug_assert_eq!(turn.role, Role::User);
        if let Some(delta) = &turn.inform_block {
            for (slot, value) in delta {
                if let Some(old) = self.cumulative_inform.get(slot) {
                    if old != value {
                        self.revisions.push((turn.index, slot.clone(), old.clone()));
                    }
                }
                self.cumulative_inform.insert(slot.clone(), value.clone());
            }
            self.pending_requests.retain(|slot| !delta.contains_key(slot));
        }
        self.turn_budget_remaining = self.turn_budget_remaining.saturating_sub(1);
        self.history.push(turn);
    }

    /// Appends an agent turn; its request block replaces pending requests,
    /// minus anything already informed.
    pub fn push_agent_turn(&mut self, turn: Turn) {
        debug_assert_eq!(turn.role, Role::Agent);
        self.pending_requests = turn
            .request_block
            .clone()
            .unwrap_or_default()
            .into_iter()
            .filter(|slot| !self.cumulative_inform.contains_key(slot))
            .collect();
        self.turn_budget_remaining = self.turn_budget_remaining.saturating_sub(1);
        self.history.push(turn);
    }

    /// Re-derives the cumulative inform from history and compares. True iff
    /// the incremental bookkeeping matches the left-fold definition.
    pub fn inform_fold_consistent(&self) -> bool {
        let mut fold: BTreeMap<String, String> = BTreeMap::new();
        for turn in &self.history {
            if let Some(delta) = &turn.inform_block {
                for (slot, value) in delta {
                    fold.insert(slot.clone(), value.clone());
                }
            }
        }
        fold == self.cumulative_inform
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    /// Real user responses that followed similar agent messages (E_u).
    UserReference,
    /// Expert responses paired with similar user queries (E_a).
    AgentReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub entry_id: String,
    pub text: String,
    pub payload: serde_json::Value,
    pub score: f32,
}

/// Retrieval results backing one generated turn, sorted by descending score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSet {
    pub kind: EvidenceKind,
    pub entries: Vec<EvidenceItem>,
}

impl EvidenceSet {
    pub fn empty(kind: EvidenceKind) -> EvidenceSet {
        EvidenceSet {
            kind,
            entries: Vec::new(),
        }
    }

    pub fn from_scored(kind: EvidenceKind, scored: Vec<ScoredEntry<'_>>) -> EvidenceSet {
        let mut entries: Vec<EvidenceItem> = scored
            .into_iter()
            .map(|s| EvidenceItem {
                entry_id: s.entry.entry_id.clone(),
                text: s.entry.text.clone(),
                payload: s.entry.payload.clone(),
                score: s.score,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.entry_id.cmp(&b.entry_id))
        });
        EvidenceSet { kind, entries }
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.entry_id.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inform(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn user_turn_folds_inform_and_clears_answered_requests() {
        let mut state = DialogueState::new("greeting", 10);
        let mut agent = Turn::agent(0, "Could you share your budget?");
        agent.request_block = Some(vec!["budget".to_string()]);
        state.push_agent_turn(agent);
        assert_eq!(state.pending_requests, vec!["budget"]);

        let mut user = Turn::user(1, "Around 200k.");
        user.inform_block = Some(inform(&[("budget", "200k")]));
        state.push_user_turn(user);

        assert!(state.pending_requests.is_empty());
        assert_eq!(state.cumulative_inform["budget"], "200k");
        assert_eq!(state.turn_budget_remaining, 8);
        assert!(state.inform_fold_consistent());
    }

    #[test]
    fn revision_overwrites_and_is_logged() {
        let mut state = DialogueState::new("greeting", 10);
        let mut first = Turn::user(0, "Budget 200k.");
        first.inform_block = Some(inform(&[("budget", "200k")]));
        state.push_user_turn(first);

        let mut second = Turn::user(1, "Actually make that 250k.");
        second.inform_block = Some(inform(&[("budget", "250k")]));
        state.push_user_turn(second);

        assert_eq!(state.cumulative_inform["budget"], "250k");
        assert_eq!(
            state.revisions,
            vec![(1, "budget".to_string(), "200k".to_string())]
        );
        assert!(state.inform_fold_consistent());
    }

    #[test]
    fn request_block_excludes_already_informed_slots() {
        let mut state = DialogueState::new("greeting", 10);
        let mut user = Turn::user(0, "Budget is 200k.");
        user.inform_block = Some(inform(&[("budget", "200k")]));
        state.push_user_turn(user);

        let mut agent = Turn::agent(1, "And your timeline? Budget too?");
        agent.request_block = Some(vec!["timeline".to_string(), "budget".to_string()]);
        state.push_agent_turn(agent);

        assert_eq!(state.pending_requests, vec!["timeline"]);
    }

    #[test]
    fn evidence_sorts_by_descending_score() {
        use crate::retrieval::{PoolEntry, RetrievalPool};
        use crate::retrieval::{EmbeddingProvider, OfflineHashProvider};

        let provider = OfflineHashProvider::default();
        let mut pool = RetrievalPool::new();
        for (id, text) in [("e1", "budget help"), ("e2", "fuel question"), ("e3", "greeting")] {
            pool.insert(PoolEntry {
                entry_id: id.to_string(),
                text: text.to_string(),
                vector: provider.embed(text).unwrap(),
                payload: serde_json::Value::Null,
            })
            .unwrap();
        }
        let query = provider.embed("question about fuel").unwrap();
        let evidence = EvidenceSet::from_scored(EvidenceKind::UserReference, pool.top_k(&query, 3));
        assert_eq!(evidence.entries.len(), 3);
        assert!(evidence.entries[0].score >= evidence.entries[1].score);
        assert!(evidence.entries[1].score >= evidence.entries[2].score);
        assert_eq!(evidence.entries[0].entry_id, "e2");
    }
}

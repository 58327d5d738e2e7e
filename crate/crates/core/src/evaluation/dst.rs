//! Dialogue state tracking metrics: joint goal accuracy and slot-value F1.
//!
//! Annotations carry the cumulative state at each user turn. Gold and
//! predicted sets must align exactly (same dialogues, same turn indices);
//! anything unaligned is an error naming every offender rather than a
//! silently skipped record.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Role, SessionQuadruplet};
use crate::util::round2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnState {
    pub turn_index: usize,
    /// Cumulative slot → value mapping as of this turn.
    pub state: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueStateAnnotation {
    pub dialogue_id: String,
    pub turns: Vec<TurnState>,
}

impl DialogueStateAnnotation {
    /// Turn indices must be strictly increasing.
    pub fn check(&self) -> Result<()> {
        for pair in self.turns.windows(2) {
            if pair[1].turn_index <= pair[0].turn_index {
                return Err(Error::Precondition(format!(
                    "annotation {}: turn indices not strictly increasing ({} then {})",
                    self.dialogue_id, pair[0].turn_index, pair[1].turn_index
                )));
            }
        }
        Ok(())
    }
}

/// Reconstructs gold state annotations from a generated session by folding
/// the user-turn inform deltas, overwriting on revision.
pub fn annotation_from_session(session: &SessionQuadruplet) -> DialogueStateAnnotation {
    let mut cumulative: BTreeMap<String, String> = BTreeMap::new();
    let mut turns = Vec::new();
    for turn in &session.history {
        if turn.role != Role::User {
            continue;
        }
        if let Some(block) = &turn.inform_block {
            for (slot, value) in block {
                cumulative.insert(slot.clone(), value.clone());
            }
        }
        turns.push(TurnState {
            turn_index: turn.index,
            state: cumulative.clone(),
        });
    }
    DialogueStateAnnotation {
        dialogue_id: session.dialogue_id.clone(),
        turns,
    }
}

/// Whitespace/case normalization applied before any value comparison.
fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn normalized_state(state: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    state
        .iter()
        .map(|(slot, value)| (normalize(slot), normalize(value)))
        .collect()
}

/// Pairs gold and predicted turns; unaligned dialogues or turn indices
/// produce an Alignment error listing every offender.
fn align<'a>(
    gold: &'a [DialogueStateAnnotation],
    pred: &'a [DialogueStateAnnotation],
) -> Result<Vec<(&'a TurnState, &'a TurnState)>> {
    for set in [gold, pred] {
        for annotation in set {
            annotation.check()?;
        }
    }
    let gold_ids: BTreeMap<&str, &DialogueStateAnnotation> = gold
        .iter()
        .map(|a| (a.dialogue_id.as_str(), a))
        .collect();
    let pred_ids: BTreeMap<&str, &DialogueStateAnnotation> = pred
        .iter()
        .map(|a| (a.dialogue_id.as_str(), a))
        .collect();

    let mut offenders: Vec<String> = Vec::new();
    for id in gold_ids.keys() {
        if !pred_ids.contains_key(id) {
            offenders.push(format!("{id} (missing in predictions)"));
        }
    }
    for id in pred_ids.keys() {
        if !gold_ids.contains_key(id) {
            offenders.push(format!("{id} (missing in gold)"));
        }
    }

    let mut pairs = Vec::new();
    for (id, g) in &gold_ids {
        let Some(p) = pred_ids.get(id) else { continue };
        let g_turns: BTreeMap<usize, &TurnState> =
            g.turns.iter().map(|t| (t.turn_index, t)).collect();
        let p_turns: BTreeMap<usize, &TurnState> =
            p.turns.iter().map(|t| (t.turn_index, t)).collect();
        for turn in g_turns.keys() {
            if !p_turns.contains_key(turn) {
                offenders.push(format!("{id}@{turn} (missing in predictions)"));
            }
        }
        for turn in p_turns.keys() {
            if !g_turns.contains_key(turn) {
                offenders.push(format!("{id}@{turn} (missing in gold)"));
            }
        }
        for (turn, g_state) in &g_turns {
            if let Some(p_state) = p_turns.get(turn) {
                pairs.push((*g_state, *p_state));
            }
        }
    }
    if !offenders.is_empty() {
        offenders.sort();
        return Err(Error::Alignment { offenders });
    }
    Ok(pairs)
}

/// Joint goal accuracy: the percentage of turns whose predicted cumulative
/// state equals the gold state exactly (after normalization). Turns where
/// both states are empty count as matches. Rounded to 2 decimals.
pub fn joint_goal_accuracy(
    gold: &[DialogueStateAnnotation],
    pred: &[DialogueStateAnnotation],
) -> Result<f64> {
    let pairs = align(gold, pred)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let matches = pairs
        .iter()
        .filter(|(g, p)| normalized_state(&g.state) == normalized_state(&p.state))
        .count();
    Ok(round2(100.0 * matches as f64 / pairs.len() as f64))
}

/// Micro-averaged precision/recall/F1 over (turn, slot, value) triples, as
/// percentages rounded to 2 decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DstScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn slot_value_f1(
    gold: &[DialogueStateAnnotation],
    pred: &[DialogueStateAnnotation],
) -> Result<DstScores> {
    let pairs = align(gold, pred)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (g, p) in &pairs {
        let g_triples: BTreeSet<(String, String)> = normalized_state(&g.state)
            .into_iter()
            .collect();
        let p_triples: BTreeSet<(String, String)> = normalized_state(&p.state)
            .into_iter()
            .collect();
        tp += g_triples.intersection(&p_triples).count();
        fp += p_triples.difference(&g_triples).count();
        fn_ += g_triples.difference(&p_triples).count();
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(DstScores {
        precision: round2(100.0 * precision),
        recall: round2(100.0 * recall),
        f1: round2(100.0 * f1),
    })
}

//! Blind judge batches: anonymized export with a separate attribution key,
//! and score aggregation back onto sources.
//!
//! The batch itself never carries a source label, dialogue id, persona id,
//! or any other provenance-revealing field; attribution lives only in the
//! key file, which stays with the experimenter.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Role, SessionQuadruplet};
use crate::util::round2;

/// The six intrinsic quality dimensions, scored 1 to 10.
pub const JUDGE_DIMENSIONS: [&str; 6] = [
    "Coherence",
    "Informativeness",
    "Naturalness",
    "Diversity",
    "Flexibility",
    "Overall Quality",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeTurn {
    pub role: Role,
    pub text: String,
}

/// One anonymized dialogue: position index and bare turns, nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeItem {
    pub item_index: usize,
    pub turns: Vec<JudgeTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeBatch {
    pub items: Vec<JudgeItem>,
    pub dimensions: Vec<String>,
    pub scale_min: u8,
    pub scale_max: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeKeyEntry {
    pub item_index: usize,
    pub source: String,
    pub dialogue_id: String,
}

/// item index → provenance mapping, written separately from the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeKey {
    pub entries: Vec<JudgeKeyEntry>,
}

/// Anonymizes and shuffles sessions from two or more sources into a judge
/// batch plus the key file for later attribution. The permutation is a pure
/// function of the seed and the (sorted) input layout.
pub fn export_judge_batch(
    sources: &BTreeMap<String, Vec<SessionQuadruplet>>,
    seed: u64,
) -> Result<(JudgeBatch, JudgeKey)> {
    if sources.len() < 2 {
        return Err(Error::Precondition(format!(
            "judge export requires at least 2 sources, got {}",
            sources.len()
        )));
    }
    let mut flattened: Vec<(&str, &SessionQuadruplet)> = Vec::new();
    for (source, sessions) in sources {
        for session in sessions {
            flattened.push((source.as_str(), session));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    flattened.shuffle(&mut rng);

    let mut items = Vec::with_capacity(flattened.len());
    let mut entries = Vec::with_capacity(flattened.len());
    for (item_index, (source, session)) in flattened.into_iter().enumerate() {
        items.push(JudgeItem {
            item_index,
            turns: session
                .history
                .iter()
                .map(|t| JudgeTurn {
                    role: t.role,
                    text: t.text.clone(),
                })
                .collect(),
        });
        entries.push(JudgeKeyEntry {
            item_index,
            source: source.to_string(),
            dialogue_id: session.dialogue_id.clone(),
        });
    }
    Ok((
        JudgeBatch {
            items,
            dimensions: JUDGE_DIMENSIONS.iter().map(|d| d.to_string()).collect(),
            scale_min: 1,
            scale_max: 10,
        },
        JudgeKey { entries },
    ))
}

/// One judge's scores for one batch item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScoreRecord {
    pub item_index: usize,
    pub scores: BTreeMap<String, f64>,
}

/// A judge's complete score file for a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScoreFile {
    pub judge: String,
    pub records: Vec<JudgeScoreRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub source: String,
    pub dimension: String,
    pub judge: String,
    pub mean: f64,
    /// Items that contributed to the mean.
    pub scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeAggregate {
    pub rows: Vec<AggregateRow>,
    /// Unscored (judge, item, dimension) combinations; reported, never
    /// imputed.
    pub missing: Vec<String>,
}

/// De-anonymizes score files through the key and averages per
/// (source, dimension, judge), at 2 decimals.
pub fn aggregate_judge_scores(
    scores: &[JudgeScoreFile],
    key: &JudgeKey,
    dimensions: &[String],
) -> Result<JudgeAggregate> {
    let source_of: BTreeMap<usize, &str> = key
        .entries
        .iter()
        .map(|e| (e.item_index, e.source.as_str()))
        .collect();

    let mut sums: BTreeMap<(String, String, String), (f64, usize)> = BTreeMap::new();
    let mut missing: Vec<String> = Vec::new();
    for file in scores {
        let by_index: BTreeMap<usize, &JudgeScoreRecord> =
            file.records.iter().map(|r| (r.item_index, r)).collect();
        for record in &file.records {
            if !source_of.contains_key(&record.item_index) {
                return Err(Error::Precondition(format!(
                    "judge {} scored unknown item index {}",
                    file.judge, record.item_index
                )));
            }
        }
        for (item_index, source) in &source_of {
            let record = by_index.get(item_index);
            for dimension in dimensions {
                match record.and_then(|r| r.scores.get(dimension)) {
                    Some(score) => {
                        let entry = sums
                            .entry((
                                source.to_string(),
                                dimension.clone(),
                                file.judge.clone(),
                            ))
                            .or_insert((0.0, 0));
                        entry.0 += score;
                        entry.1 += 1;
                    }
                    None => missing.push(format!(
                        "judge {}: item {item_index} missing {dimension}",
                        file.judge
                    )),
                }
            }
        }
    }

    let rows = sums
        .into_iter()
        .map(|((source, dimension, judge), (sum, count))| AggregateRow {
            source,
            dimension,
            judge,
            mean: round2(sum / count as f64),
            scored: count,
        })
        .collect();
    Ok(JudgeAggregate { rows, missing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Domain, Turn};

    fn session(id: &str, text: &str) -> SessionQuadruplet {
        SessionQuadruplet {
            dialogue_id: id.to_string(),
            user_persona_id: "up-0".to_string(),
            agent_persona_id: "ap-0".to_string(),
            blueprint_id: "bp-0".to_string(),
            domain: Domain::Automotive,
            history: vec![Turn::user(0, text), Turn::agent(1, "Certainly.")],
        }
    }

    fn two_sources() -> BTreeMap<String, Vec<SessionQuadruplet>> {
        let mut sources = BTreeMap::new();
        sources.insert(
            "alpha".to_string(),
            (0..5).map(|i| session(&format!("dlg-a{i}"), "question one")).collect(),
        );
        sources.insert(
            "beta".to_string(),
            (0..5).map(|i| session(&format!("dlg-b{i}"), "question two")).collect(),
        );
        sources
    }

    #[test]
    fn export_anonymizes_and_keys_every_item() {
        let (batch, key) = export_judge_batch(&two_sources(), 7).unwrap();
        assert_eq!(batch.items.len(), 10);
        assert_eq!(key.entries.len(), 10);
        assert_eq!(batch.dimensions.len(), 6);
        assert_eq!((batch.scale_min, batch.scale_max), (1, 10));
        for (i, item) in batch.items.iter().enumerate() {
            assert_eq!(item.item_index, i);
            assert_eq!(key.entries[i].item_index, i);
        }
        // Byte scan: no source label, dialogue id, or persona id leaks.
        let serialized = serde_json::to_string(&batch).unwrap();
        for needle in ["alpha", "beta", "dlg-", "up-0", "ap-0", "bp-0", "source"] {
            assert!(!serialized.contains(needle), "leaked `{needle}`");
        }
    }

    #[test]
    fn permutation_is_reproducible_from_the_seed() {
        let (_, key1) = export_judge_batch(&two_sources(), 7).unwrap();
        let (_, key2) = export_judge_batch(&two_sources(), 7).unwrap();
        assert_eq!(key1, key2);
    }

    #[test]
    fn single_source_is_rejected() {
        let mut sources = BTreeMap::new();
        sources.insert("alpha".to_string(), vec![session("d0", "q")]);
        assert!(matches!(
            export_judge_batch(&sources, 7).unwrap_err(),
            Error::Precondition(_)
        ));
    }

    fn dims() -> Vec<String> {
        JUDGE_DIMENSIONS.iter().map(|d| d.to_string()).collect()
    }

    #[test]
    fn two_scores_average_to_their_mean() {
        let key = JudgeKey {
            entries: vec![
                JudgeKeyEntry {
                    item_index: 0,
                    source: "alpha".to_string(),
                    dialogue_id: "d0".to_string(),
                },
                JudgeKeyEntry {
                    item_index: 1,
                    source: "alpha".to_string(),
                    dialogue_id: "d1".to_string(),
                },
            ],
        };
        let scores = vec![JudgeScoreFile {
            judge: "j1".to_string(),
            records: vec![
                JudgeScoreRecord {
                    item_index: 0,
                    scores: [("Coherence".to_string(), 6.0)].into_iter().collect(),
                },
                JudgeScoreRecord {
                    item_index: 1,
                    scores: [("Coherence".to_string(), 8.0)].into_iter().collect(),
                },
            ],
        }];
        let agg =
            aggregate_judge_scores(&scores, &key, &["Coherence".to_string()]).unwrap();
        assert_eq!(agg.rows.len(), 1);
        assert_eq!(agg.rows[0].mean, 7.00);
        assert_eq!(agg.rows[0].scored, 2);
        assert!(agg.missing.is_empty());
    }

    #[test]
    fn export_score_aggregate_round_trip_attributes_correctly() {
        let (batch, key) = export_judge_batch(&two_sources(), 13).unwrap();
        // Scripted judge: alpha items get 8, beta items get 4 on every
        // dimension. The scorer uses the key, mimicking ground truth.
        let by_index: BTreeMap<usize, &str> = key
            .entries
            .iter()
            .map(|e| (e.item_index, e.source.as_str()))
            .collect();
        let records: Vec<JudgeScoreRecord> = batch
            .items
            .iter()
            .map(|item| JudgeScoreRecord {
                item_index: item.item_index,
                scores: dims()
                    .into_iter()
                    .map(|d| {
                        (
                            d,
                            if by_index[&item.item_index] == "alpha" {
                                8.0
                            } else {
                                4.0
                            },
                        )
                    })
                    .collect(),
            })
            .collect();
        let scores = vec![JudgeScoreFile {
            judge: "j1".to_string(),
            records,
        }];
        let agg = aggregate_judge_scores(&scores, &key, &dims()).unwrap();
        assert_eq!(agg.rows.len(), 12, "2 sources x 6 dimensions x 1 judge");
        for row in &agg.rows {
            let expected = if row.source == "alpha" { 8.0 } else { 4.0 };
            assert_eq!(row.mean, expected, "{row:?}");
            assert_eq!(row.scored, 5);
        }
        assert!(agg.missing.is_empty());
    }

    #[test]
    fn missing_dimension_is_reported_not_imputed() {
        let key = JudgeKey {
            entries: vec![JudgeKeyEntry {
                item_index: 0,
                source: "alpha".to_string(),
                dialogue_id: "d0".to_string(),
            }],
        };
        let scores = vec![JudgeScoreFile {
            judge: "j1".to_string(),
            records: vec![JudgeScoreRecord {
                item_index: 0,
                scores: [("Coherence".to_string(), 6.0)].into_iter().collect(),
            }],
        }];
        let agg = aggregate_judge_scores(
            &scores,
            &key,
            &["Coherence".to_string(), "Naturalness".to_string()],
        )
        .unwrap();
        assert_eq!(agg.rows.len(), 1);
        assert_eq!(agg.missing, vec!["judge j1: item 0 missing Naturalness"]);
    }

    #[test]
    fn unknown_item_index_is_an_error() {
        let key = JudgeKey {
            entries: vec![JudgeKeyEntry {
                item_index: 0,
                source: "alpha".to_string(),
                dialogue_id: "d0".to_string(),
            }],
        };
        let scores = vec![JudgeScoreFile {
            judge: "j1".to_string(),
            records: vec![JudgeScoreRecord {
                item_index: 99,
                scores: BTreeMap::new(),
            }],
        }];
        assert!(aggregate_judge_scores(&scores, &key, &dims()).is_err());
    }
}

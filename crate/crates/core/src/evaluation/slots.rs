//! Slot distribution analytics: per-slot coverage and value diversity, with
//! the two summary statistics used to compare data sources.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::schema::{Role, SessionQuadruplet, SlotOntology};
use crate::util::round2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDistributionRow {
    pub slot: String,
    /// Share of dialogues containing the slot, in percent.
    pub coverage_pct: f64,
    /// Distinct values observed for the slot across all dialogues.
    pub distinct_values: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDistributionTable {
    pub rows: Vec<SlotDistributionRow>,
    /// Population variance of the coverage fractions, times 100.
    pub coverage_variance: f64,
    /// Arithmetic mean of the distinct-value counts.
    pub avg_values: f64,
}

impl SlotDistributionTable {
    /// Builds the table from precomputed columns. Coverage comes in percent,
    /// exactly as published.
    pub fn from_columns(
        slots: &[String],
        coverage_pct: &[f64],
        distinct_values: &[usize],
    ) -> SlotDistributionTable {
        assert_eq!(slots.len(), coverage_pct.len());
        assert_eq!(slots.len(), distinct_values.len());
        let rows: Vec<SlotDistributionRow> = slots
            .iter()
            .zip(coverage_pct)
            .zip(distinct_values)
            .map(|((slot, pct), values)| SlotDistributionRow {
                slot: slot.clone(),
                coverage_pct: *pct,
                distinct_values: *values,
            })
            .collect();
        let (coverage_variance, avg_values) = summarize(&rows);
        SlotDistributionTable {
            rows,
            coverage_variance,
            avg_values,
        }
    }
}

fn summarize(rows: &[SlotDistributionRow]) -> (f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0);
    }
    let n = rows.len() as f64;
    let fractions: Vec<f64> = rows.iter().map(|r| r.coverage_pct / 100.0).collect();
    let mean = fractions.iter().sum::<f64>() / n;
    let variance = fractions.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / n;
    let avg_values = rows.iter().map(|r| r.distinct_values as f64).sum::<f64>() / n;
    (round2(variance * 100.0), round2(avg_values))
}

fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Computes coverage and value diversity per ontology slot over a dialogue
/// set. A dialogue covers a slot when any of its user turns informs it.
pub fn slot_distribution(
    dialogues: &[SessionQuadruplet],
    ontology: &SlotOntology,
) -> SlotDistributionTable {
    let mut covering: BTreeMap<&str, usize> = BTreeMap::new();
    let mut values: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for slot in &ontology.slots {
        covering.insert(slot, 0);
        values.insert(slot, BTreeSet::new());
    }
    for dialogue in dialogues {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for turn in &dialogue.history {
            if turn.role != Role::User {
                continue;
            }
            let Some(block) = &turn.inform_block else {
                continue;
            };
            for (slot, value) in block {
                let Some(set) = values.get_mut(slot.as_str()) else {
                    continue;
                };
                set.insert(normalize(value));
                seen.insert(ontology
                    .slots
                    .iter()
                    .find(|s| *s == slot)
                    .expect("slot present in values map")
                    .as_str());
            }
        }
        for slot in seen {
            *covering.get_mut(slot).expect("initialized") += 1;
        }
    }
    let total = dialogues.len() as f64;
    let rows: Vec<SlotDistributionRow> = ontology
        .slots
        .iter()
        .map(|slot| SlotDistributionRow {
            slot: slot.clone(),
            coverage_pct: if dialogues.is_empty() {
                0.0
            } else {
                round2(100.0 * covering[slot.as_str()] as f64 / total)
            },
            distinct_values: values[slot.as_str()].len(),
        })
        .collect();
    let (coverage_variance, avg_values) = summarize(&rows);
    SlotDistributionTable {
        rows,
        coverage_variance,
        avg_values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Domain, Turn};

    pub(crate) const TABLE_SLOTS: [&str; 10] = [
        "Power Level",
        "Manufacturer",
        "Seat Count",
        "Price Range",
        "Fuel Consumption",
        "Vehicle Class",
        "Energy Type",
        "Body Type",
        "Series",
        "Drivetrain",
    ];

    fn table(coverage: [f64; 10], values: [usize; 10]) -> SlotDistributionTable {
        let slots: Vec<String> = TABLE_SLOTS.iter().map(|s| s.to_string()).collect();
        SlotDistributionTable::from_columns(&slots, &coverage, &values)
    }

    #[test]
    fn published_train_column_summaries() {
        let t = table(
            [5.13, 19.71, 28.53, 39.90, 0.16, 19.71, 20.35, 79.17, 94.07, 21.31],
            [2, 3, 3, 4, 1, 4, 2, 4, 27, 2],
        );
        assert_eq!(t.coverage_variance, 8.43);
        assert_eq!(t.avg_values, 5.2);
    }

    #[test]
    fn published_baseline_column_summaries() {
        let t = table(
            [0.32, 24.20, 36.22, 40.22, 0.00, 20.35, 20.51, 85.42, 82.05, 20.83],
            [1, 5, 6, 6, 0, 5, 3, 6, 34, 2],
        );
        assert_eq!(t.coverage_variance, 7.91);
        assert_eq!(t.avg_values, 6.8);
    }

    #[test]
    fn published_seed_column_summaries() {
        let t = table(
            [10.69, 40.25, 46.54, 98.11, 37.11, 31.45, 37.74, 88.05, 86.79, 47.17],
            [15, 11, 7, 55, 36, 8, 5, 7, 36, 4],
        );
        assert_eq!(t.coverage_variance, 7.38);
        assert_eq!(t.avg_values, 18.4);
    }

    #[test]
    fn published_stream_column_summaries() {
        let t = table(
            [42.14, 58.49, 4.40, 70.44, 3.14, 5.03, 8.81, 28.93, 100.00, 31.45],
            [29, 11, 2, 71, 5, 3, 4, 6, 76, 4],
        );
        assert_eq!(t.coverage_variance, 9.67);
        assert_eq!(t.avg_values, 21.1);
    }

    #[test]
    fn published_hybrid_column_summaries() {
        let t = table(
            [26.42, 57.86, 27.67, 88.68, 11.32, 29.56, 23.27, 79.25, 92.45, 38.99],
            [27, 11, 7, 80, 18, 10, 5, 9, 73, 2],
        );
        assert_eq!(t.coverage_variance, 7.96);
        assert_eq!(t.avg_values, 24.2);
    }

    #[test]
    fn uniform_coverage_has_zero_variance() {
        let t = table([100.0; 10], [1; 10]);
        assert_eq!(t.coverage_variance, 0.0);
        assert_eq!(t.avg_values, 1.0);
    }

    fn dialogue(id: &str, informs: &[&[(&str, &str)]]) -> SessionQuadruplet {
        let mut history = Vec::new();
        for (i, block) in informs.iter().enumerate() {
            let mut user = Turn::user(2 * i, "text");
            if !block.is_empty() {
                user.inform_block = Some(
                    block
                        .iter()
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .collect(),
                );
            }
            history.push(user);
            history.push(Turn::agent(2 * i + 1, "reply"));
        }
        SessionQuadruplet {
            dialogue_id: id.to_string(),
            user_persona_id: "up".to_string(),
            agent_persona_id: "ap".to_string(),
            blueprint_id: "bp".to_string(),
            domain: Domain::Automotive,
            history,
        }
    }

    #[test]
    fn coverage_counts_dialogues_not_turns() {
        let ontology = SlotOntology {
            domain: Domain::Automotive,
            slots: vec!["budget".to_string(), "intent".to_string()],
        };
        let dialogues = vec![
            // budget informed twice in one dialogue: counts once.
            dialogue("d0", &[&[("budget", "low")], &[("budget", "mid")]]),
            dialogue("d1", &[&[("intent", "buy")]]),
        ];
        let t = slot_distribution(&dialogues, &ontology);
        assert_eq!(t.rows[0].slot, "budget");
        assert_eq!(t.rows[0].coverage_pct, 50.0);
        assert_eq!(t.rows[0].distinct_values, 2);
        assert_eq!(t.rows[1].coverage_pct, 50.0);
        assert_eq!(t.rows[1].distinct_values, 1);
    }

    #[test]
    fn slots_outside_the_ontology_are_ignored() {
        let ontology = SlotOntology {
            domain: Domain::Automotive,
            slots: vec!["budget".to_string()],
        };
        let dialogues = vec![dialogue("d0", &[&[("color_of_sky", "blue")]])];
        let t = slot_distribution(&dialogues, &ontology);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].coverage_pct, 0.0);
    }

    #[test]
    fn value_normalization_merges_case_variants() {
        let ontology = SlotOntology {
            domain: Domain::Automotive,
            slots: vec!["budget".to_string()],
        };
        let dialogues = vec![
            dialogue("d0", &[&[("budget", "Entry Level")]]),
            dialogue("d1", &[&[("budget", "entry  level")]]),
        ];
        let t = slot_distribution(&dialogues, &ontology);
        assert_eq!(t.rows[0].distinct_values, 1);
        assert_eq!(t.rows[0].coverage_pct, 100.0);
    }
}

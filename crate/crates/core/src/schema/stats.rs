//! Corpus statistics: dialogue and turn counts per domain, with the average
//! turns-per-dialogue figure reported at two decimals.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::SessionQuadruplet;

/// Counts for one domain (or for the whole corpus).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainCounts {
    pub dialogue_count: u64,
    pub turn_count: u64,
}

impl DomainCounts {
    pub fn new(dialogue_count: u64, turn_count: u64) -> DomainCounts {
        DomainCounts {
            dialogue_count,
            turn_count,
        }
    }

    /// Turns per dialogue; defined as 0 for an empty domain.
    pub fn avg_turns(&self) -> f64 {
        if self.dialogue_count == 0 {
            0.0
        } else {
            self.turn_count as f64 / self.dialogue_count as f64
        }
    }

    /// The average formatted at the reported precision (two decimals).
    pub fn avg_turns_2dp(&self) -> String {
        format!("{:.2}", self.avg_turns())
    }

    pub fn add(&mut self, other: DomainCounts) {
        self.dialogue_count += other.dialogue_count;
        self.turn_count += other.turn_count;
    }
}

/// Per-domain and total corpus counts. Totals always equal the sum of the
/// per-domain values; merging is an associative componentwise add.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub per_domain: BTreeMap<String, DomainCounts>,
    pub total: DomainCounts,
}

impl DatasetStats {
    pub fn new() -> DatasetStats {
        DatasetStats::default()
    }

    /// Fold one session into the counts.
    pub fn observe(&mut self, record: &SessionQuadruplet) {
        self.add_counts(record.domain.label(), 1, record.history.len() as u64);
    }

    /// Add raw counts for a domain; used both by the fold and when feeding
    /// externally reported tallies.
    pub fn add_counts(&mut self, domain: &str, dialogues: u64, turns: u64) {
        let entry = self.per_domain.entry(domain.to_string()).or_default();
        entry.dialogue_count += dialogues;
        entry.turn_count += turns;
        self.total.dialogue_count += dialogues;
        self.total.turn_count += turns;
    }

    /// Componentwise merge; associative and commutative.
    pub fn merge(&mut self, other: &DatasetStats) {
        for (domain, counts) in &other.per_domain {
            self.add_counts(domain, counts.dialogue_count, counts.turn_count);
        }
    }

    pub fn domain(&self, label: &str) -> DomainCounts {
        self.per_domain.get(label).copied().unwrap_or_default()
    }

    /// Render the stats as an aligned text table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let header = format!(
            "{:<12} {:>10} {:>10} {:>20}\n",
            "Domain", "Dialogues", "Turns", "Avg. Turns/Dialogue"
        );
        out.push_str(&header);
        for (domain, counts) in &self.per_domain {
            out.push_str(&format!(
                "{:<12} {:>10} {:>10} {:>20}\n",
                domain,
                counts.dialogue_count,
                counts.turn_count,
                counts.avg_turns_2dp()
            ));
        }
        out.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>20}\n",
            "total",
            self.total.dialogue_count,
            self.total.turn_count,
            self.total.avg_turns_2dp()
        ));
        out
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_table())
    }
}

/// Fold a stream of sessions into corpus statistics. An empty stream yields
/// zero counts and an average defined as 0.
pub fn compute_dataset_stats<'a, I>(records: I) -> DatasetStats
where
    I: IntoIterator<Item = &'a SessionQuadruplet>,
{
    let mut stats = DatasetStats::new();
    for record in records {
        stats.observe(record);
    }
    stats
}

//! Phase 1: distills atomic interaction signals from raw source archives.
//!
//! A source archive is a directory per source holding a `meta.json` record,
//! a timestamped `transcript.txt`, and a `comments.tsv`. The phase filters
//! sources, denoises comments into question signals, normalizes transcripts
//! into response signals, aligns question/response pairs, tags response
//! strategies, and anonymizes account metadata.

mod account;
mod align;
mod archive;
mod clean;
mod filter;
mod strategy;

pub use account::{extract_account_metadata, RawProfile};
pub use align::{align_qa, check_entity_consistency, EmbeddingScorer, Mismatch, SemanticScorer};
pub use archive::{ingest_sources, load_source_dir, IngestOptions, IngestOutput, SourceRecord};
pub use clean::{denoise_comments, normalize_transcript, CommentCleanConfig, DomainLexicon, Edit, LexiconScope, RawComment};
pub use filter::{filter_sources, FilterConfig, Rejection};
pub use strategy::{tag_strategy, StrategyTaxonomy, TaxonomyRule};

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::schema::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    WebPage,
    LiveStream,
    ShortVideo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFlag {
    AdvertisingOnly,
    EntertainmentOnly,
}

/// One element of the input stream: a candidate source with the metadata the
/// filter stage needs and a pointer to its payload directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceItem {
    pub source_id: String,
    pub kind: SourceKind,
    pub domain: Domain,
    pub category_tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certification: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewer_count: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<SourceFlag>,
    pub payload_path: PathBuf,
}

/// A cleaned user question (element of Q_u).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSignal {
    pub text: String,
    /// Seconds from stream start; absent for static sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
    pub author_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Host,
    Staff,
}

/// A normalized host/staff utterance (element of R_a).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSignal {
    pub text: String,
    pub timestamp: f64,
    pub speaker: Speaker,
}

/// An aligned question/response pair (element of P_qa). Retained pairs
/// satisfy temporal proximity, semantic relevance, and entity consistency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: QuestionSignal,
    pub response: ResponseSignal,
    pub semantic_score: f64,
    pub time_gap: f64,
    pub entity_consistent: bool,
}

/// A dialogue-strategy label over one response (element of S_tag).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTag {
    pub label: String,
    pub confidence: f64,
    /// Reference to the tagged response, `source_id@timestamp`.
    pub span: String,
}

/// Anonymized account context (element of I_acc).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountMetadata {
    pub account_id_hash: String,
    pub profile_summary: String,
    pub certifications: Vec<String>,
    pub service_scope_hints: Vec<String>,
}

/// The five signal families extracted for one domain.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AtomicSignals {
    pub questions: Vec<QuestionSignal>,
    pub responses: Vec<ResponseSignal>,
    pub qa_pairs: Vec<QaPair>,
    pub strategy_tags: Vec<StrategyTag>,
    pub accounts: Vec<AccountMetadata>,
}

impl AtomicSignals {
    pub fn merge(&mut self, other: AtomicSignals) {
        self.questions.extend(other.questions);
        self.responses.extend(other.responses);
        self.qa_pairs.extend(other.qa_pairs);
        self.strategy_tags.extend(other.strategy_tags);
        self.accounts.extend(other.accounts);
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
            && self.responses.is_empty()
            && self.qa_pairs.is_empty()
            && self.strategy_tags.is_empty()
            && self.accounts.is_empty()
    }
}

/// One `signals.jsonl` line: everything extracted for one domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSignals {
    pub domain: Domain,
    pub signals: AtomicSignals,
}

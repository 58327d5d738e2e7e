//! Source-archive reading and the end-to-end ingestion pass.
//!
//! Layout: one directory per source containing `meta.json` (a `SourceItem`
//! plus an `account` profile), `transcript.txt` with `[secs]\ttext` lines,
//! and `comments.tsv` with `secs\tauthor_hash\ttext` rows.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use super::{
    align_qa, denoise_comments, extract_account_metadata, filter_sources, normalize_transcript,
    tag_strategy, AtomicSignals, CommentCleanConfig, DomainLexicon, DomainSignals,
    EmbeddingScorer, FilterConfig, RawComment, RawProfile, Rejection, ResponseSignal, SourceFlag,
    SourceItem, SourceKind, Speaker, StrategyTaxonomy,
};
use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::retrieval::{EmbeddingProvider, KnowledgeBase};
use crate::schema::Domain;

#[derive(Debug, Deserialize)]
struct SourceMeta {
    source_id: String,
    kind: SourceKind,
    domain: Domain,
    #[serde(default)]
    category_tags: Vec<String>,
    #[serde(default)]
    certification: Option<String>,
    #[serde(default)]
    viewer_count: Option<u64>,
    #[serde(default)]
    flags: BTreeSet<SourceFlag>,
    #[serde(default)]
    account: RawProfile,
}

/// One fully loaded source: filter metadata plus raw payload.
#[derive(Debug)]
pub struct SourceRecord {
    pub item: SourceItem,
    pub account: RawProfile,
    pub transcript: Vec<(f64, String)>,
    pub comments: Vec<RawComment>,
}

fn parse_transcript(path: &Path) -> Result<Vec<(f64, String)>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: &str| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            message: message.into(),
        };
        let rest = line
            .strip_prefix('[')
            .ok_or_else(|| malformed("expected `[secs]\\ttext`"))?;
        let (stamp, text) = rest
            .split_once("]\t")
            .ok_or_else(|| malformed("expected `[secs]\\ttext`"))?;
        let secs: f64 = stamp
            .trim()
            .parse()
            .map_err(|_| malformed("timestamp is not a number"))?;
        lines.push((secs, text.to_string()));
    }
    Ok(lines)
}

fn parse_comments(path: &Path) -> Result<Vec<RawComment>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut comments = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let malformed = |message: &str| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            message: message.into(),
        };
        let secs: f64 = parts
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|_| malformed("timestamp is not a number"))?;
        let author_hash = parts
            .next()
            .ok_or_else(|| malformed("expected `secs\\tauthor_hash\\ttext`"))?;
        let text = parts
            .next()
            .ok_or_else(|| malformed("expected `secs\\tauthor_hash\\ttext`"))?;
        comments.push(RawComment {
            timestamp: secs,
            author_hash: author_hash.to_string(),
            text: text.to_string(),
        });
    }
    Ok(comments)
}

/// Loads one source directory, enforcing kind-specific payload requirements:
/// live streams need a transcript and timestamped comments, short videos need
/// a transcript, web pages may carry either.
pub fn load_source_dir(dir: impl AsRef<Path>) -> Result<SourceRecord> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SourceMeta = serde_json::from_str(&meta_text)?;

    let transcript_path = dir.join("transcript.txt");
    let comments_path = dir.join("comments.tsv");
    let need_transcript = matches!(meta.kind, SourceKind::LiveStream | SourceKind::ShortVideo);
    let need_comments = matches!(meta.kind, SourceKind::LiveStream);
    if need_transcript && !transcript_path.exists() {
        return Err(Error::Precondition(format!(
            "source {} ({:?}) lacks transcript.txt",
            meta.source_id, meta.kind
        )));
    }
    if need_comments && !comments_path.exists() {
        return Err(Error::Precondition(format!(
            "source {} (live_stream) lacks comments.tsv",
            meta.source_id
        )));
    }
    let transcript = if transcript_path.exists() {
        parse_transcript(&transcript_path)?
    } else {
        Vec::new()
    };
    let comments = if comments_path.exists() {
        parse_comments(&comments_path)?
    } else {
        Vec::new()
    };
    Ok(SourceRecord {
        item: SourceItem {
            source_id: meta.source_id,
            kind: meta.kind,
            domain: meta.domain,
            category_tags: meta.category_tags,
            certification: meta.certification,
            viewer_count: meta.viewer_count,
            flags: meta.flags,
            payload_path: dir.to_path_buf(),
        },
        account: meta.account,
        transcript,
        comments,
    })
}

pub struct IngestOptions<'a> {
    pub filter: FilterConfig,
    pub clean: CommentCleanConfig,
    pub window_secs: f64,
    pub theta_sem: f64,
    pub lexicons: Vec<DomainLexicon>,
    pub taxonomy: StrategyTaxonomy,
    /// Knowledge base per domain label; domains without one get an empty base.
    pub kbs: BTreeMap<String, KnowledgeBase>,
    pub provider: &'a dyn EmbeddingProvider,
    /// When set, strategy tagging goes through the gateway instead of the
    /// offline keyword rules.
    pub gateway: Option<&'a Gateway>,
}

#[derive(Debug, Default)]
pub struct IngestOutput {
    pub per_domain: BTreeMap<String, AtomicSignals>,
    pub rejections: Vec<Rejection>,
    pub sources_read: usize,
    pub sources_retained: usize,
    pub unpaired_questions: usize,
    pub edits_applied: usize,
}

impl IngestOutput {
    /// Serializable `signals.jsonl` lines, one per domain.
    pub fn domain_signals(&self) -> Vec<DomainSignals> {
        self.per_domain
            .iter()
            .map(|(label, signals)| DomainSignals {
                domain: Domain::parse(label),
                signals: signals.clone(),
            })
            .collect()
    }
}

struct SourceYield {
    domain: String,
    signals: AtomicSignals,
    unpaired: usize,
    edits: usize,
}

fn process_source(record: &SourceRecord, opts: &IngestOptions<'_>) -> Result<SourceYield> {
    let domain_label = record.item.domain.label().to_string();
    let empty_kb = KnowledgeBase::new(format!("kb-empty-{domain_label}"), Vec::new())?;
    let kb = opts.kbs.get(&domain_label).unwrap_or(&empty_kb);

    let mut edits_applied = 0;
    let mut responses: Vec<ResponseSignal> = Vec::new();
    for (secs, raw_line) in &record.transcript {
        let (text, edits) = normalize_transcript(raw_line, &opts.lexicons)?;
        edits_applied += edits.len();
        if text.trim().is_empty() {
            continue;
        }
        responses.push(ResponseSignal {
            text: text.trim().to_string(),
            timestamp: *secs,
            speaker: Speaker::Host,
        });
    }
    responses.sort_by(|a, b| {
        a.timestamp
            .partial_cmp(&b.timestamp)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let questions = denoise_comments(&record.comments, &opts.clean, opts.provider)?;

    let scorer = EmbeddingScorer::new(opts.provider);
    let (qa_pairs, unpaired) = align_qa(
        &questions,
        &responses,
        opts.window_secs,
        opts.theta_sem,
        kb,
        &scorer,
    )?;

    let strategy_tags = responses
        .iter()
        .map(|response| {
            let span = format!("{}@{}", record.item.source_id, response.timestamp);
            tag_strategy(response, &span, &opts.taxonomy, opts.gateway)
        })
        .collect();

    let account = extract_account_metadata(&record.account);

    Ok(SourceYield {
        domain: domain_label,
        unpaired: unpaired.len(),
        edits: edits_applied,
        signals: AtomicSignals {
            questions,
            responses,
            qa_pairs,
            strategy_tags,
            accounts: vec![account],
        },
    })
}

/// Full ingestion pass over a sources directory: filter, clean, align, tag,
/// anonymize. Sources are processed in parallel; outputs merge in directory
/// order, so the result is deterministic.
pub fn ingest_sources(root: impl AsRef<Path>, opts: &IngestOptions<'_>) -> Result<IngestOutput> {
    let root = root.as_ref();
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("meta.json").exists())
        .collect();
    dirs.sort();

    let records: Vec<SourceRecord> = dirs
        .iter()
        .map(load_source_dir)
        .collect::<Result<_>>()?;
    let sources_read = records.len();

    let items: Vec<SourceItem> = records.iter().map(|r| r.item.clone()).collect();
    let (retained_items, rejections) = filter_sources(items, &opts.filter);
    let retained_ids: BTreeSet<&str> =
        retained_items.iter().map(|i| i.source_id.as_str()).collect();
    let retained: Vec<&SourceRecord> = records
        .iter()
        .filter(|r| retained_ids.contains(r.item.source_id.as_str()))
        .collect();

    let yields: Vec<SourceYield> = retained
        .par_iter()
        .map(|record| process_source(record, opts))
        .collect::<Result<_>>()?;

    let mut output = IngestOutput {
        sources_read,
        sources_retained: retained.len(),
        rejections,
        ..IngestOutput::default()
    };
    // Deduplicate accounts: several sources may share one account.
    let mut seen_accounts: BTreeSet<String> = BTreeSet::new();
    for y in yields {
        output.unpaired_questions += y.unpaired;
        output.edits_applied += y.edits;
        let bucket = output.per_domain.entry(y.domain).or_default();
        let mut signals = y.signals;
        signals
            .accounts
            .retain(|a| seen_accounts.insert(a.account_id_hash.clone()));
        bucket.merge(signals);
    }
    Ok(output)
}

//! Comment denoising and transcript normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::QuestionSignal;
use crate::error::{Error, Result};
use crate::retrieval::{cosine, EmbeddingProvider, EmbeddingVector};

/// One raw timestamped comment as read from `comments.tsv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawComment {
    pub timestamp: f64,
    pub author_hash: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommentCleanConfig {
    /// Minimum surviving length in characters.
    pub min_length: usize,
    /// Near-duplicate cutoff: cosine at or above this drops the later comment.
    pub dedup_threshold: f32,
    /// Regexes; a full or partial match drops the comment.
    pub spam_patterns: Vec<String>,
}

impl Default for CommentCleanConfig {
    fn default() -> CommentCleanConfig {
        CommentCleanConfig {
            min_length: 4,
            dedup_threshold: 0.95,
            spam_patterns: vec![
                r"^[0-9 ]+$".into(),
                r"^[\W_]+$".into(),
                r"(?i)^(ha|he){2,}h?$".into(),
            ],
        }
    }
}

fn normalize_for_dedup(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Cleans raw comments into question signals: spam and too-short entries
/// removed, exact and near duplicates collapsed onto the earliest occurrence,
/// timestamp order preserved.
pub fn denoise_comments(
    raw: &[RawComment],
    cfg: &CommentCleanConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<QuestionSignal>> {
    let patterns: Vec<Regex> = cfg
        .spam_patterns
        .iter()
        .map(|p| Regex::new(p).map_err(|e| Error::Config(format!("bad spam pattern `{p}`: {e}"))))
        .collect::<Result<_>>()?;

    let mut ordered: Vec<&RawComment> = raw.iter().collect();
    ordered.sort_by(|a, b| {
        a.timestamp
            .partial_cmp(&b.timestamp)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut kept: Vec<QuestionSignal> = Vec::new();
    let mut kept_norms: BTreeSet<String> = BTreeSet::new();
    let mut kept_vecs: Vec<EmbeddingVector> = Vec::new();

    'comments: for comment in ordered {
        let text = comment.text.trim();
        if text.chars().count() < cfg.min_length {
            continue;
        }
        if patterns.iter().any(|p| p.is_match(text)) {
            continue;
        }
        let norm = normalize_for_dedup(text);
        if kept_norms.contains(&norm) {
            continue;
        }
        let vector = provider.embed(text)?;
        for existing in &kept_vecs {
            if cosine(existing, &vector) >= cfg.dedup_threshold {
                continue 'comments;
            }
        }
        kept_norms.insert(norm);
        kept_vecs.push(vector);
        kept.push(QuestionSignal {
            text: text.to_string(),
            timestamp: Some(comment.timestamp),
            author_hash: comment.author_hash.clone(),
        });
    }
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconScope {
    AutomotiveVocabulary,
    AddressEntries,
    Custom,
}

/// Surface-form → canonical-form rewrite table.
#[derive(Debug, Clone)]
pub struct DomainLexicon {
    entries: BTreeMap<String, String>,
    scope: LexiconScope,
}

impl DomainLexicon {
    pub fn new(scope: LexiconScope, pairs: Vec<(String, String)>) -> Result<DomainLexicon> {
        let mut entries = BTreeMap::new();
        for (surface, canonical) in pairs {
            if surface.is_empty() {
                return Err(Error::Config("lexicon surface form is empty".into()));
            }
            if canonical.is_empty() {
                return Err(Error::Config(format!(
                    "lexicon canonical for `{surface}` is empty"
                )));
            }
            if let Some(existing) = entries.get(&surface) {
                if existing != &canonical {
                    return Err(Error::Config(format!(
                        "conflicting canonicals for surface `{surface}`: `{existing}` vs `{canonical}`"
                    )));
                }
            }
            entries.insert(surface, canonical);
        }
        let lexicon = DomainLexicon { entries, scope };
        lexicon.check_acyclic()?;
        Ok(lexicon)
    }

    /// Two-column TSV: `surface\tcanonical`, one entry per line.
    pub fn load_tsv(scope: LexiconScope, path: impl AsRef<Path>) -> Result<DomainLexicon> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (surface, canonical) = line.split_once('\t').ok_or(Error::MalformedLine {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected `surface\\tcanonical`".into(),
            })?;
            pairs.push((surface.trim().to_string(), canonical.trim().to_string()));
        }
        DomainLexicon::new(scope, pairs)
    }

    pub fn scope(&self) -> LexiconScope {
        self.scope
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rejects rewrite chains that could loop: follows each canonical into
    /// the surfaces it contains and fails on any path returning to its start.
    fn check_acyclic(&self) -> Result<()> {
        let surfaces: Vec<&String> = self.entries.keys().collect();
        for start in &surfaces {
            let mut stack = vec![(*start).clone()];
            let mut visited = BTreeSet::new();
            while let Some(surface) = stack.pop() {
                if !visited.insert(surface.clone()) {
                    continue;
                }
                if let Some(canonical) = self.entries.get(&surface) {
                    for next in &surfaces {
                        if canonical.contains(next.as_str()) {
                            if next == start {
                                return Err(Error::Config(format!(
                                    "cyclic rewrite through surface `{start}`"
                                )));
                            }
                            stack.push((*next).clone());
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// One recorded replacement; offset is a byte position in the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub offset: usize,
    pub before: String,
    pub after: String,
}

/// Applies the lexicons left-to-right with longest-match-wins, returning the
/// rewritten text and an edit log. Surfaces shared by two lexicons must agree
/// on the canonical form.
pub fn normalize_transcript(
    text: &str,
    lexicons: &[DomainLexicon],
) -> Result<(String, Vec<Edit>)> {
    let mut merged: BTreeMap<&str, &str> = BTreeMap::new();
    for lexicon in lexicons {
        for (surface, canonical) in &lexicon.entries {
            if let Some(existing) = merged.get(surface.as_str()) {
                if existing != canonical {
                    return Err(Error::Config(format!(
                        "conflicting canonicals for surface `{surface}` across lexicons"
                    )));
                }
            }
            merged.insert(surface, canonical);
        }
    }
    // Longest surface first so the longest match wins at each position.
    let mut surfaces: Vec<&str> = merged.keys().copied().collect();
    surfaces.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

    let mut out = String::with_capacity(text.len());
    let mut edits = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        match surfaces.iter().find(|s| rest.starts_with(**s)) {
            Some(surface) => {
                let canonical = merged[*surface];
                edits.push(Edit {
                    offset: pos,
                    before: surface.to_string(),
                    after: canonical.to_string(),
                });
                out.push_str(canonical);
                pos += surface.len();
            }
            None => {
                let ch = rest.chars().next().unwrap();
                out.push(ch);
                pos += ch.len_utf8();
            }
        }
    }
    Ok((out, edits))
}

//! Shared error type for the pipeline crates.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed line in a line-delimited file. Carries the 1-based line number.
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("prompt template not found: {0}")]
    TemplateMissing(String),

    #[error("template `{template}` slot `{slot}` not covered by request variables")]
    TemplateSlot { template: String, slot: String },

    #[error("replay cache miss for fingerprint {fingerprint}")]
    CacheMiss { fingerprint: String },

    #[error("backend `{backend}` failed after {attempts} attempts: {message}")]
    Backend {
        backend: String,
        attempts: u32,
        message: String,
    },

    #[error("token budget exceeded: used {used} of {budget}")]
    BudgetExceeded { used: u64, budget: u64 },

    /// Generation output failed its invariants twice; the raw output is kept for audit.
    #[error("{what} rejected after retry; raw output retained for audit")]
    Rejected { what: String, raw: String },

    #[error("no blueprint available for domain `{domain}`")]
    NoMatchingBlueprint { domain: String },

    #[error("pool `{pool}` too small: required {required}, available {available}")]
    InsufficientPool {
        pool: String,
        required: usize,
        available: usize,
    },

    /// Gold/predicted annotations that cannot be paired; lists the offenders.
    #[error("annotations not aligned: {}", offenders.join("; "))]
    Alignment { offenders: Vec<String> },

    #[error("session aborted at {stage}: {message}")]
    SessionAborted { stage: String, message: String },

    #[error("phase `{phase}` failed: {source}")]
    Phase {
        phase: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

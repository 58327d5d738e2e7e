//! streamforge-core: turns rich-media interaction exports into task-oriented
//! dialogue datasets.
//!
//! The pipeline has four phases. Ingestion distills atomic signals (questions,
//! responses, aligned QA pairs, strategy tags, account metadata) from raw
//! source archives. Persona synthesis turns those signals into user and agent
//! personas. Blueprint construction compiles domain knowledge into staged
//! conversational blueprints with a flow atlas. Dialogue generation runs a
//! user simulator against an agent responder over a shared blueprint, then a
//! graph-based filter keeps a diverse, representative subset.

pub mod blueprint;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod filter;
pub mod gateway;
pub mod generation;
pub mod ingest;
pub mod orchestrator;
pub mod persona;
pub mod retrieval;
pub mod schema;
pub mod util;

pub use error::{Error, Result};

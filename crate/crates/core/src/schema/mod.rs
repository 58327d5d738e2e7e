//! Released data types, record validation, serialization, and corpus statistics.
//!
//! Every released sample is a quadruplet: user persona, agent persona,
//! blueprint, and dialogue history, linked by string identifiers. Sessions,
//! personas, and blueprints live in separate line-delimited files keyed by id,
//! so records stay small and stores can be loaded independently.

mod jsonl;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use jsonl::{read_jsonl, read_jsonl_str, write_jsonl, write_jsonl_string};
pub use stats::{compute_dataset_stats, DatasetStats, DomainCounts};

use crate::error::{Error, Result};

/// Service vertical a record belongs to.
///
/// The three named domains are first-class; anything else carries its label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Automotive,
    Restaurant,
    Hotel,
    Other(String),
}

impl Domain {
    pub fn label(&self) -> &str {
        match self {
            Domain::Automotive => "automotive",
            Domain::Restaurant => "restaurant",
            Domain::Hotel => "hotel",
            Domain::Other(label) => label,
        }
    }

    pub fn parse(label: &str) -> Domain {
        match label {
            "automotive" => Domain::Automotive,
            "restaurant" => Domain::Restaurant,
            "hotel" => Domain::Hotel,
            other => Domain::Other(other.to_string()),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Domain {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let label = String::deserialize(deserializer)?;
        if label.is_empty() {
            return Err(D::Error::custom("empty domain label"));
        }
        Ok(Domain::parse(&label))
    }
}

/// Speaker of a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Agent,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::User => f.write_str("user"),
            Role::Agent => f.write_str("agent"),
        }
    }
}

/// One utterance plus its structured payloads.
///
/// `inform_block` carries the slot values a user turn states (a per-turn
/// delta, not the cumulative state); `request_block` carries the slots an
/// agent turn asks for. `evidence_ids` reference retrieval-pool entries that
/// grounded the turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inform_block: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_block: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_ids: Option<Vec<String>>,
}

impl Turn {
    pub fn user(index: usize, text: impl Into<String>) -> Turn {
        Turn {
            index,
            role: Role::User,
            text: text.into(),
            inform_block: None,
            request_block: None,
            evidence_ids: None,
        }
    }

    pub fn agent(index: usize, text: impl Into<String>) -> Turn {
        Turn {
            index,
            role: Role::Agent,
            text: text.into(),
            inform_block: None,
            request_block: None,
            evidence_ids: None,
        }
    }
}

/// One released sample: dialogue history linked to its persona and blueprint records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionQuadruplet {
    pub dialogue_id: String,
    pub user_persona_id: String,
    pub agent_persona_id: String,
    pub blueprint_id: String,
    pub domain: Domain,
    pub history: Vec<Turn>,
}

/// Structured user representation: objective, constraints, and phrasing variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPersona {
    pub persona_id: String,
    pub mindset: String,
    pub basic_information: BTreeMap<String, String>,
    pub core_requirements: Vec<String>,
    pub primary_inquiries: Vec<String>,
    pub potential_utterances: Vec<String>,
    pub domain: Domain,
}

impl UserPersona {
    /// Type invariants: at least one core requirement and one primary
    /// inquiry; potential utterances non-empty.
    pub fn check_invariants(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.persona_id.is_empty() {
            report.push("empty id", "user persona has an empty persona_id");
        }
        if self.core_requirements.is_empty() {
            report.push(
                "missing core requirement",
                format!("user persona {} has no core requirements", self.persona_id),
            );
        }
        if self.primary_inquiries.is_empty() {
            report.push(
                "missing primary inquiry",
                format!("user persona {} has no primary inquiries", self.persona_id),
            );
        }
        if self.potential_utterances.is_empty() {
            report.push(
                "missing potential utterances",
                format!(
                    "user persona {} has no potential utterances",
                    self.persona_id
                ),
            );
        }
        report
    }
}

/// Structured agent representation: role, style, boundaries, and its knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPersona {
    pub persona_id: String,
    pub identity_positioning: String,
    pub linguistic_style: String,
    pub service_boundaries: Vec<String>,
    pub knowledge_base_ref: String,
    pub domain: Domain,
}

impl AgentPersona {
    /// Type invariants except knowledge-base resolution, which needs the registry.
    pub fn check_invariants(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.persona_id.is_empty() {
            report.push("empty id", "agent persona has an empty persona_id");
        }
        if self.service_boundaries.is_empty() {
            report.push(
                "missing service boundaries",
                format!(
                    "agent persona {} has no service boundaries",
                    self.persona_id
                ),
            );
        }
        if self.knowledge_base_ref.is_empty() {
            report.push(
                "dangling reference",
                format!("agent persona {} has an empty kb ref", self.persona_id),
            );
        }
        report
    }
}

/// A public human-annotated dialogue used as scaffolding for synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDialogue {
    pub dialogue_id: String,
    pub domain: Domain,
    pub turns: Vec<SeedTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTurn {
    pub role: Role,
    pub text: String,
}

/// Slot vocabulary for one domain. Inform blocks may only use these slots;
/// anything else is stripped with a warning during generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOntology {
    pub domain: Domain,
    pub slots: Vec<String>,
}

impl SlotOntology {
    pub fn contains(&self, slot: &str) -> bool {
        self.slots.iter().any(|s| s == slot)
    }
}

/// A single rule violation found during validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub message: String,
}

/// Outcome of a validation pass. A record is accepted iff the report is empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> ValidationReport {
        ValidationReport::default()
    }

    pub fn push(&mut self, code: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            code: code.into(),
            message: message.into(),
        });
    }

    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    /// True if any violation carries the given code.
    pub fn has_code(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for v in &self.violations {
            writeln!(f, "[{}] {}", v.code, v.message)?;
        }
        Ok(())
    }
}

/// In-memory store for persona records, keyed by persona id.
///
/// Writes are rejected on id collision so ids stay unique per run.
#[derive(Debug, Clone, Default)]
pub struct PersonaStore {
    users: BTreeMap<String, UserPersona>,
    agents: BTreeMap<String, AgentPersona>,
}

impl PersonaStore {
    pub fn new() -> PersonaStore {
        PersonaStore::default()
    }

    pub fn insert_user(&mut self, persona: UserPersona) -> Result<()> {
        let report = persona.check_invariants();
        if !report.accepted() {
            return Err(Error::Precondition(format!(
                "invalid user persona {}: {}",
                persona.persona_id, report
            )));
        }
        if self.users.contains_key(&persona.persona_id) {
            return Err(Error::Precondition(format!(
                "duplicate user persona id {}",
                persona.persona_id
            )));
        }
        self.users.insert(persona.persona_id.clone(), persona);
        Ok(())
    }

    pub fn insert_agent(&mut self, persona: AgentPersona) -> Result<()> {
        let report = persona.check_invariants();
        if !report.accepted() {
            return Err(Error::Precondition(format!(
                "invalid agent persona {}: {}",
                persona.persona_id, report
            )));
        }
        if self.agents.contains_key(&persona.persona_id) {
            return Err(Error::Precondition(format!(
                "duplicate agent persona id {}",
                persona.persona_id
            )));
        }
        self.agents.insert(persona.persona_id.clone(), persona);
        Ok(())
    }

    pub fn user(&self, id: &str) -> Option<&UserPersona> {
        self.users.get(id)
    }

    pub fn agent(&self, id: &str) -> Option<&AgentPersona> {
        self.agents.get(id)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserPersona> {
        self.users.values()
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentPersona> {
        self.agents.values()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }
}

/// The id sets a session's references are checked against.
///
/// Built from the persona and blueprint stores so the schema layer does not
/// depend on how those stores are implemented.
#[derive(Debug, Clone, Default)]
pub struct StoreIndex {
    pub user_ids: BTreeSet<String>,
    pub agent_ids: BTreeSet<String>,
    pub blueprint_ids: BTreeSet<String>,
}

impl StoreIndex {
    pub fn new() -> StoreIndex {
        StoreIndex::default()
    }

    pub fn from_persona_store(store: &PersonaStore) -> StoreIndex {
        let mut idx = StoreIndex::new();
        idx.user_ids = store.users.keys().cloned().collect();
        idx.agent_ids = store.agents.keys().cloned().collect();
        idx
    }

    pub fn with_blueprint_ids<I, S>(mut self, ids: I) -> StoreIndex
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.blueprint_ids = ids.into_iter().map(Into::into).collect();
        self
    }
}

/// Check a session against the schema invariants and the accompanying stores.
///
/// Returns a report listing every violation found; the record is accepted iff
/// the report is empty. Malformed records produce violation entries rather
/// than errors, so validation is total.
pub fn validate_quadruplet(record: &SessionQuadruplet, stores: &StoreIndex) -> ValidationReport {
    let mut report = ValidationReport::new();

    if record.dialogue_id.is_empty() {
        report.push("empty id", "dialogue_id is empty");
    }
    if record.history.is_empty() {
        report.push(
            "empty history",
            format!("session {} has no turns", record.dialogue_id),
        );
        return report;
    }

    for (pos, turn) in record.history.iter().enumerate() {
        let expected_role = if pos % 2 == 0 { Role::User } else { Role::Agent };
        if turn.role != expected_role {
            report.push(
                "turn order",
                format!(
                    "session {}: turn {} has role {}, expected {} (turns alternate starting with user)",
                    record.dialogue_id, pos, turn.role, expected_role
                ),
            );
        }
        if turn.index != pos {
            report.push(
                "index mismatch",
                format!(
                    "session {}: turn at position {} carries index {}",
                    record.dialogue_id, pos, turn.index
                ),
            );
        }
        if turn.role == Role::Agent && turn.inform_block.is_some() {
            report.push(
                "inform on agent turn",
                format!(
                    "session {}: agent turn {} carries an inform block",
                    record.dialogue_id, pos
                ),
            );
        }
        if turn.role == Role::User && turn.request_block.is_some() {
            report.push(
                "request on user turn",
                format!(
                    "session {}: user turn {} carries a request block",
                    record.dialogue_id, pos
                ),
            );
        }
        if turn.text.trim().is_empty() {
            report.push(
                "empty turn",
                format!(
                    "session {}: turn {} has empty text",
                    record.dialogue_id, pos
                ),
            );
        }
    }

    if !stores.user_ids.contains(&record.user_persona_id) {
        report.push(
            "dangling reference",
            format!(
                "session {}: user persona {} not found",
                record.dialogue_id, record.user_persona_id
            ),
        );
    }
    if !stores.agent_ids.contains(&record.agent_persona_id) {
        report.push(
            "dangling reference",
            format!(
                "session {}: agent persona {} not found",
                record.dialogue_id, record.agent_persona_id
            ),
        );
    }
    if !stores.blueprint_ids.contains(&record.blueprint_id) {
        report.push(
            "dangling reference",
            format!(
                "session {}: blueprint {} not found",
                record.dialogue_id, record.blueprint_id
            ),
        );
    }

    report
}

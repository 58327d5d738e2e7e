//! Persona synthesis and matching.
//!
//! Builds structured `UserPersona` records from sampled question signals and
//! seed dialogues, `AgentPersona` records from account metadata and strategy
//! tags, and pairs them by embedding similarity. Synthesized personas must
//! pass their type invariants before they are returned; an invalid output is
//! regenerated once with a different decoding seed and then rejected, keeping
//! gateway spend bounded.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gateway::{Decoding, Gateway, GenerationRequest, PurposeTag};
use crate::ingest::{AccountMetadata, AtomicSignals, QuestionSignal, StrategyTag};
use crate::retrieval::{cosine, EmbeddingProvider, KbRegistry};
use crate::schema::{AgentPersona, Domain, Role, SeedDialogue, UserPersona};
use crate::util::derive_seed;

/// A persona must offer at least this many phrasing variants so the dialogue
/// loop can vary surface forms without re-prompting.
pub const MIN_UTTERANCE_VARIANTS: usize = 3;

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawUserPersona {
    mindset: String,
    basic_information: BTreeMap<String, String>,
    core_requirements: Vec<String>,
    primary_inquiries: Vec<String>,
    potential_utterances: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawAgentPersona {
    identity_positioning: String,
    linguistic_style: String,
    service_boundaries: Vec<String>,
}

/// Strategy-tag distribution as `label:count; ...`, most frequent first,
/// ties toward the lexicographically smaller label.
pub fn tag_summary(tags: &[StrategyTag]) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for tag in tags {
        *counts.entry(tag.label.as_str()).or_insert(0) += 1;
    }
    let mut entries: Vec<(&str, usize)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    entries
        .iter()
        .map(|(label, count)| format!("{label}:{count}"))
        .collect::<Vec<_>>()
        .join("; ")
}

pub(crate) fn seed_excerpts(seeds: &[&SeedDialogue], turns_per_seed: usize) -> String {
    let mut out: Vec<String> = Vec::new();
    for seed in seeds {
        for turn in seed.turns.iter().take(turns_per_seed) {
            let role = match turn.role {
                Role::User => "user",
                Role::Agent => "agent",
            };
            out.push(format!("{role}: {}", turn.text));
        }
    }
    out.join("\n")
}

fn violations_text(report: &crate::schema::ValidationReport) -> String {
    report
        .violations
        .iter()
        .map(|v| v.code.clone())
        .collect::<Vec<_>>()
        .join("; ")
}

fn parse_user_persona(
    persona_id: &str,
    domain: &Domain,
    raw: &str,
) -> std::result::Result<UserPersona, String> {
    let parsed: RawUserPersona =
        serde_json::from_str(raw).map_err(|e| format!("unparseable JSON: {e}"))?;
    let persona = UserPersona {
        persona_id: persona_id.to_string(),
        mindset: parsed.mindset,
        basic_information: parsed.basic_information,
        core_requirements: parsed.core_requirements,
        primary_inquiries: parsed.primary_inquiries,
        potential_utterances: parsed.potential_utterances,
        domain: domain.clone(),
    };
    let report = persona.check_invariants();
    if !report.accepted() {
        return Err(violations_text(&report));
    }
    if persona.potential_utterances.len() < MIN_UTTERANCE_VARIANTS {
        return Err(format!(
            "only {} utterance variants, need {MIN_UTTERANCE_VARIANTS}",
            persona.potential_utterances.len()
        ));
    }
    Ok(persona)
}

fn parse_agent_persona(
    persona_id: &str,
    domain: &Domain,
    kb_ref: &str,
    raw: &str,
) -> std::result::Result<AgentPersona, String> {
    let parsed: RawAgentPersona =
        serde_json::from_str(raw).map_err(|e| format!("unparseable JSON: {e}"))?;
    let persona = AgentPersona {
        persona_id: persona_id.to_string(),
        identity_positioning: parsed.identity_positioning,
        linguistic_style: parsed.linguistic_style,
        service_boundaries: parsed.service_boundaries,
        knowledge_base_ref: kb_ref.to_string(),
        domain: domain.clone(),
    };
    let report = persona.check_invariants();
    if !report.accepted() {
        return Err(violations_text(&report));
    }
    Ok(persona)
}

/// Synthesizes a user persona from a question sample plus seed-dialogue
/// scaffolding. Requires at least one question.
pub fn synthesize_user_persona(
    persona_id: &str,
    domain: &Domain,
    questions: &[QuestionSignal],
    seeds: &[&SeedDialogue],
    gw: &Gateway,
) -> Result<UserPersona> {
    if questions.is_empty() {
        return Err(Error::Precondition(format!(
            "user persona {persona_id} needs at least one question signal"
        )));
    }
    let question_text = questions
        .iter()
        .map(|q| q.text.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    let excerpts = seed_excerpts(seeds, 4);

    let mut last: Option<(String, String)> = None;
    for attempt in 0..2u64 {
        let req = GenerationRequest::new("persona_user", PurposeTag::Persona)
            .var("domain", domain.label())
            .var("questions", question_text.clone())
            .var("seed_excerpts", excerpts.clone())
            .decoding(Decoding {
                seed: attempt,
                ..Decoding::default()
            });
        let raw = gw.generate(&req)?;
        match parse_user_persona(persona_id, domain, &raw) {
            Ok(persona) => return Ok(persona),
            Err(reason) => {
                log::warn!("user persona {persona_id} attempt {attempt} invalid: {reason}");
                last = Some((reason, raw));
            }
        }
    }
    let (reason, raw) = last.expect("two attempts ran");
    Err(Error::Rejected {
        what: format!("user persona {persona_id}: {reason}"),
        raw,
    })
}

/// Synthesizes an agent persona from anonymized account metadata and the
/// domain's strategy-tag distribution. `kb_ref` must already be registered.
pub fn synthesize_agent_persona(
    persona_id: &str,
    domain: &Domain,
    meta: &AccountMetadata,
    tags: &[StrategyTag],
    kb_ref: &str,
    registry: &KbRegistry,
    gw: &Gateway,
) -> Result<AgentPersona> {
    if registry.get(kb_ref).is_none() {
        return Err(Error::Precondition(format!(
            "agent persona {persona_id}: knowledge base `{kb_ref}` is not registered"
        )));
    }
    let scope_hints: Vec<String> = if meta.service_scope_hints.is_empty() {
        log::warn!(
            "account {} has no scope hints; defaulting to general consultation",
            meta.account_id_hash
        );
        vec!["general consultation".to_string()]
    } else {
        meta.service_scope_hints.clone()
    };

    let mut last: Option<(String, String)> = None;
    for attempt in 0..2u64 {
        let req = GenerationRequest::new("persona_agent", PurposeTag::Persona)
            .var("domain", domain.label())
            .var("profile_summary", meta.profile_summary.clone())
            .var("certifications", meta.certifications.join("; "))
            .var("scope_hints", scope_hints.join("; "))
            .var("tag_summary", tag_summary(tags))
            .var("kb_ref", kb_ref)
            .decoding(Decoding {
                seed: attempt,
                ..Decoding::default()
            });
        let raw = gw.generate(&req)?;
        match parse_agent_persona(persona_id, domain, kb_ref, &raw) {
            Ok(persona) => return Ok(persona),
            Err(reason) => {
                log::warn!("agent persona {persona_id} attempt {attempt} invalid: {reason}");
                last = Some((reason, raw));
            }
        }
    }
    let (reason, raw) = last.expect("two attempts ran");
    Err(Error::Rejected {
        what: format!("agent persona {persona_id}: {reason}"),
        raw,
    })
}

/// Text summarizing what the user needs; one side of the matching score.
pub fn user_concern_text(persona: &UserPersona) -> String {
    let mut parts: Vec<&str> = Vec::new();
    parts.extend(persona.core_requirements.iter().map(String::as_str));
    parts.extend(persona.primary_inquiries.iter().map(String::as_str));
    parts.join("\n")
}

/// Text summarizing what the agent offers; the other side of the score.
pub fn agent_scope_text(persona: &AgentPersona) -> String {
    let mut parts: Vec<&str> = vec![persona.identity_positioning.as_str()];
    parts.extend(persona.service_boundaries.iter().map(String::as_str));
    parts.join("\n")
}

/// Picks the most compatible agent for a user persona.
///
/// Score is cosine similarity between the embedded concern and scope texts.
/// When any same-domain agent exists the candidate set is restricted to the
/// user's domain. Argmax wins; exact ties go to the lexicographically
/// smaller persona id.
pub fn match_personas<'a>(
    user: &UserPersona,
    agents: &'a [AgentPersona],
    provider: &dyn EmbeddingProvider,
) -> Result<(&'a AgentPersona, f64)> {
    if agents.is_empty() {
        return Err(Error::InsufficientPool {
            pool: "agent personas".to_string(),
            required: 1,
            available: 0,
        });
    }
    let mut candidates: Vec<&AgentPersona> =
        agents.iter().filter(|a| a.domain == user.domain).collect();
    if candidates.is_empty() {
        candidates = agents.iter().collect();
    }
    // Ascending id order plus strictly-greater replacement keeps the
    // smallest id among equal scores.
    candidates.sort_by(|a, b| a.persona_id.cmp(&b.persona_id));

    let user_vec = provider.embed(&user_concern_text(user))?;
    let mut best: Option<(&AgentPersona, f64)> = None;
    for agent in candidates {
        let score = cosine(&user_vec, &provider.embed(&agent_scope_text(agent))?) as f64;
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((agent, score));
        }
    }
    Ok(best.expect("candidate set is non-empty"))
}

#[derive(Debug, Clone)]
pub struct PersonaPhaseConfig {
    pub user_personas_per_domain: usize,
    pub questions_per_persona: usize,
    pub seeds_per_prompt: usize,
}

impl Default for PersonaPhaseConfig {
    fn default() -> PersonaPhaseConfig {
        PersonaPhaseConfig {
            user_personas_per_domain: 8,
            questions_per_persona: 5,
            seeds_per_prompt: 2,
        }
    }
}

#[derive(Debug, Default)]
pub struct PersonaPhaseOutput {
    pub users: Vec<UserPersona>,
    pub agents: Vec<AgentPersona>,
    /// Rejected syntheses kept for audit: (what failed, raw model output).
    pub rejected: Vec<(String, String)>,
}

/// Batch driver: per domain, samples question subsets into user personas and
/// turns each account into an agent persona. Sampling is seeded, so reruns
/// with the same inputs and seed produce identical persona sets.
pub fn run_persona_phase(
    per_domain: &BTreeMap<String, AtomicSignals>,
    seeds: &[SeedDialogue],
    kb_refs: &BTreeMap<String, String>,
    cfg: &PersonaPhaseConfig,
    registry: &KbRegistry,
    gw: &Gateway,
    phase_seed: u64,
) -> Result<PersonaPhaseOutput> {
    let mut out = PersonaPhaseOutput::default();
    let mut ids: BTreeSet<String> = BTreeSet::new();
    let mut claim = |id: &str| -> Result<()> {
        if !ids.insert(id.to_string()) {
            return Err(Error::Config(format!("duplicate persona id {id}")));
        }
        Ok(())
    };

    for (label, signals) in per_domain {
        let domain = Domain::parse(label);
        let domain_seeds: Vec<&SeedDialogue> =
            seeds.iter().filter(|s| s.domain == domain).collect();

        if signals.questions.is_empty() {
            log::warn!("domain {label} has no question signals; skipping user personas");
        } else {
            for i in 0..cfg.user_personas_per_domain {
                let persona_id = format!("up-{label}-{i:04}");
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    phase_seed,
                    &format!("user:{label}:{i}"),
                ));
                let k = cfg.questions_per_persona.min(signals.questions.len());
                let mut picks =
                    rand::seq::index::sample(&mut rng, signals.questions.len(), k).into_vec();
                picks.sort_unstable();
                let sampled: Vec<QuestionSignal> = picks
                    .into_iter()
                    .map(|ix| signals.questions[ix].clone())
                    .collect();
                let s = cfg.seeds_per_prompt.min(domain_seeds.len());
                let chosen_seeds: Vec<&SeedDialogue> = if s == 0 {
                    Vec::new()
                } else {
                    rand::seq::index::sample(&mut rng, domain_seeds.len(), s)
                        .into_iter()
                        .map(|ix| domain_seeds[ix])
                        .collect()
                };
                match synthesize_user_persona(&persona_id, &domain, &sampled, &chosen_seeds, gw) {
                    Ok(persona) => {
                        claim(&persona.persona_id)?;
                        out.users.push(persona);
                    }
                    Err(Error::Rejected { what, raw }) => out.rejected.push((what, raw)),
                    Err(e) => return Err(e),
                }
            }
        }

        if signals.accounts.is_empty() {
            continue;
        }
        let kb_ref = kb_refs.get(label).ok_or_else(|| {
            Error::Precondition(format!("no knowledge base ref configured for domain {label}"))
        })?;
        for (i, account) in signals.accounts.iter().enumerate() {
            let persona_id = format!("ap-{label}-{i:04}");
            match synthesize_agent_persona(
                &persona_id,
                &domain,
                account,
                &signals.strategy_tags,
                kb_ref,
                registry,
                gw,
            ) {
                Ok(persona) => {
                    claim(&persona.persona_id)?;
                    out.agents.push(persona);
                }
                Err(Error::Rejected { what, raw }) => out.rejected.push((what, raw)),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

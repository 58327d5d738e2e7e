//! The bidirectional generation loop: configuration selection, opening
//! synthesis, user-turn simulation, agent-turn generation, and session
//! assembly.
//!
//! A session is user-first and strictly alternating. It ends when the
//! blueprint reaches a terminal outcome, when the user signals goal
//! satisfaction (every core requirement voiced and answered), or when the
//! utterance cap is hit. Aborted sessions are never persisted.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::blueprint::{blueprint_guidance, Blueprint, BlueprintStore};
use crate::error::{Error, Result};
use crate::gateway::{Decoding, Gateway, GenerationRequest, PurposeTag};
use crate::generation::{DialogueState, EvidenceKind, EvidenceSet};
use crate::ingest::check_entity_consistency;
use crate::persona::match_personas;
use crate::retrieval::{kb_lookup, EmbeddingProvider, KbEntry, KbRegistry, KnowledgeBase, RetrievalPool};
use crate::schema::{
    validate_quadruplet, AgentPersona, Role, SessionQuadruplet, SlotOntology, StoreIndex, Turn,
    UserPersona,
};
use crate::util::derive_seed;

pub const DEFAULT_MAX_TURNS: usize = 40;
pub const DEFAULT_RETRIEVAL_K: usize = 3;

/// One dialogue's sampled configuration: the triple the loop runs under.
#[derive(Debug, Clone, Copy)]
pub struct SessionConfig<'a> {
    pub user: &'a UserPersona,
    pub agent: &'a AgentPersona,
    pub blueprint: &'a Blueprint,
}

#[derive(Debug, Clone, Copy)]
pub struct SessionLimits {
    /// Hard cap on total utterances, openings included.
    pub max_turns: usize,
    /// Evidence items retrieved per turn.
    pub retrieval_k: usize,
}

impl Default for SessionLimits {
    fn default() -> SessionLimits {
        SessionLimits {
            max_turns: DEFAULT_MAX_TURNS,
            retrieval_k: DEFAULT_RETRIEVAL_K,
        }
    }
}

/// Shared read-only retrieval state for a generation run.
#[derive(Debug, Clone, Copy)]
pub struct SessionPools<'a> {
    /// Seed-dialogue openings, keyed by opening text.
    pub seed_openings: &'a RetrievalPool,
    /// Host/agent messages, payload carrying the user reply that followed.
    pub agent_messages: &'a RetrievalPool,
    /// User queries, payload carrying the paired expert response.
    pub user_queries: &'a RetrievalPool,
}

/// Samples a user persona uniformly, matches the agent by embedding
/// similarity, then samples uniformly among same-domain blueprints.
pub fn select_configuration<'a>(
    users: &'a [UserPersona],
    agents: &'a [AgentPersona],
    blueprints: &'a BlueprintStore,
    provider: &dyn EmbeddingProvider,
    rng_seed: u64,
) -> Result<SessionConfig<'a>> {
    if users.is_empty() {
        return Err(Error::InsufficientPool {
            pool: "user personas".to_string(),
            required: 1,
            available: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let user = &users[rng.gen_range(0..users.len())];
    let (agent, _) = match_personas(user, agents, provider)?;
    let candidates = blueprints.by_domain(&agent.domain);
    if candidates.is_empty() {
        return Err(Error::NoMatchingBlueprint {
            domain: agent.domain.label().to_string(),
        });
    }
    let blueprint = candidates[rng.gen_range(0..candidates.len())];
    Ok(SessionConfig {
        user,
        agent,
        blueprint,
    })
}

fn kv_join(map: &BTreeMap<String, String>) -> String {
    map.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Reference text shown to the generator: the stored reply when the payload
/// carries one, otherwise the entry's own text.
fn evidence_lines(set: &EvidenceSet) -> String {
    set.entries
        .iter()
        .map(|e| {
            e.payload
                .get("reply")
                .and_then(|v| v.as_str())
                .unwrap_or(&e.text)
                .to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn retrieve(
    pool: &RetrievalPool,
    query_text: &str,
    k: usize,
    kind: EvidenceKind,
    provider: &dyn EmbeddingProvider,
) -> Result<EvidenceSet> {
    if pool.is_empty() {
        return Ok(EvidenceSet::empty(kind));
    }
    let query = provider.embed(query_text)?;
    Ok(EvidenceSet::from_scored(kind, pool.top_k(&query, k)))
}

/// Slots whose generated value contradicts a known persona attribute.
fn contradicted_slots(
    inform: &BTreeMap<String, String>,
    basics: &BTreeMap<String, String>,
) -> Vec<String> {
    inform
        .iter()
        .filter(|(slot, value)| basics.get(*slot).is_some_and(|known| known != *value))
        .map(|(slot, _)| slot.clone())
        .collect()
}

/// Drops inform entries naming slots outside the domain ontology.
fn apply_ontology_filter(
    inform: &mut BTreeMap<String, String>,
    ontology: &SlotOntology,
    context: &str,
) {
    let unknown: Vec<String> = inform
        .keys()
        .filter(|slot| !ontology.contains(slot))
        .cloned()
        .collect();
    for slot in unknown {
        log::warn!(
            "{context}: stripping slot `{slot}` absent from the {} ontology",
            ontology.domain
        );
        inform.remove(&slot);
    }
}

fn attach_inform(turn: &mut Turn, inform: BTreeMap<String, String>) {
    if !inform.is_empty() {
        turn.inform_block = Some(inform);
    }
}

fn attach_evidence(turn: &mut Turn, evidence: &EvidenceSet) {
    let ids = evidence.ids();
    if !ids.is_empty() {
        turn.evidence_ids = Some(ids);
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawOpening {
    text: String,
    inform: BTreeMap<String, String>,
}

/// Synthesizes the first user turn by rewriting retrieved seed openings
/// around the persona's primary inquiry. Inform values contradicting the
/// persona's attributes trigger one regeneration before rejection.
pub fn synthesize_opening(
    cfg: &SessionConfig<'_>,
    seed_pool: &RetrievalPool,
    provider: &dyn EmbeddingProvider,
    k: usize,
    session_seed: u64,
    gw: &Gateway,
) -> Result<Turn> {
    if seed_pool.is_empty() {
        return Err(Error::Precondition(
            "opening synthesis needs a non-empty seed-opening pool".to_string(),
        ));
    }
    let user = cfg.user;
    let inquiry = user
        .primary_inquiries
        .first()
        .expect("validated persona has a primary inquiry");
    let evidence = retrieve(seed_pool, inquiry, k, EvidenceKind::UserReference, provider)?;

    let mut last: Option<(String, String)> = None;
    for attempt in 0..2u64 {
        let req = GenerationRequest::new("opening", PurposeTag::Opening)
            .var("persona_mindset", user.mindset.clone())
            .var("primary_inquiry", inquiry.clone())
            .var("utterances", user.potential_utterances.join("\n"))
            .var("basic_information", kv_join(&user.basic_information))
            .var("references", evidence_lines(&evidence))
            .decoding(Decoding {
                seed: derive_seed(session_seed, &format!("opening:{attempt}")),
                ..Decoding::default()
            });
        let raw = gw.generate(&req)?;
        let parsed: RawOpening = match serde_json::from_str(&raw) {
            Ok(p) => p,
            Err(e) => {
                last = Some((format!("unparseable JSON: {e}"), raw));
                continue;
            }
        };
        if parsed.text.trim().is_empty() {
            last = Some(("empty opening text".to_string(), raw));
            continue;
        }
        let contradicted = contradicted_slots(&parsed.inform, &user.basic_information);
        if !contradicted.is_empty() {
            last = Some((
                format!("inform contradicts persona attributes: {}", contradicted.join(", ")),
                raw,
            ));
            continue;
        }
        let mut turn = Turn::user(0, parsed.text);
        attach_inform(&mut turn, parsed.inform);
        attach_evidence(&mut turn, &evidence);
        return Ok(turn);
    }
    let (reason, raw) = last.expect("two attempts ran");
    Err(Error::Rejected {
        what: format!("opening for {}: {reason}", user.persona_id),
        raw,
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawUserTurn {
    text: String,
    inform: BTreeMap<String, String>,
    raised: Vec<String>,
    satisfied: bool,
}

/// What the simulated user signalled beyond the turn itself.
#[derive(Debug, Clone, Default)]
pub struct UserTurnSignal {
    /// Core requirements the user voiced this turn.
    pub raised: Vec<String>,
    /// True when the user considers every need addressed.
    pub satisfied: bool,
}

/// Simulates the next user turn from the persona, the agent's last message,
/// and behavioral evidence retrieved over similar agent messages.
///
/// Inform slots outside the ontology, or contradicting persona attributes,
/// are stripped with a warning. An empty generation is retried once; a second
/// failure aborts the session.
pub fn simulate_user_turn(
    state: &DialogueState,
    pool_agent_msgs: &RetrievalPool,
    user: &UserPersona,
    remaining_requirements: &[String],
    ontology: &SlotOntology,
    provider: &dyn EmbeddingProvider,
    k: usize,
    session_seed: u64,
    gw: &Gateway,
) -> Result<(Turn, UserTurnSignal)> {
    let last = state.last_turn().ok_or_else(|| {
        Error::Precondition("user simulation needs a preceding agent turn".to_string())
    })?;
    if last.role != Role::Agent {
        return Err(Error::Precondition(format!(
            "user simulation expects the last turn to be the agent's, found {}",
            last.role
        )));
    }
    let last_agent = last.text.clone();
    let evidence = retrieve(
        pool_agent_msgs,
        &last_agent,
        k,
        EvidenceKind::UserReference,
        provider,
    )?;
    let index = state.history.len();

    let mut failure = String::new();
    for attempt in 0..2u64 {
        let req = GenerationRequest::new("user_turn", PurposeTag::UserTurn)
            .var("persona_mindset", user.mindset.clone())
            .var("basic_information", kv_join(&user.basic_information))
            .var("last_agent", last_agent.clone())
            .var("requested", state.pending_requests.join("; "))
            .var("remaining_requirements", remaining_requirements.join("; "))
            .var("evidence", evidence_lines(&evidence))
            .decoding(Decoding {
                seed: derive_seed(session_seed, &format!("user:{index}:{attempt}")),
                ..Decoding::default()
            });
        let raw = gw.generate(&req)?;
        let parsed: RawUserTurn = match serde_json::from_str(&raw) {
            Ok(p) => p,
            Err(e) => {
                failure = format!("unparseable user turn: {e}");
                continue;
            }
        };
        if parsed.text.trim().is_empty() {
            failure = "empty user turn text".to_string();
            continue;
        }
        let mut inform = parsed.inform;
        apply_ontology_filter(&mut inform, ontology, "user turn");
        for slot in contradicted_slots(&inform, &user.basic_information) {
            log::warn!(
                "user turn: stripping slot `{slot}`, value contradicts persona {}",
                user.persona_id
            );
            inform.remove(&slot);
        }
        let mut turn = Turn::user(index, parsed.text);
        attach_inform(&mut turn, inform);
        attach_evidence(&mut turn, &evidence);
        return Ok((
            turn,
            UserTurnSignal {
                raised: parsed.raised,
                satisfied: parsed.satisfied,
            },
        ));
    }
    Err(Error::SessionAborted {
        stage: state.current_stage.clone(),
        message: failure,
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawAgentTurn {
    text: String,
    request: Vec<String>,
}

/// An agent turn plus the loop-control signal it carries.
#[derive(Debug, Clone)]
pub struct AgentTurnOutcome {
    pub turn: Turn,
    /// True when this turn closes the session (terminal blueprint node or
    /// user-declared satisfaction).
    pub closed: bool,
}

/// Knowledge-base entries relevant to the user's message: entries of every
/// entity named in the text, those matching a mentioned attribute first.
fn select_kb_facts<'a>(kb: &'a KnowledgeBase, user_text: &str, limit: usize) -> Vec<&'a KbEntry> {
    let lower = user_text.to_lowercase();
    let mut named: Vec<&str> = kb
        .entities()
        .into_iter()
        .filter(|e| lower.contains(&e.to_lowercase()))
        .collect();
    named.sort_unstable();
    named.dedup();
    let mut hits: Vec<&KbEntry> = Vec::new();
    for entity in named {
        hits.extend(kb_lookup(kb, entity, None));
    }
    hits.sort_by_key(|e| {
        let mentioned = e
            .attribute
            .split(['_', '-', ' '])
            .filter(|t| !t.is_empty())
            .any(|t| lower.contains(&t.to_lowercase()));
        (!mentioned, e.entity.clone(), e.attribute.clone())
    });
    hits.truncate(limit);
    hits
}

fn fact_lines(facts: &[&KbEntry]) -> String {
    facts
        .iter()
        .map(|e| format!("{} | {} | {}", e.entity, e.attribute, e.value))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Deterministic kb-grounded fallback used when a regenerated turn still
/// fails the entity-consistency check.
fn grounded_text(facts: &[&KbEntry], request_slots: &[String]) -> String {
    let mut sentences: Vec<String> = Vec::new();
    if let Some(fact) = facts.first() {
        sentences.push(format!(
            "For {}, the {} comes to {}.",
            fact.entity, fact.attribute, fact.value
        ));
    } else {
        sentences.push("Happy to help with that.".to_string());
    }
    for slot in request_slots {
        sentences.push(format!("Could you share your {slot}?"));
    }
    sentences.join(" ")
}

/// Picks the next slot to elicit: among the current stage's outgoing edges
/// with uninformed labels, the one whose label a guidance scenario mentions,
/// ties broken by edge order.
fn next_request_slot(
    blueprint: &Blueprint,
    guidance: &crate::blueprint::Guidance<'_>,
    inform: &BTreeMap<String, String>,
) -> Option<String> {
    let stage = &guidance.current_stage.name;
    let candidates: Vec<&str> = blueprint
        .flow_atlas
        .edges
        .iter()
        .filter(|e| &e.from == stage && !inform.contains_key(&e.label))
        .map(|e| e.label.as_str())
        .collect();
    if candidates.len() <= 1 {
        return candidates.first().map(|s| s.to_string());
    }
    let priority = |label: &str| {
        guidance
            .strategies
            .iter()
            .position(|s| s.situation.contains(label) || s.example_phrasing.contains(label))
            .unwrap_or(usize::MAX)
    };
    candidates
        .iter()
        .enumerate()
        .min_by_key(|(order, label)| (priority(label), *order))
        .map(|(_, label)| label.to_string())
}

/// Generates the agent's next turn under blueprint guidance, grounded on
/// knowledge-base facts and expert evidence retrieved over similar queries.
///
/// A factually inconsistent turn is regenerated once; if the regeneration
/// also fails the check, the turn is replaced by a kb-grounded statement.
pub fn generate_agent_turn(
    state: &DialogueState,
    pool_user_queries: &RetrievalPool,
    agent: &AgentPersona,
    blueprint: &Blueprint,
    kb: &KnowledgeBase,
    user_satisfied: bool,
    provider: &dyn EmbeddingProvider,
    k: usize,
    session_seed: u64,
    gw: &Gateway,
) -> Result<AgentTurnOutcome> {
    let last = state.last_turn().ok_or_else(|| {
        Error::Precondition("agent generation needs a preceding user turn".to_string())
    })?;
    if last.role != Role::User {
        return Err(Error::Precondition(format!(
            "agent generation expects the last turn to be the user's, found {}",
            last.role
        )));
    }
    let user_text = last.text.clone();
    let evidence = retrieve(
        pool_user_queries,
        &user_text,
        k,
        EvidenceKind::AgentReference,
        provider,
    )?;
    let guidance = blueprint_guidance(blueprint, state);
    let closing = user_satisfied || guidance.reached_outcome.is_some();
    let request_slots: Vec<String> = if closing {
        Vec::new()
    } else {
        next_request_slot(blueprint, &guidance, &state.cumulative_inform)
            .into_iter()
            .collect()
    };
    let facts = select_kb_facts(kb, &user_text, 4);
    let strategies = guidance
        .strategies
        .iter()
        .take(3)
        .map(|s| format!("{} => {}", s.situation, s.coping_strategy))
        .collect::<Vec<_>>()
        .join("\n");
    let index = state.history.len();

    let mut failure = String::new();
    for attempt in 0..2u64 {
        let req = GenerationRequest::new("agent_turn", PurposeTag::AgentTurn)
            .var("persona_style", agent.linguistic_style.clone())
            .var("stage", guidance.current_stage.name.clone())
            .var("strategies", strategies.clone())
            .var("user_text", user_text.clone())
            .var("kb_facts", fact_lines(&facts))
            .var("evidence", evidence_lines(&evidence))
            .var("request_slots", request_slots.join("; "))
            .var("closing", if closing { "true" } else { "false" })
            .decoding(Decoding {
                seed: derive_seed(session_seed, &format!("agent:{index}:{attempt}")),
                ..Decoding::default()
            });
        let raw = gw.generate(&req)?;
        let parsed: RawAgentTurn = match serde_json::from_str(&raw) {
            Ok(p) => p,
            Err(e) => {
                failure = format!("unparseable agent turn: {e}");
                continue;
            }
        };
        if parsed.text.trim().is_empty() {
            failure = "empty agent turn text".to_string();
            continue;
        }
        let (consistent, mismatches) = check_entity_consistency(&user_text, &parsed.text, kb);
        let text = if consistent {
            parsed.text
        } else if attempt == 0 {
            failure = format!(
                "entity-inconsistent agent turn: {}",
                mismatches
                    .iter()
                    .map(|m| m.kind.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            continue;
        } else {
            // Second failure: replace the claim with grounded content.
            log::warn!(
                "agent turn {index}: regeneration still inconsistent ({} mismatches), replacing with kb-grounded statement",
                mismatches.len()
            );
            grounded_text(&facts, &request_slots)
        };
        // Requests never re-ask informed slots, whatever the model emitted.
        let requests: Vec<String> = parsed
            .request
            .into_iter()
            .filter(|slot| !state.cumulative_inform.contains_key(slot))
            .collect();
        let mut turn = Turn::agent(index, text);
        if !requests.is_empty() {
            turn.request_block = Some(requests);
        }
        attach_evidence(&mut turn, &evidence);
        return Ok(AgentTurnOutcome { turn, closed: closing });
    }
    Err(Error::SessionAborted {
        stage: state.current_stage.clone(),
        message: failure,
    })
}

/// Runs one full session under a sampled configuration.
///
/// In mock or replay mode the result is a deterministic function of the
/// configuration and `session_seed`. Errors abort the whole session; no
/// partial history escapes this function.
pub fn run_session(
    dialogue_id: &str,
    cfg: &SessionConfig<'_>,
    pools: &SessionPools<'_>,
    kb: &KnowledgeBase,
    ontology: &SlotOntology,
    limits: &SessionLimits,
    provider: &dyn EmbeddingProvider,
    session_seed: u64,
    gw: &Gateway,
) -> Result<SessionQuadruplet> {
    if limits.max_turns < 2 {
        return Err(Error::Precondition(format!(
            "max_turns must allow at least one exchange, got {}",
            limits.max_turns
        )));
    }
    let blueprint = cfg.blueprint;
    let initial_stage = blueprint
        .rhythm
        .first()
        .ok_or_else(|| Error::Precondition("blueprint has no stages".to_string()))?
        .name
        .clone();
    let mut state = DialogueState::new(initial_stage, limits.max_turns);

    let mut opening = synthesize_opening(
        cfg,
        pools.seed_openings,
        provider,
        limits.retrieval_k,
        session_seed,
        gw,
    )?;
    if let Some(block) = opening.inform_block.take() {
        let mut block = block;
        apply_ontology_filter(&mut block, ontology, "opening");
        attach_inform(&mut opening, block);
    }
    state.push_user_turn(opening);

    let mut remaining: Vec<String> = cfg.user.core_requirements.clone();
    let mut user_satisfied = false;
    loop {
        let outcome = generate_agent_turn(
            &state,
            pools.user_queries,
            cfg.agent,
            blueprint,
            kb,
            user_satisfied,
            provider,
            limits.retrieval_k,
            session_seed,
            gw,
        )?;
        state.push_agent_turn(outcome.turn);
        let guidance = blueprint_guidance(blueprint, &state);
        state.current_stage = guidance.current_stage.name.clone();
        if outcome.closed || state.turn_budget_remaining == 0 {
            break;
        }

        let (user_turn, signal) = simulate_user_turn(
            &state,
            pools.agent_messages,
            cfg.user,
            &remaining,
            ontology,
            provider,
            limits.retrieval_k,
            session_seed,
            gw,
        )?;
        state.push_user_turn(user_turn);
        remaining.retain(|need| !signal.raised.contains(need));
        user_satisfied = signal.satisfied;
        if state.turn_budget_remaining == 0 {
            break;
        }
    }

    debug_assert!(state.inform_fold_consistent());
    Ok(SessionQuadruplet {
        dialogue_id: dialogue_id.to_string(),
        user_persona_id: cfg.user.persona_id.clone(),
        agent_persona_id: cfg.agent.persona_id.clone(),
        blueprint_id: blueprint.blueprint_id.clone(),
        domain: blueprint.domain.clone(),
        history: state.history,
    })
}

#[derive(Debug, Clone)]
pub struct GenerationPhaseConfig {
    pub sessions: usize,
    pub master_seed: u64,
    pub limits: SessionLimits,
}

#[derive(Debug, Default)]
pub struct GenerationPhaseOutput {
    pub sessions: Vec<SessionQuadruplet>,
    /// Aborted sessions, audit only: (dialogue id, reason).
    pub aborted: Vec<(String, String)>,
}

/// Batch driver. Sessions are independent tasks over the rayon pool; all
/// shared state is read-only, and output order is fixed by session index, so
/// reruns are byte-identical in mock/replay mode.
pub fn run_generation_phase(
    users: &[UserPersona],
    agents: &[AgentPersona],
    blueprints: &BlueprintStore,
    pools: &SessionPools<'_>,
    kbs: &KbRegistry,
    ontologies: &BTreeMap<String, SlotOntology>,
    cfg: &GenerationPhaseConfig,
    provider: &dyn EmbeddingProvider,
    gw: &Gateway,
) -> Result<GenerationPhaseOutput> {
    let index = StoreIndex {
        user_ids: users.iter().map(|u| u.persona_id.clone()).collect(),
        agent_ids: agents.iter().map(|a| a.persona_id.clone()).collect(),
        blueprint_ids: blueprints.all().iter().map(|b| b.blueprint_id.clone()).collect(),
    };

    let results: Vec<Result<std::result::Result<SessionQuadruplet, (String, String)>>> = (0..cfg
        .sessions)
        .into_par_iter()
        .map(|i| {
            let dialogue_id = format!("dlg-{i:06}");
            let session_seed = derive_seed(cfg.master_seed, &format!("session:{i}"));
            let config = select_configuration(users, agents, blueprints, provider, session_seed)?;
            let kb = kbs.get(&config.agent.knowledge_base_ref).ok_or_else(|| {
                Error::Precondition(format!(
                    "agent {} references unregistered knowledge base {}",
                    config.agent.persona_id, config.agent.knowledge_base_ref
                ))
            })?;
            let ontology = ontologies
                .get(config.blueprint.domain.label())
                .ok_or_else(|| {
                    Error::Precondition(format!(
                        "no slot ontology configured for domain {}",
                        config.blueprint.domain
                    ))
                })?;
            match run_session(
                &dialogue_id,
                &config,
                pools,
                kb,
                ontology,
                &cfg.limits,
                provider,
                session_seed,
                gw,
            ) {
                Ok(quadruplet) => {
                    let report = validate_quadruplet(&quadruplet, &index);
                    if report.accepted() {
                        Ok(Ok(quadruplet))
                    } else {
                        Ok(Err((dialogue_id, format!("schema violations: {report}"))))
                    }
                }
                // Per-session aborts are recorded, not fatal; budget
                // exhaustion stops the whole run.
                Err(e @ Error::BudgetExceeded { .. }) => Err(e),
                Err(e) => Ok(Err((dialogue_id, e.to_string()))),
            }
        })
        .collect();

    let mut out = GenerationPhaseOutput::default();
    for result in results {
        match result? {
            Ok(quadruplet) => out.sessions.push(quadruplet),
            Err((dialogue_id, reason)) => {
                log::warn!("session {dialogue_id} aborted: {reason}");
                out.aborted.push((dialogue_id, reason));
            }
        }
    }
    Ok(out)
}

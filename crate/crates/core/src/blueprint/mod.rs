//! Conversational blueprints: staged rhythm, key signal nodes, coping
//! scenarios, and an executable flow atlas.
//!
//! A blueprint compiles a domain's strategy-tag distribution and an agent
//! persona into a directed plan the generation loop can follow. Edges are
//! labeled with key-node signal names, so "advance along this edge" means
//! "this slot is now informed"; that makes the atlas executable rather than
//! illustrative.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Decoding, Gateway, GenerationRequest, PurposeTag};
use crate::generation::DialogueState;
use crate::ingest::{AtomicSignals, StrategyTag};
use crate::persona::{seed_excerpts, tag_summary};
use crate::schema::{AgentPersona, Domain, SeedDialogue, SlotOntology, ValidationReport};
use crate::util::derive_seed;

/// One rhythm stage. `entry_condition` gates when the conversation is
/// considered to have reached this stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub goal: String,
    pub entry_condition: EntryCondition,
}

/// Predicate over the cumulative inform block: every listed slot must be
/// present. Presence is the minimal machine-checkable reading of "the user
/// signal has triggered".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntryCondition {
    pub required_slots: Vec<String>,
}

impl EntryCondition {
    pub fn is_satisfied(&self, inform: &BTreeMap<String, String>) -> bool {
        self.required_slots.iter().all(|s| inform.contains_key(s))
    }
}

/// A business-meaningful user signal the agent watches for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyNode {
    pub signal_name: String,
    pub business_meaning: String,
    pub trigger_value: String,
}

/// A typical situation and how the agent should cope with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub situation: String,
    pub coping_strategy: String,
    pub example_phrasing: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from: String,
    pub to: String,
    /// Key-node signal gating this transition.
    pub label: String,
}

/// Directed graph over stage names plus terminal outcome nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowAtlas {
    pub edges: Vec<FlowEdge>,
    pub outcomes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blueprint {
    pub blueprint_id: String,
    pub domain: Domain,
    pub rhythm: Vec<Stage>,
    pub key_nodes: Vec<KeyNode>,
    pub scenarios: Vec<Scenario>,
    pub flow_atlas: FlowAtlas,
    /// Strategy-tag distribution this blueprint was built from.
    pub provenance: String,
}

/// Structural validation: stage ordering, node uniqueness, edge sanity,
/// reachability from the initial stage, and key-node/edge-label agreement.
pub fn validate_blueprint(b: &Blueprint) -> ValidationReport {
    let mut report = ValidationReport::new();
    if b.blueprint_id.is_empty() {
        report.push("empty id", "blueprint has an empty blueprint_id");
    }
    if b.rhythm.is_empty() {
        report.push("empty rhythm", format!("blueprint {} has no stages", b.blueprint_id));
    }
    if b.flow_atlas.outcomes.is_empty() {
        report.push(
            "missing terminal",
            format!("blueprint {} has no outcome node", b.blueprint_id),
        );
    }

    let mut nodes: BTreeSet<&str> = BTreeSet::new();
    let stage_names: BTreeSet<&str> = b.rhythm.iter().map(|s| s.name.as_str()).collect();
    for stage in &b.rhythm {
        if !nodes.insert(stage.name.as_str()) {
            report.push(
                "duplicate node",
                format!("stage name `{}` appears more than once", stage.name),
            );
        }
    }
    for outcome in &b.flow_atlas.outcomes {
        if !nodes.insert(outcome.as_str()) {
            report.push(
                "duplicate node",
                format!("outcome `{outcome}` collides with another node"),
            );
        }
    }

    let signals: BTreeSet<&str> = b.key_nodes.iter().map(|k| k.signal_name.as_str()).collect();
    let mut labels_used: BTreeSet<&str> = BTreeSet::new();
    for edge in &b.flow_atlas.edges {
        if !stage_names.contains(edge.from.as_str()) {
            report.push(
                "dangling edge",
                format!("edge departs from `{}`, which is not a stage", edge.from),
            );
        }
        if !nodes.contains(edge.to.as_str()) {
            report.push(
                "dangling edge",
                format!("edge arrives at unknown node `{}`", edge.to),
            );
        }
        if !signals.contains(edge.label.as_str()) {
            report.push(
                "unknown edge label",
                format!("edge label `{}` names no key node", edge.label),
            );
        }
        labels_used.insert(edge.label.as_str());
    }
    for key in &b.key_nodes {
        if !labels_used.contains(key.signal_name.as_str()) {
            report.push(
                "orphan key node",
                format!("key node `{}` is referenced by no flow edge", key.signal_name),
            );
        }
    }

    // Reachability from the initial stage over the directed edges.
    if let Some(initial) = b.rhythm.first() {
        let mut reached: BTreeSet<&str> = BTreeSet::new();
        let mut frontier = vec![initial.name.as_str()];
        while let Some(node) = frontier.pop() {
            if !reached.insert(node) {
                continue;
            }
            for edge in &b.flow_atlas.edges {
                if edge.from == node {
                    frontier.push(edge.to.as_str());
                }
            }
        }
        for stage in &b.rhythm {
            if !reached.contains(stage.name.as_str()) {
                report.push(
                    "unreachable node",
                    format!("stage `{}` is unreachable from `{}`", stage.name, initial.name),
                );
            }
        }
        for outcome in &b.flow_atlas.outcomes {
            if !reached.contains(outcome.as_str()) {
                report.push(
                    "unreachable node",
                    format!("outcome `{outcome}` is unreachable from `{}`", initial.name),
                );
            }
        }
    }
    report
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawStage {
    name: String,
    goal: String,
    requires: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawBlueprint {
    stages: Vec<RawStage>,
    key_nodes: Vec<KeyNode>,
    scenarios: Vec<Scenario>,
    edges: Vec<FlowEdge>,
    outcomes: Vec<String>,
}

fn parse_blueprint(
    blueprint_id: &str,
    domain: &Domain,
    provenance: &str,
    raw: &str,
) -> std::result::Result<Blueprint, String> {
    let parsed: RawBlueprint =
        serde_json::from_str(raw).map_err(|e| format!("unparseable JSON: {e}"))?;
    let blueprint = Blueprint {
        blueprint_id: blueprint_id.to_string(),
        domain: domain.clone(),
        rhythm: parsed
            .stages
            .into_iter()
            .map(|s| Stage {
                name: s.name,
                goal: s.goal,
                entry_condition: EntryCondition {
                    required_slots: s.requires,
                },
            })
            .collect(),
        key_nodes: parsed.key_nodes,
        scenarios: parsed.scenarios,
        flow_atlas: FlowAtlas {
            edges: parsed.edges,
            outcomes: parsed.outcomes,
        },
        provenance: provenance.to_string(),
    };
    let report = validate_blueprint(&blueprint);
    if !report.accepted() {
        let codes: Vec<&str> = report.violations.iter().map(|v| v.code.as_str()).collect();
        return Err(codes.join("; "));
    }
    Ok(blueprint)
}

/// Builds a blueprint from strategy tags, the agent persona, the domain slot
/// ontology, and seed excerpts. The output must validate; one regeneration is
/// attempted before the synthesis is rejected with the raw payload.
pub fn build_blueprint(
    blueprint_id: &str,
    tags: &[StrategyTag],
    agent: &AgentPersona,
    seeds: &[&SeedDialogue],
    ontology: &SlotOntology,
    gw: &Gateway,
) -> Result<Blueprint> {
    if tags.is_empty() {
        return Err(Error::Precondition(format!(
            "blueprint {blueprint_id} needs a non-empty strategy-tag list"
        )));
    }
    let provenance = tag_summary(tags);
    let agent_summary = format!("{} | {}", agent.identity_positioning, agent.linguistic_style);
    let excerpts = seed_excerpts(seeds, 4);

    let mut last: Option<(String, String)> = None;
    for attempt in 0..2u64 {
        let req = GenerationRequest::new("blueprint", PurposeTag::Blueprint)
            .var("domain", agent.domain.label())
            .var("agent_summary", agent_summary.clone())
            .var("tag_summary", provenance.clone())
            .var("ontology", ontology.slots.join("; "))
            .var("seed_excerpts", excerpts.clone())
            .decoding(Decoding {
                seed: attempt,
                ..Decoding::default()
            });
        let raw = gw.generate(&req)?;
        match parse_blueprint(blueprint_id, &agent.domain, &provenance, &raw) {
            Ok(blueprint) => return Ok(blueprint),
            Err(reason) => {
                log::warn!("blueprint {blueprint_id} attempt {attempt} invalid: {reason}");
                last = Some((reason, raw));
            }
        }
    }
    let (reason, raw) = last.expect("two attempts ran");
    Err(Error::Rejected {
        what: format!("blueprint {blueprint_id}: {reason}"),
        raw,
    })
}

/// What the blueprint tells the agent right now.
#[derive(Debug, Clone, PartialEq)]
pub struct Guidance<'a> {
    pub current_stage: &'a Stage,
    pub strategies: Vec<&'a Scenario>,
    /// Successor node names of the current stage, in edge order.
    pub successors: Vec<&'a str>,
    /// Set when a terminal outcome's gating slot is informed.
    pub reached_outcome: Option<&'a str>,
}

fn content_tokens(text: &str) -> BTreeSet<String> {
    const SKIP: &[&str] = &[
        "user", "during", "about", "with", "that", "this", "have", "what", "when", "where",
        "your", "the", "and", "for",
    ];
    let mut out = BTreeSet::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            out.insert(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.insert(current);
    }
    out.retain(|t| t.chars().count() >= 3 && !SKIP.contains(&t.as_str()));
    out
}

/// Pure guidance function: identical (blueprint, state) yield identical
/// output.
///
/// The current stage is the furthest rhythm stage whose entry condition the
/// cumulative inform satisfies (the initial stage when none later qualifies).
/// Strategies are scenarios sharing a content token with the latest user
/// text; if none match the fallback is scenarios naming the current stage,
/// then all scenarios. Successors come from the flow atlas; when an outcome
/// edge's gating slot is informed the successor list is empty and the outcome
/// is reported, which is the loop's termination signal.
pub fn blueprint_guidance<'a>(b: &'a Blueprint, state: &DialogueState) -> Guidance<'a> {
    assert!(!b.rhythm.is_empty(), "guidance requires a validated blueprint");
    let inform = &state.cumulative_inform;

    let mut current = &b.rhythm[0];
    for stage in &b.rhythm {
        if stage.entry_condition.is_satisfied(inform) {
            current = stage;
        }
    }

    let outcomes: BTreeSet<&str> = b.flow_atlas.outcomes.iter().map(String::as_str).collect();
    let satisfied: BTreeSet<&str> = b
        .rhythm
        .iter()
        .filter(|s| s.entry_condition.is_satisfied(inform))
        .map(|s| s.name.as_str())
        .collect();
    let reached_outcome = b
        .flow_atlas
        .edges
        .iter()
        .find(|e| {
            outcomes.contains(e.to.as_str())
                && satisfied.contains(e.from.as_str())
                && inform.contains_key(&e.label)
        })
        .map(|e| e.to.as_str());

    let successors: Vec<&str> = if reached_outcome.is_some() {
        Vec::new()
    } else {
        b.flow_atlas
            .edges
            .iter()
            .filter(|e| e.from == current.name)
            .map(|e| e.to.as_str())
            .collect()
    };

    let mut strategies: Vec<&Scenario> = Vec::new();
    if let Some(user_text) = state.latest_user_text() {
        let user_tokens = content_tokens(user_text);
        strategies = b
            .scenarios
            .iter()
            .filter(|s| !content_tokens(&s.situation).is_disjoint(&user_tokens))
            .collect();
    }
    if strategies.is_empty() {
        strategies = b
            .scenarios
            .iter()
            .filter(|s| s.situation.contains(&current.name))
            .collect();
    }
    if strategies.is_empty() {
        strategies = b.scenarios.iter().collect();
    }

    Guidance {
        current_stage: current,
        strategies,
        successors,
        reached_outcome,
    }
}

/// Validated, id-unique blueprint collection.
#[derive(Debug, Clone, Default)]
pub struct BlueprintStore {
    blueprints: Vec<Blueprint>,
    ids: BTreeSet<String>,
}

impl BlueprintStore {
    pub fn new() -> BlueprintStore {
        BlueprintStore::default()
    }

    pub fn insert(&mut self, blueprint: Blueprint) -> Result<()> {
        let report = validate_blueprint(&blueprint);
        if !report.accepted() {
            return Err(Error::Precondition(format!(
                "invalid blueprint {}: {}",
                blueprint.blueprint_id, report
            )));
        }
        if !self.ids.insert(blueprint.blueprint_id.clone()) {
            return Err(Error::Precondition(format!(
                "duplicate blueprint id {}",
                blueprint.blueprint_id
            )));
        }
        self.blueprints.push(blueprint);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Blueprint> {
        self.blueprints.iter().find(|b| b.blueprint_id == id)
    }

    pub fn by_domain(&self, domain: &Domain) -> Vec<&Blueprint> {
        self.blueprints.iter().filter(|b| &b.domain == domain).collect()
    }

    pub fn all(&self) -> &[Blueprint] {
        &self.blueprints
    }

    pub fn len(&self) -> usize {
        self.blueprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blueprints.is_empty()
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<BlueprintStore> {
        let records: Vec<Blueprint> = crate::schema::read_jsonl(path)?;
        let mut store = BlueprintStore::new();
        for record in records {
            store.insert(record)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::schema::write_jsonl(path, &self.blueprints)
    }
}

#[derive(Debug, Default)]
pub struct BlueprintPhaseOutput {
    pub store: BlueprintStore,
    /// Rejected syntheses kept for audit: (what failed, raw model output).
    pub rejected: Vec<(String, String)>,
}

/// Batch driver: one blueprint per agent persona, built from that domain's
/// strategy tags plus sampled seed dialogues.
pub fn run_blueprint_phase(
    per_domain: &BTreeMap<String, AtomicSignals>,
    agents: &[AgentPersona],
    seeds: &[SeedDialogue],
    ontologies: &BTreeMap<String, SlotOntology>,
    seeds_per_prompt: usize,
    gw: &Gateway,
    phase_seed: u64,
) -> Result<BlueprintPhaseOutput> {
    let mut out = BlueprintPhaseOutput::default();
    for (i, agent) in agents.iter().enumerate() {
        let label = agent.domain.label().to_string();
        let blueprint_id = format!("bp-{label}-{i:04}");
        let tags = per_domain
            .get(&label)
            .map(|s| s.strategy_tags.as_slice())
            .unwrap_or(&[]);
        let ontology = ontologies.get(&label).ok_or_else(|| {
            Error::Precondition(format!("no slot ontology configured for domain {label}"))
        })?;
        let domain_seeds: Vec<&SeedDialogue> =
            seeds.iter().filter(|s| s.domain == agent.domain).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(phase_seed, &format!("blueprint:{label}:{i}")));
        let take = seeds_per_prompt.min(domain_seeds.len());
        let chosen: Vec<&SeedDialogue> = if take == 0 {
            Vec::new()
        } else {
            rand::seq::index::sample(&mut rng, domain_seeds.len(), take)
                .into_iter()
                .map(|ix| domain_seeds[ix])
                .collect()
        };
        match build_blueprint(&blueprint_id, tags, agent, &chosen, ontology, gw) {
            Ok(blueprint) => out.store.insert(blueprint)?,
            Err(Error::Rejected { what, raw }) => out.rejected.push((what, raw)),
            Err(Error::Precondition(message)) => {
                // A domain without tags cannot seed a blueprint; skip, audit.
                log::warn!("skipping {blueprint_id}: {message}");
                out.rejected.push((format!("blueprint {blueprint_id}: {message}"), String::new()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewayConfig, GatewayMode, ScriptedBackend, TemplateStore};
    use proptest::prelude::*;

    fn tag(label: &str) -> StrategyTag {
        StrategyTag {
            label: label.to_string(),
            confidence: 1.0,
            span: "s@1".to_string(),
        }
    }

    fn tags_for(counts: &[(&str, usize)]) -> Vec<StrategyTag> {
        let mut out = Vec::new();
        for (label, n) in counts {
            for _ in 0..*n {
                out.push(tag(label));
            }
        }
        out
    }

    fn dealer_agent() -> AgentPersona {
        AgentPersona {
            persona_id: "ap-0".to_string(),
            identity_positioning: "certified dealer serving the automotive domain".to_string(),
            linguistic_style: "warm and concise".to_string(),
            service_boundaries: vec!["new vehicle sales consultation".to_string()],
            knowledge_base_ref: "kb-auto".to_string(),
            domain: Domain::Automotive,
        }
    }

    fn auto_ontology() -> SlotOntology {
        SlotOntology {
            domain: Domain::Automotive,
            slots: ["intent", "budget", "usage_scenario", "timeline"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    /// Hand-written linear fixture: greeting -> needs -> booking(terminal).
    fn linear_blueprint() -> Blueprint {
        Blueprint {
            blueprint_id: "bp-test".to_string(),
            domain: Domain::Automotive,
            rhythm: vec![
                Stage {
                    name: "greeting".to_string(),
                    goal: "open the conversation".to_string(),
                    entry_condition: EntryCondition::default(),
                },
                Stage {
                    name: "needs".to_string(),
                    goal: "collect requirements".to_string(),
                    entry_condition: EntryCondition {
                        required_slots: vec!["intent".to_string()],
                    },
                },
            ],
            key_nodes: vec![
                KeyNode {
                    signal_name: "intent".to_string(),
                    business_meaning: "user has stated intent".to_string(),
                    trigger_value: "present".to_string(),
                },
                KeyNode {
                    signal_name: "budget".to_string(),
                    business_meaning: "user has stated budget".to_string(),
                    trigger_value: "present".to_string(),
                },
            ],
            scenarios: vec![
                Scenario {
                    situation: "user hesitates during greeting".to_string(),
                    coping_strategy: "reassure".to_string(),
                    example_phrasing: "No rush at all.".to_string(),
                },
                Scenario {
                    situation: "user hesitates during needs".to_string(),
                    coping_strategy: "offer one concrete next step".to_string(),
                    example_phrasing: "Shall we settle budget first?".to_string(),
                },
            ],
            flow_atlas: FlowAtlas {
                edges: vec![
                    FlowEdge {
                        from: "greeting".to_string(),
                        to: "needs".to_string(),
                        label: "intent".to_string(),
                    },
                    FlowEdge {
                        from: "needs".to_string(),
                        to: "booking".to_string(),
                        label: "budget".to_string(),
                    },
                ],
                outcomes: vec!["booking".to_string()],
            },
            provenance: "greeting:1".to_string(),
        }
    }

    #[test]
    fn linear_fixture_is_valid() {
        assert!(validate_blueprint(&linear_blueprint()).accepted());
    }

    #[test]
    fn unreachable_outcome_is_flagged() {
        let mut b = linear_blueprint();
        b.flow_atlas.outcomes.push("orphaned".to_string());
        let report = validate_blueprint(&b);
        assert!(report.has_code("unreachable node"), "{report:?}");
    }

    #[test]
    fn unreferenced_key_node_is_flagged() {
        let mut b = linear_blueprint();
        b.key_nodes.push(KeyNode {
            signal_name: "email".to_string(),
            business_meaning: "user has shared an email".to_string(),
            trigger_value: "present".to_string(),
        });
        let report = validate_blueprint(&b);
        assert!(report.has_code("orphan key node"), "{report:?}");
    }

    #[test]
    fn dangling_edge_and_unknown_label_are_flagged() {
        let mut b = linear_blueprint();
        b.flow_atlas.edges.push(FlowEdge {
            from: "needs".to_string(),
            to: "nowhere".to_string(),
            label: "no_such_signal".to_string(),
        });
        let report = validate_blueprint(&b);
        assert!(report.has_code("dangling edge"), "{report:?}");
        assert!(report.has_code("unknown edge label"), "{report:?}");
    }

    #[test]
    fn empty_rhythm_and_missing_terminal_are_flagged() {
        let mut b = linear_blueprint();
        b.rhythm.clear();
        b.flow_atlas.outcomes.clear();
        let report = validate_blueprint(&b);
        assert!(report.has_code("empty rhythm"));
        assert!(report.has_code("missing terminal"));
    }

    #[test]
    fn mock_blueprint_mirrors_the_tag_distribution() {
        let gw = Gateway::mock();
        let tags = tags_for(&[("greeting", 4), ("requirement_mining", 3), ("conversion", 2)]);
        let blueprint = build_blueprint(
            "bp-0",
            &tags,
            &dealer_agent(),
            &[],
            &auto_ontology(),
            &gw,
        )
        .unwrap();
        let names: Vec<&str> = blueprint.rhythm.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, vec!["greeting", "requirement_mining", "conversion"]);
        assert!(validate_blueprint(&blueprint).accepted());
        assert_eq!(blueprint.flow_atlas.outcomes, vec!["resolution"]);
        assert_eq!(
            blueprint.provenance,
            "greeting:4; requirement_mining:3; conversion:2"
        );
        // Determinism: same inputs give a byte-identical blueprint.
        let again = build_blueprint(
            "bp-0",
            &tags,
            &dealer_agent(),
            &[],
            &auto_ontology(),
            &gw,
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&blueprint).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn empty_tag_list_is_a_precondition_error() {
        let gw = Gateway::mock();
        let err = build_blueprint("bp-0", &[], &dealer_agent(), &[], &auto_ontology(), &gw)
            .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn invalid_output_is_regenerated_once_then_rejected() {
        let gw = Gateway::new(
            TemplateStore::builtin(),
            Box::new(ScriptedBackend::new("scripted", vec!["bad", "worse"])),
            GatewayConfig {
                mode: GatewayMode::Live,
                ..GatewayConfig::default()
            },
        );
        let err = build_blueprint(
            "bp-0",
            &tags_for(&[("greeting", 1)]),
            &dealer_agent(),
            &[],
            &auto_ontology(),
            &gw,
        )
        .unwrap_err();
        match err {
            Error::Rejected { what, raw } => {
                assert!(what.contains("bp-0"));
                assert_eq!(raw, "worse");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(gw.usage()["blueprint"], 2, "exactly one regeneration");
    }

    #[test]
    fn empty_ontology_yields_rejection_via_validation() {
        let gw = Gateway::mock();
        let ontology = SlotOntology {
            domain: Domain::Automotive,
            slots: Vec::new(),
        };
        let err = build_blueprint(
            "bp-0",
            &tags_for(&[("greeting", 1)]),
            &dealer_agent(),
            &[],
            &ontology,
            &gw,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Rejected { .. }));
    }

    #[test]
    fn fresh_state_gets_the_initial_stage() {
        let b = linear_blueprint();
        let state = DialogueState::new("greeting", 40);
        let g = blueprint_guidance(&b, &state);
        assert_eq!(g.current_stage.name, "greeting");
        assert_eq!(g.successors, vec!["needs"]);
        assert!(g.reached_outcome.is_none());
        assert_eq!(g.strategies.len(), 1);
        assert!(g.strategies[0].situation.contains("greeting"));
    }

    #[test]
    fn satisfied_entry_condition_advances_the_stage() {
        let b = linear_blueprint();
        let mut state = DialogueState::new("greeting", 40);
        let mut turn = crate::schema::Turn::user(0, "I want to buy an SUV.");
        turn.inform_block = Some(
            [("intent".to_string(), "buy an SUV".to_string())]
                .into_iter()
                .collect(),
        );
        state.push_user_turn(turn);
        let g = blueprint_guidance(&b, &state);
        assert_eq!(g.current_stage.name, "needs");
        assert_eq!(g.successors, vec!["booking"]);
        assert!(g.reached_outcome.is_none());
    }

    #[test]
    fn informed_outcome_edge_signals_termination() {
        let b = linear_blueprint();
        let mut state = DialogueState::new("greeting", 40);
        let mut turn = crate::schema::Turn::user(0, "SUV, budget 200k.");
        turn.inform_block = Some(
            [
                ("intent".to_string(), "buy an SUV".to_string()),
                ("budget".to_string(), "200k".to_string()),
            ]
            .into_iter()
            .collect(),
        );
        state.push_user_turn(turn);
        let g = blueprint_guidance(&b, &state);
        assert_eq!(g.reached_outcome, Some("booking"));
        assert!(g.successors.is_empty());
    }

    #[test]
    fn guidance_is_pure() {
        let b = linear_blueprint();
        let state = DialogueState::new("greeting", 40);
        let first = blueprint_guidance(&b, &state);
        let second = blueprint_guidance(&b, &state);
        assert_eq!(first, second);
    }

    #[test]
    fn scenario_matching_prefers_token_overlap_with_user_text() {
        let b = linear_blueprint();
        let mut state = DialogueState::new("greeting", 40);
        state.push_user_turn(crate::schema::Turn::user(
            0,
            "I keep hesitating, the needs list overwhelms me",
        ));
        let g = blueprint_guidance(&b, &state);
        // "needs" overlaps the second scenario's situation tokens.
        assert!(g
            .strategies
            .iter()
            .any(|s| s.situation.contains("needs")), "{:?}", g.strategies);
    }

    #[test]
    fn store_rejects_duplicates_and_invalid_blueprints() {
        let mut store = BlueprintStore::new();
        store.insert(linear_blueprint()).unwrap();
        assert!(store.insert(linear_blueprint()).is_err());
        let mut bad = linear_blueprint();
        bad.blueprint_id = "bp-bad".to_string();
        bad.rhythm.clear();
        assert!(store.insert(bad).is_err());
        assert_eq!(store.len(), 1);
        assert_eq!(store.by_domain(&Domain::Automotive).len(), 1);
        assert!(store.by_domain(&Domain::Hotel).is_empty());
    }

    #[test]
    fn store_round_trips_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("blueprints.jsonl");
        let mut store = BlueprintStore::new();
        store.insert(linear_blueprint()).unwrap();
        store.save(&path).unwrap();
        let loaded = BlueprintStore::load(&path).unwrap();
        assert_eq!(loaded.get("bp-test"), store.get("bp-test"));
    }

    #[test]
    fn phase_driver_builds_one_blueprint_per_agent() {
        let gw = Gateway::mock();
        let mut per_domain: BTreeMap<String, AtomicSignals> = BTreeMap::new();
        per_domain.insert(
            "automotive".to_string(),
            AtomicSignals {
                strategy_tags: tags_for(&[("greeting", 2), ("conversion", 1)]),
                ..AtomicSignals::default()
            },
        );
        let mut ontologies = BTreeMap::new();
        ontologies.insert("automotive".to_string(), auto_ontology());
        let agents = vec![dealer_agent()];
        let out = run_blueprint_phase(&per_domain, &agents, &[], &ontologies, 2, &gw, 7).unwrap();
        assert_eq!(out.store.len(), 1);
        assert!(out.rejected.is_empty());
        assert!(out.store.get("bp-automotive-0000").is_some());
    }

    proptest! {
        /// For arbitrary linear blueprints and arbitrary informed subsets,
        /// guidance always lands on a defined stage and successors stay
        /// inside the node set.
        #[test]
        fn guidance_is_total_over_reachable_states(
            n in 2usize..6,
            informed_mask in proptest::collection::vec(proptest::bool::ANY, 5),
        ) {
            let slots: Vec<String> = (0..n).map(|i| format!("slot{i}")).collect();
            let stages: Vec<Stage> = (0..n)
                .map(|i| Stage {
                    name: format!("stage{i}"),
                    goal: String::new(),
                    entry_condition: EntryCondition {
                        required_slots: slots[..i].to_vec(),
                    },
                })
                .collect();
            let mut edges: Vec<FlowEdge> = (0..n - 1)
                .map(|i| FlowEdge {
                    from: format!("stage{i}"),
                    to: format!("stage{}", i + 1),
                    label: slots[i].clone(),
                })
                .collect();
            edges.push(FlowEdge {
                from: format!("stage{}", n - 1),
                to: "done".to_string(),
                label: slots[n - 1].clone(),
            });
            let b = Blueprint {
                blueprint_id: "bp-prop".to_string(),
                domain: Domain::Automotive,
                rhythm: stages,
                key_nodes: slots
                    .iter()
                    .map(|s| KeyNode {
                        signal_name: s.clone(),
                        business_meaning: String::new(),
                        trigger_value: "present".to_string(),
                    })
                    .collect(),
                scenarios: Vec::new(),
                flow_atlas: FlowAtlas {
                    edges,
                    outcomes: vec!["done".to_string()],
                },
                provenance: String::new(),
            };
            prop_assert!(validate_blueprint(&b).accepted());

            let mut state = DialogueState::new("stage0", 40);
            let mut delta = BTreeMap::new();
            for (i, on) in informed_mask.iter().enumerate().take(n) {
                if *on {
                    delta.insert(slots[i].clone(), "v".to_string());
                }
            }
            let mut turn = crate::schema::Turn::user(0, "x");
            turn.inform_block = Some(delta);
            state.push_user_turn(turn);

            let g = blueprint_guidance(&b, &state);
            let stage_names: Vec<String> =
                b.rhythm.iter().map(|s| s.name.clone()).collect();
            prop_assert!(stage_names.contains(&g.current_stage.name));
            let nodes: BTreeSet<&str> = stage_names
                .iter()
                .map(String::as_str)
                .chain(b.flow_atlas.outcomes.iter().map(String::as_str))
                .collect();
            for s in &g.successors {
                prop_assert!(nodes.contains(s));
            }
            if g.reached_outcome.is_some() {
                prop_assert!(g.successors.is_empty());
            }
        }
    }
}

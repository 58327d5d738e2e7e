//! Pipeline wiring: runs the phases in order against a config file and
//! records a run manifest with seeds, identities, counts, and content
//! digests of every artifact.
//!
//! Phases communicate through files in the run's output directory, so any
//! suffix of the pipeline can be rerun independently. In mock and replay
//! modes the whole run is a pure function of (config, seed): rerunning
//! reproduces every artifact byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blueprint::{run_blueprint_phase, BlueprintStore};
use crate::config::{parse_config, validate_config_text, PipelineConfig};
use crate::error::{Error, Result};
use crate::evaluation::{slot_distribution, SlotDistributionTable};
use crate::filter::{run_filter_phase, CommunityMethod, FilterOptions};
use crate::gateway::{Backend, Gateway, GatewayConfig, GatewayMode, NullBackend, ReplayCache};
use crate::generation::{
    build_agent_message_pool, build_opening_pool, build_user_query_pool, run_generation_phase,
    GenerationPhaseConfig, SessionLimits, SessionPools,
};
use crate::ingest::{
    ingest_sources, AtomicSignals, CommentCleanConfig, DomainLexicon, DomainSignals,
    FilterConfig as SourceFilter, IngestOptions, LexiconScope, QaPair, StrategyTaxonomy,
    TaxonomyRule,
};
use crate::persona::{run_persona_phase, PersonaPhaseConfig};
use crate::retrieval::{
    EmbeddingProvider, KbRegistry, KnowledgeBase, OfflineHashProvider, RetrievalPool,
};
use crate::schema::{
    compute_dataset_stats, read_jsonl, write_jsonl_string, AgentPersona, SeedDialogue,
    SessionQuadruplet, SlotOntology, UserPersona, ValidationReport,
};
use crate::util::{derive_seed, round2, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Ingest,
    Personas,
    Blueprint,
    Generate,
    Filter,
    Eval,
}

impl Phase {
    pub fn all() -> [Phase; 6] {
        [
            Phase::Ingest,
            Phase::Personas,
            Phase::Blueprint,
            Phase::Generate,
            Phase::Filter,
            Phase::Eval,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Ingest => "ingest",
            Phase::Personas => "personas",
            Phase::Blueprint => "blueprint",
            Phase::Generate => "generate",
            Phase::Filter => "filter",
            Phase::Eval => "eval",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Phase> {
        match s {
            "ingest" => Ok(Phase::Ingest),
            "personas" => Ok(Phase::Personas),
            "blueprint" => Ok(Phase::Blueprint),
            "generate" => Ok(Phase::Generate),
            "filter" => Ok(Phase::Filter),
            "eval" => Ok(Phase::Eval),
            other => Err(Error::Config(format!(
                "unknown phase `{other}` (expected ingest|personas|blueprint|generate|filter|eval)"
            ))),
        }
    }
}

/// Canonical execution order with duplicates dropped; empty means all phases.
fn normalize_phases(requested: &[Phase]) -> Vec<Phase> {
    if requested.is_empty() {
        return Phase::all().to_vec();
    }
    Phase::all()
        .into_iter()
        .filter(|p| requested.contains(p))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: String,
    pub status: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, u64>,
    pub outputs: BTreeMap<String, u64>,
    pub rejections: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: String,
    pub config_digest: String,
    pub master_seed: u64,
    pub mode: String,
    pub embedding_provider: String,
    pub backend: String,
    pub phases: Vec<PhaseRecord>,
    /// Artifact file name (relative to the output directory) → SHA-256 of
    /// its bytes.
    pub artifacts: BTreeMap<String, String>,
}

/// Integrations the library cannot construct itself: a real LLM backend for
/// record/live mode and a remote embedding provider. Mock and replay runs
/// need neither.
#[derive(Default)]
pub struct ExternalDeps {
    pub backend: Option<Box<dyn Backend>>,
    pub provider: Option<Box<dyn EmbeddingProvider>>,
}

struct PhaseOutcome {
    inputs: BTreeMap<String, u64>,
    outputs: BTreeMap<String, u64>,
    rejections: BTreeMap<String, u64>,
}

fn counts<const N: usize>(pairs: [(&str, u64); N]) -> BTreeMap<String, u64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Lexicon files from `paths.lexicons`, all loaded under the custom scope.
pub fn load_lexicons(cfg: &PipelineConfig) -> Result<Vec<DomainLexicon>> {
    cfg.paths
        .lexicons
        .iter()
        .map(|p| DomainLexicon::load_tsv(LexiconScope::Custom, p))
        .collect()
}

/// Strategy taxonomy from `paths.taxonomy` (a JSON rule list), or the
/// built-in sales taxonomy when unset.
pub fn load_taxonomy(cfg: &PipelineConfig) -> Result<StrategyTaxonomy> {
    match &cfg.paths.taxonomy {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let rules: Vec<TaxonomyRule> = serde_json::from_str(&text)?;
            StrategyTaxonomy::new(rules)
        }
        None => Ok(StrategyTaxonomy::default()),
    }
}

/// Knowledge bases from `paths.kb`, keyed by domain label. The base id is
/// always `kb-{label}`, which is also how persona records reference them.
pub fn load_kbs(cfg: &PipelineConfig) -> Result<BTreeMap<String, KnowledgeBase>> {
    let mut kbs = BTreeMap::new();
    for (label, path) in &cfg.paths.kb {
        kbs.insert(label.clone(), KnowledgeBase::load(format!("kb-{label}"), path)?);
    }
    Ok(kbs)
}

pub fn kb_registry(cfg: &PipelineConfig) -> Result<KbRegistry> {
    let mut registry = KbRegistry::new();
    for kb in load_kbs(cfg)?.into_values() {
        registry.insert(kb)?;
    }
    Ok(registry)
}

/// Slot ontologies from `paths.ontology`, keyed by domain label.
pub fn load_ontologies(cfg: &PipelineConfig) -> Result<BTreeMap<String, SlotOntology>> {
    let rows: Vec<SlotOntology> = read_jsonl(&cfg.paths.ontology)?;
    Ok(rows
        .into_iter()
        .map(|o| (o.domain.label().to_string(), o))
        .collect())
}

/// Folds per-domain signal rows back into one signal set per domain label.
pub fn signals_per_domain(rows: Vec<DomainSignals>) -> BTreeMap<String, AtomicSignals> {
    let mut per_domain: BTreeMap<String, AtomicSignals> = BTreeMap::new();
    for row in rows {
        per_domain
            .entry(row.domain.label().to_string())
            .or_default()
            .merge(row.signals);
    }
    per_domain
}

/// Assembles ingest options from config plus the already-loaded resources.
pub fn ingest_options<'a>(
    cfg: &PipelineConfig,
    lexicons: Vec<DomainLexicon>,
    taxonomy: StrategyTaxonomy,
    kbs: BTreeMap<String, KnowledgeBase>,
    provider: &'a dyn EmbeddingProvider,
    gateway: Option<&'a Gateway>,
) -> IngestOptions<'a> {
    let mut clean = CommentCleanConfig::default();
    clean.min_length = cfg.ingest.min_comment_length;
    clean.dedup_threshold = cfg.ingest.dedup_threshold as f32;
    if !cfg.ingest.spam_patterns.is_empty() {
        clean.spam_patterns = cfg.ingest.spam_patterns.clone();
    }
    IngestOptions {
        filter: SourceFilter {
            keywords: cfg.ingest.keywords.clone(),
            min_viewers: cfg.ingest.min_viewers,
        },
        clean,
        window_secs: cfg.ingest.window_secs,
        theta_sem: cfg.ingest.theta_sem,
        lexicons,
        taxonomy,
        kbs,
        provider,
        gateway,
    }
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    provider: Box<dyn EmbeddingProvider>,
    gateway: Gateway,
    out_dir: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl Runner<'_> {
    fn artifact_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes an artifact and records its content digest.
    fn write_artifact(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.artifact_path(name);
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        self.artifacts.insert(name.to_string(), sha256_hex(content.as_bytes()));
        Ok(())
    }

    fn write_jsonl_artifact<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<()> {
        let content = write_jsonl_string(records)?;
        self.write_artifact(name, &content)
    }

    fn write_json_artifact<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut content = serde_json::to_string_pretty(value)?;
        content.push('\n');
        self.write_artifact(name, &content)
    }

    fn load_signals(&self) -> Result<BTreeMap<String, AtomicSignals>> {
        let rows: Vec<DomainSignals> = read_jsonl(self.artifact_path("signals.jsonl"))?;
        Ok(signals_per_domain(rows))
    }

    fn run_ingest(&mut self) -> Result<PhaseOutcome> {
        // The offline keyword rules are the mock-mode tagger; real backends
        // take over in record/live (and replay their caches).
        let gateway = match self.gateway.mode() {
            GatewayMode::Mock => None,
            _ => Some(&self.gateway),
        };
        let opts = ingest_options(
            self.cfg,
            load_lexicons(self.cfg)?,
            load_taxonomy(self.cfg)?,
            load_kbs(self.cfg)?,
            self.provider.as_ref(),
            gateway,
        );
        let out = ingest_sources(&self.cfg.paths.sources, &opts)?;
        let rows = out.domain_signals();
        self.write_jsonl_artifact("signals.jsonl", &rows)?;

        let totals = rows.iter().fold([0u64; 5], |mut acc, row| {
            acc[0] += row.signals.questions.len() as u64;
            acc[1] += row.signals.responses.len() as u64;
            acc[2] += row.signals.qa_pairs.len() as u64;
            acc[3] += row.signals.strategy_tags.len() as u64;
            acc[4] += row.signals.accounts.len() as u64;
            acc
        });
        Ok(PhaseOutcome {
            inputs: counts([("sources", out.sources_read as u64)]),
            outputs: counts([
                ("sources_retained", out.sources_retained as u64),
                ("domains", rows.len() as u64),
                ("questions", totals[0]),
                ("responses", totals[1]),
                ("qa_pairs", totals[2]),
                ("strategy_tags", totals[3]),
                ("accounts", totals[4]),
                ("lexicon_edits", out.edits_applied as u64),
            ]),
            rejections: counts([
                ("sources", out.rejections.len() as u64),
                ("unpaired_questions", out.unpaired_questions as u64),
            ]),
        })
    }

    fn run_personas(&mut self, seed: u64) -> Result<PhaseOutcome> {
        let per_domain = self.load_signals()?;
        let seeds: Vec<SeedDialogue> = read_jsonl(&self.cfg.paths.seeds)?;
        let registry = kb_registry(self.cfg)?;
        let kb_refs: BTreeMap<String, String> = self
            .cfg
            .paths
            .kb
            .keys()
            .map(|label| (label.clone(), format!("kb-{label}")))
            .collect();
        let phase_cfg = PersonaPhaseConfig {
            user_personas_per_domain: self.cfg.personas.user_personas_per_domain,
            questions_per_persona: self.cfg.personas.questions_per_persona,
            seeds_per_prompt: self.cfg.personas.seeds_per_prompt,
        };
        let out = run_persona_phase(
            &per_domain,
            &seeds,
            &kb_refs,
            &phase_cfg,
            &registry,
            &self.gateway,
            seed,
        )?;
        self.write_jsonl_artifact("user_personas.jsonl", &out.users)?;
        self.write_jsonl_artifact("agent_personas.jsonl", &out.agents)?;
        Ok(PhaseOutcome {
            inputs: counts([
                ("domains", per_domain.len() as u64),
                ("seed_dialogues", seeds.len() as u64),
            ]),
            outputs: counts([
                ("user_personas", out.users.len() as u64),
                ("agent_personas", out.agents.len() as u64),
            ]),
            rejections: counts([("personas", out.rejected.len() as u64)]),
        })
    }

    fn run_blueprint(&mut self, seed: u64) -> Result<PhaseOutcome> {
        let per_domain = self.load_signals()?;
        let agents: Vec<AgentPersona> = read_jsonl(self.artifact_path("agent_personas.jsonl"))?;
        let seeds: Vec<SeedDialogue> = read_jsonl(&self.cfg.paths.seeds)?;
        let ontologies = load_ontologies(self.cfg)?;
        let out = run_blueprint_phase(
            &per_domain,
            &agents,
            &seeds,
            &ontologies,
            self.cfg.blueprint.seeds_per_prompt,
            &self.gateway,
            seed,
        )?;
        let content = write_jsonl_string(out.store.all())?;
        self.write_artifact("blueprints.jsonl", &content)?;
        Ok(PhaseOutcome {
            inputs: counts([("agent_personas", agents.len() as u64)]),
            outputs: counts([("blueprints", out.store.len() as u64)]),
            rejections: counts([("blueprints", out.rejected.len() as u64)]),
        })
    }

    fn run_generate(&mut self, seed: u64) -> Result<PhaseOutcome> {
        let users: Vec<UserPersona> = read_jsonl(self.artifact_path("user_personas.jsonl"))?;
        let agents: Vec<AgentPersona> = read_jsonl(self.artifact_path("agent_personas.jsonl"))?;
        let blueprints = BlueprintStore::load(self.artifact_path("blueprints.jsonl"))?;
        let seeds: Vec<SeedDialogue> = read_jsonl(&self.cfg.paths.seeds)?;
        let qa_pairs: Vec<QaPair> = self
            .load_signals()?
            .into_values()
            .flat_map(|s| s.qa_pairs)
            .collect();
        let ontologies = load_ontologies(self.cfg)?;
        let registry = kb_registry(self.cfg)?;

        let openings: RetrievalPool = build_opening_pool(&seeds, self.provider.as_ref())?;
        let user_queries = build_user_query_pool(&qa_pairs, self.provider.as_ref())?;
        let agent_messages = build_agent_message_pool(&qa_pairs, self.provider.as_ref())?;
        let pools = SessionPools {
            seed_openings: &openings,
            agent_messages: &agent_messages,
            user_queries: &user_queries,
        };

        let phase_cfg = GenerationPhaseConfig {
            sessions: self.cfg.generation.sessions,
            master_seed: seed,
            limits: SessionLimits {
                max_turns: self.cfg.generation.max_turns,
                retrieval_k: self.cfg.generation.retrieval_k,
            },
        };
        let out = run_generation_phase(
            &users,
            &agents,
            &blueprints,
            &pools,
            &registry,
            &ontologies,
            &phase_cfg,
            self.provider.as_ref(),
            &self.gateway,
        )?;
        self.write_jsonl_artifact("raw_dialogues.jsonl", &out.sessions)?;
        Ok(PhaseOutcome {
            inputs: counts([
                ("user_personas", users.len() as u64),
                ("agent_personas", agents.len() as u64),
                ("blueprints", blueprints.len() as u64),
                ("evidence_entries", (openings.len() + user_queries.len() + agent_messages.len()) as u64),
            ]),
            outputs: counts([("sessions", out.sessions.len() as u64)]),
            rejections: counts([("aborted_sessions", out.aborted.len() as u64)]),
        })
    }

    fn run_filter(&mut self, seed: u64) -> Result<PhaseOutcome> {
        let sessions: Vec<SessionQuadruplet> = read_jsonl(self.artifact_path("raw_dialogues.jsonl"))?;
        let opts = FilterOptions {
            tau_u: self.cfg.filter.tau_u,
            tau_a: self.cfg.filter.tau_a,
            rho: self.cfg.filter.rho,
            method: CommunityMethod::from_str(&self.cfg.filter.method)?,
            seed,
        };
        let (retained, report) = run_filter_phase(&sessions, self.provider.as_ref(), &opts)?;
        self.write_jsonl_artifact("dialogues.jsonl", &retained)?;
        self.write_json_artifact("filter_report.json", &report)?;
        Ok(PhaseOutcome {
            inputs: counts([("sessions", sessions.len() as u64)]),
            outputs: counts([
                ("retained", retained.len() as u64),
                ("edges", report.edges as u64),
                ("communities", report.community_sizes.len() as u64),
            ]),
            rejections: counts([("dropped", (sessions.len() - retained.len()) as u64)]),
        })
    }

    fn run_eval(&mut self) -> Result<PhaseOutcome> {
        let dialogues: Vec<SessionQuadruplet> = read_jsonl(self.artifact_path("dialogues.jsonl"))?;
        let ontologies = load_ontologies(self.cfg)?;
        let stats = compute_dataset_stats(dialogues.iter());

        let mut domains: BTreeMap<String, DomainEvalReport> = BTreeMap::new();
        for (label, ontology) in &ontologies {
            let subset: Vec<SessionQuadruplet> = dialogues
                .iter()
                .filter(|d| d.domain.label() == label)
                .cloned()
                .collect();
            if subset.is_empty() {
                continue;
            }
            let dc = stats.domain(label);
            domains.insert(
                label.clone(),
                DomainEvalReport {
                    dialogues: dc.dialogue_count,
                    turns: dc.turn_count,
                    avg_turns: round2(dc.avg_turns()),
                    slot_distribution: slot_distribution(&subset, ontology),
                },
            );
        }
        let report = EvalReport {
            dialogues: dialogues.len() as u64,
            domains,
        };
        self.write_json_artifact("eval_report.json", &report)?;
        Ok(PhaseOutcome {
            inputs: counts([("dialogues", dialogues.len() as u64)]),
            outputs: counts([("domains", report.domains.len() as u64)]),
            rejections: BTreeMap::new(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainEvalReport {
    pub dialogues: u64,
    pub turns: u64,
    pub avg_turns: f64,
    pub slot_distribution: SlotDistributionTable,
}

/// Intrinsic evaluation summary written by the eval phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dialogues: u64,
    pub domains: BTreeMap<String, DomainEvalReport>,
}

/// File-existence checks scoped to the requested phases, so a bad path fails
/// before any phase runs rather than halfway through.
fn preflight(cfg: &PipelineConfig, phases: &[Phase]) -> ValidationReport {
    let mut report = ValidationReport::new();
    fn need(report: &mut ValidationReport, path: &Path, what: &str) {
        if !path.exists() {
            report.push("missing input", format!("{what} not found: {}", path.display()));
        }
    }
    for phase in phases {
        match phase {
            Phase::Ingest => {
                need(&mut report, &cfg.paths.sources, "sources directory");
                for (label, path) in &cfg.paths.kb {
                    need(&mut report, path, &format!("knowledge base for {label}"));
                }
                for path in &cfg.paths.lexicons {
                    need(&mut report, path, "lexicon file");
                }
                if let Some(path) = &cfg.paths.taxonomy {
                    need(&mut report, path, "strategy taxonomy");
                }
            }
            Phase::Personas => {
                need(&mut report, &cfg.paths.seeds, "seed dialogues");
                for (label, path) in &cfg.paths.kb {
                    need(&mut report, path, &format!("knowledge base for {label}"));
                }
            }
            Phase::Blueprint => {
                need(&mut report, &cfg.paths.seeds, "seed dialogues");
                need(&mut report, &cfg.paths.ontology, "slot ontology");
            }
            Phase::Generate => {
                need(&mut report, &cfg.paths.seeds, "seed dialogues");
                need(&mut report, &cfg.paths.ontology, "slot ontology");
                if cfg.paths.kb.is_empty() {
                    report.push(
                        "missing input",
                        "generation requested but no knowledge base paths configured".to_string(),
                    );
                }
                for (label, path) in &cfg.paths.kb {
                    need(&mut report, path, &format!("knowledge base for {label}"));
                }
            }
            Phase::Filter => {}
            Phase::Eval => {
                need(&mut report, &cfg.paths.ontology, "slot ontology");
            }
        }
    }
    report
}

/// Resolves the embedding provider: an injected one wins, otherwise the
/// offline provider is built from config. Remote embeddings have no in-crate
/// implementation, so they always require injection.
pub fn build_provider(
    cfg: &PipelineConfig,
    injected: Option<Box<dyn EmbeddingProvider>>,
) -> Result<Box<dyn EmbeddingProvider>> {
    if let Some(provider) = injected {
        return Ok(provider);
    }
    match cfg.embedding.provider.as_str() {
        "offline" => Ok(Box::new(OfflineHashProvider::new(cfg.embedding.seed))),
        "remote" => Err(Error::Config(
            "embedding.provider = `remote` requires an injected provider (run through the CLI with credentials set)".into(),
        )),
        other => Err(Error::Config(format!("unknown embedding provider `{other}`"))),
    }
}

/// Builds the generation gateway for the configured mode, wiring in the
/// replay cache when one is configured and present.
pub fn build_gateway(cfg: &PipelineConfig, injected: Option<Box<dyn Backend>>) -> Result<Gateway> {
    let mode = GatewayMode::from_str(&cfg.gateway.mode)?;
    let gw_cfg = GatewayConfig {
        mode,
        max_retries: cfg.gateway.max_retries,
        backoff_ms: cfg.gateway.backoff_ms,
        token_budget: cfg.gateway.token_budget,
        max_concurrency: cfg.gateway.max_concurrency,
        replay_fallback_mock: cfg.gateway.replay_fallback_mock,
    };
    // Mock and replay never reach a real backend; the gateway dispatches to
    // the deterministic synthesizer or the cache internally.
    let backend: Box<dyn Backend> = match mode {
        GatewayMode::Mock => Box::new(NullBackend::new("mock")),
        GatewayMode::Replay => Box::new(NullBackend::new("replay-only")),
        GatewayMode::Record | GatewayMode::Live => injected.ok_or_else(|| {
            Error::Config(format!(
                "gateway.mode = `{mode}` requires a real backend (run through the CLI with credentials set)"
            ))
        })?,
    };
    let gateway = Gateway::new(cfg.template_store()?, backend, gw_cfg);
    match (&cfg.paths.cache, mode) {
        (Some(path), GatewayMode::Replay | GatewayMode::Record) if path.exists() => {
            Ok(gateway.with_cache(ReplayCache::load(path)?))
        }
        (None, GatewayMode::Replay) if !cfg.gateway.replay_fallback_mock => Err(Error::Config(
            "gateway.mode = `replay` needs paths.cache (or replay_fallback_mock = true)".into(),
        )),
        _ => Ok(gateway),
    }
}

/// Runs the requested phases in order against an already-loaded config.
/// `config_text` is the raw file content; its digest identifies the run.
/// Phase failures mark the manifest and stop the pipeline; the manifest is
/// still written and returned.
pub fn execute_pipeline(
    cfg: &PipelineConfig,
    config_text: &str,
    phases: &[Phase],
    deps: ExternalDeps,
) -> Result<RunManifest> {
    let value_report = cfg.validate();
    if !value_report.accepted() {
        return Err(Error::Config(format!("invalid config: {value_report}")));
    }
    let phases = normalize_phases(phases);
    let flight = preflight(cfg, &phases);
    if !flight.accepted() {
        return Err(Error::Config(format!("preflight failed: {flight}")));
    }

    std::fs::create_dir_all(&cfg.run.out_dir).map_err(|e| Error::io(&cfg.run.out_dir, e))?;
    let provider = build_provider(cfg, deps.provider)?;
    let gateway = build_gateway(cfg, deps.backend)?;

    let mut manifest = RunManifest {
        status: "completed".to_string(),
        config_digest: sha256_hex(config_text.as_bytes()),
        master_seed: cfg.run.seed,
        mode: gateway.mode().to_string(),
        embedding_provider: provider.identity(),
        backend: gateway.backend_id().to_string(),
        phases: Vec::new(),
        artifacts: BTreeMap::new(),
    };

    let mut runner = Runner {
        cfg,
        provider,
        gateway,
        out_dir: cfg.run.out_dir.clone(),
        artifacts: BTreeMap::new(),
    };

    for phase in phases {
        let seed = derive_seed(cfg.run.seed, &format!("phase:{phase}"));
        let outcome = match phase {
            Phase::Ingest => runner.run_ingest(),
            Phase::Personas => runner.run_personas(seed),
            Phase::Blueprint => runner.run_blueprint(seed),
            Phase::Generate => runner.run_generate(seed),
            Phase::Filter => runner.run_filter(seed),
            Phase::Eval => runner.run_eval(),
        };
        match outcome {
            Ok(PhaseOutcome {
                inputs,
                outputs,
                rejections,
            }) => manifest.phases.push(PhaseRecord {
                phase: phase.to_string(),
                status: "completed".to_string(),
                seed,
                inputs,
                outputs,
                rejections,
                error: None,
            }),
            Err(e) => {
                manifest.phases.push(PhaseRecord {
                    phase: phase.to_string(),
                    status: "failed".to_string(),
                    seed,
                    inputs: BTreeMap::new(),
                    outputs: BTreeMap::new(),
                    rejections: BTreeMap::new(),
                    error: Some(e.to_string()),
                });
                manifest.status = "failed".to_string();
                break;
            }
        }
    }

    if runner.gateway.mode() == GatewayMode::Record {
        if let Some(path) = &cfg.paths.cache {
            runner.gateway.save_cache(path)?;
        }
    }

    manifest.artifacts = runner.artifacts.clone();
    let mut manifest_text = serde_json::to_string_pretty(&manifest)?;
    manifest_text.push('\n');
    let manifest_path = runner.out_dir.join("manifest.json");
    std::fs::write(&manifest_path, &manifest_text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

/// Loads, validates (report-based, including the unknown-key typo guard),
/// and runs a config file end to end.
pub fn run_pipeline(
    config_path: impl AsRef<Path>,
    phases: &[Phase],
    seed_override: Option<u64>,
    mode_override: Option<GatewayMode>,
    deps: ExternalDeps,
) -> Result<RunManifest> {
    let config_path = config_path.as_ref();
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let report = validate_config_text(&text)?;
    if !report.accepted() {
        return Err(Error::Config(format!("invalid config: {report}")));
    }
    let mut cfg = parse_config(&text)?;
    if let Some(base) = config_path.parent() {
        cfg.anchor(base);
    }
    if let Some(seed) = seed_override {
        cfg.run.seed = seed;
    }
    if let Some(mode) = mode_override {
        cfg.gateway.mode = mode.to_string();
    }
    execute_pipeline(&cfg, &text, phases, deps)
}

//! streamforge: build task-oriented dialogue datasets from rich-media
//! interaction archives.
//!
//! Subcommands mirror the pipeline phases (ingest, personas, blueprint,
//! generate, filter, eval, stats) plus `run`, which executes the whole
//! pipeline from a config file and writes a run manifest. Standalone phase
//! commands read and write plain JSONL files so any segment of the pipeline
//! can be re-executed or swapped out.

mod http;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use streamforge_core::blueprint::{run_blueprint_phase, BlueprintStore};
use streamforge_core::config::{load_config, PipelineConfig};
use streamforge_core::evaluation::{
    aggregate_judge_scores, export_judge_batch, joint_goal_accuracy, mix_training_budget,
    slot_distribution, slot_value_f1, DialogueStateAnnotation, JudgeScoreFile,
    SlotDistributionTable, JUDGE_DIMENSIONS,
};
use streamforge_core::filter::{CommunityMethod, FilterOptions};
use streamforge_core::gateway::{Backend, GatewayMode};
use streamforge_core::generation::{
    build_agent_message_pool, build_opening_pool, build_user_query_pool, run_generation_phase,
    GenerationPhaseConfig, SessionLimits, SessionPools,
};
use streamforge_core::ingest::{ingest_sources, QaPair};
use streamforge_core::orchestrator::{
    self, run_pipeline, ExternalDeps, Phase, RunManifest,
};
use streamforge_core::persona::{run_persona_phase, PersonaPhaseConfig};
use streamforge_core::retrieval::{KbRegistry, KnowledgeBase, RetrievalPool};
use streamforge_core::schema::{
    compute_dataset_stats, read_jsonl, write_jsonl, AgentPersona, SeedDialogue, SessionQuadruplet,
    SlotOntology, UserPersona,
};
use streamforge_core::util::derive_seed;

use http::HttpBackend;

#[derive(Parser)]
#[command(name = "streamforge", version, about = "Dialogue dataset pipeline")]
struct Cli {
    /// Pipeline config file (TOML). Required by phase commands that need
    /// lexicons, knowledge bases, or an ontology.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract atomic interaction signals from source archives.
    Ingest(IngestArgs),
    /// Synthesize user and agent personas from signals and seed dialogues.
    Personas(PersonasArgs),
    /// Construct one conversational blueprint per agent persona.
    Blueprint(BlueprintArgs),
    /// Generate dialogue sessions from personas and blueprints.
    Generate(GenerateArgs),
    /// Deduplicate sessions with the similarity-graph filter.
    Filter(FilterArgs),
    /// Evaluation utilities.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Print dataset statistics for a dialogue file.
    Stats(StatsArgs),
    /// Run the configured pipeline end to end and write a manifest.
    Run(RunArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Source archive directory (one subdirectory per source).
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Output signals file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PersonasArgs {
    /// Signals file produced by `ingest`.
    #[arg(long)]
    signals: PathBuf,
    /// Seed dialogue file; defaults to the configured path.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Output file for user personas.
    #[arg(long)]
    out_user: PathBuf,
    /// Output file for agent personas.
    #[arg(long)]
    out_agent: PathBuf,
}

#[derive(Args)]
struct BlueprintArgs {
    /// Signals file carrying the strategy tags.
    #[arg(long)]
    tags: PathBuf,
    /// Agent persona file.
    #[arg(long)]
    agents: PathBuf,
    /// Output blueprint file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    user_personas: PathBuf,
    #[arg(long)]
    agent_personas: PathBuf,
    #[arg(long)]
    blueprints: PathBuf,
    /// Seed dialogues for opening synthesis.
    #[arg(long)]
    seeds: PathBuf,
    /// Knowledge base file, repeatable. Registered as kb-{file stem}.
    #[arg(long)]
    kb: Vec<PathBuf>,
    /// Signals file for evidence retrieval pools (optional).
    #[arg(long)]
    signals: Option<PathBuf>,
    /// Slot ontology file; defaults to the configured path.
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Number of sessions to generate.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Gateway mode: mock, replay, record, or live.
    #[arg(long, default_value = "mock")]
    mode: String,
    /// Replay/record cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.85)]
    tau_u: f64,
    #[arg(long, default_value_t = 0.85)]
    tau_a: f64,
    /// Per-community retention ratio.
    #[arg(long, default_value_t = 0.6)]
    rho: f64,
    /// Community method: components or label_propagation.
    #[arg(long, default_value = "components")]
    method: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Filter report (JSON) destination.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Score predicted dialogue states against gold annotations.
    Dst {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Slot coverage and value-diversity table for a dialogue file.
    Slots {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
    },
    /// Compose a budgeted training mix of public and synthetic dialogues.
    Mix {
        #[arg(long)]
        public: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        /// Synthetic share of the budget, in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Mixed dialogue output (optional; manifest prints regardless).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export anonymized, shuffled judge batches from two or more sources.
    JudgeExport {
        /// Dialogue file, repeatable; the file stem names the source.
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory for the batch file.
        #[arg(long)]
        out: PathBuf,
        /// Attribution key destination. Keep it away from judges.
        #[arg(long)]
        key: PathBuf,
    },
    /// Re-attribute judge scores and aggregate per source and dimension.
    JudgeAggregate {
        /// Judge score file (JSON), repeatable.
        #[arg(long = "scores", required = true)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        key: PathBuf,
        /// Aggregate report (JSON) destination (optional).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Also write the stats as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print raw per-domain counts as JSON instead of the table.
    #[arg(long)]
    counts: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated phase subset (default: all phases).
    #[arg(long)]
    phases: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Gateway mode override: mock, replay, record, or live.
    #[arg(long)]
    mode: Option<String>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest(args) => cmd_ingest(cli.config.as_deref(), args),
        Command::Personas(args) => cmd_personas(cli.config.as_deref(), args),
        Command::Blueprint(args) => cmd_blueprint(cli.config.as_deref(), args),
        Command::Generate(args) => cmd_generate(cli.config.as_deref(), args),
        Command::Filter(args) => cmd_filter(cli.config.as_deref(), args),
        Command::Eval(cmd) => cmd_eval(cmd),
        Command::Stats(args) => cmd_stats(args),
        Command::Run(args) => cmd_run(cli.config.as_deref(), args),
    }
}

fn require_config(config: Option<&Path>, command: &str) -> Result<PipelineConfig> {
    let path = config
        .with_context(|| format!("`{command}` needs --config for paths and thresholds"))?;
    load_config(path).with_context(|| format!("loading config {}", path.display()))
}

/// Record and live modes need the network backend; mock and replay run on
/// the in-crate machinery.
fn deps_for_mode(mode: &str) -> Result<ExternalDeps> {
    let backend: Option<Box<dyn Backend>> = match GatewayMode::from_str(mode)? {
        GatewayMode::Record | GatewayMode::Live => match HttpBackend::from_env()? {
            Some(backend) => Some(Box::new(backend)),
            None => bail!(
                "gateway mode `{mode}` needs credentials: set {} and {} (optionally {})",
                http::ENV_ENDPOINT,
                http::ENV_API_KEY,
                http::ENV_MODEL,
            ),
        },
        _ => None,
    };
    Ok(ExternalDeps {
        backend,
        provider: None,
    })
}

fn cmd_ingest(config: Option<&Path>, args: IngestArgs) -> Result<()> {
    let mut cfg = require_config(config, "ingest")?;
    if let Some(sources) = args.sources {
        cfg.paths.sources = sources;
    }
    let provider = orchestrator::build_provider(&cfg, None)?;
    let deps = deps_for_mode(&cfg.gateway.mode)?;
    let gateway = orchestrator::build_gateway(&cfg, deps.backend)?;
    let opts = orchestrator::ingest_options(
        &cfg,
        orchestrator::load_lexicons(&cfg)?,
        orchestrator::load_taxonomy(&cfg)?,
        orchestrator::load_kbs(&cfg)?,
        provider.as_ref(),
        match gateway.mode() {
            GatewayMode::Mock => None,
            _ => Some(&gateway),
        },
    );
    let out = ingest_sources(&cfg.paths.sources, &opts)?;
    let rows = out.domain_signals();
    write_jsonl(&args.out, &rows)?;
    let pairs: usize = rows.iter().map(|r| r.signals.qa_pairs.len()).sum();
    println!(
        "ingested {} of {} sources: {} QA pairs across {} domains -> {}",
        out.sources_retained,
        out.sources_read,
        pairs,
        rows.len(),
        args.out.display()
    );
    for rejection in &out.rejections {
        log::info!("rejected {}: {}", rejection.source_id, rejection.reason);
    }
    Ok(())
}

fn cmd_personas(config: Option<&Path>, args: PersonasArgs) -> Result<()> {
    let cfg = require_config(config, "personas")?;
    let per_domain = orchestrator::signals_per_domain(read_jsonl(&args.signals)?);
    let seeds: Vec<SeedDialogue> = read_jsonl(args.seeds.as_ref().unwrap_or(&cfg.paths.seeds))?;
    let registry = orchestrator::kb_registry(&cfg)?;
    let kb_refs: BTreeMap<String, String> = cfg
        .paths
        .kb
        .keys()
        .map(|label| (label.clone(), format!("kb-{label}")))
        .collect();
    let deps = deps_for_mode(&cfg.gateway.mode)?;
    let gateway = orchestrator::build_gateway(&cfg, deps.backend)?;
    let phase_cfg = PersonaPhaseConfig {
        user_personas_per_domain: cfg.personas.user_personas_per_domain,
        questions_per_persona: cfg.personas.questions_per_persona,
        seeds_per_prompt: cfg.personas.seeds_per_prompt,
    };
    let seed = derive_seed(cfg.run.seed, "phase:personas");
    let out = run_persona_phase(&per_domain, &seeds, &kb_refs, &phase_cfg, &registry, &gateway, seed)?;
    write_jsonl(&args.out_user, &out.users)?;
    write_jsonl(&args.out_agent, &out.agents)?;
    println!(
        "synthesized {} user personas -> {} and {} agent personas -> {} ({} rejected)",
        out.users.len(),
        args.out_user.display(),
        out.agents.len(),
        args.out_agent.display(),
        out.rejected.len()
    );
    Ok(())
}

fn cmd_blueprint(config: Option<&Path>, args: BlueprintArgs) -> Result<()> {
    let cfg = require_config(config, "blueprint")?;
    let per_domain = orchestrator::signals_per_domain(read_jsonl(&args.tags)?);
    let agents: Vec<AgentPersona> = read_jsonl(&args.agents)?;
    let seeds: Vec<SeedDialogue> = read_jsonl(&cfg.paths.seeds)?;
    let ontologies = orchestrator::load_ontologies(&cfg)?;
    let deps = deps_for_mode(&cfg.gateway.mode)?;
    let gateway = orchestrator::build_gateway(&cfg, deps.backend)?;
    let seed = derive_seed(cfg.run.seed, "phase:blueprint");
    let out = run_blueprint_phase(
        &per_domain,
        &agents,
        &seeds,
        &ontologies,
        cfg.blueprint.seeds_per_prompt,
        &gateway,
        seed,
    )?;
    out.store.save(&args.out)?;
    println!(
        "built {} blueprints -> {} ({} rejected)",
        out.store.len(),
        args.out.display(),
        out.rejected.len()
    );
    Ok(())
}

fn cmd_generate(config: Option<&Path>, args: GenerateArgs) -> Result<()> {
    // Config is optional here: flags carry the inputs, and limits fall back
    // to defaults when no config is given.
    let mut cfg = match config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    cfg.gateway.mode = args.mode.clone();
    if let Some(cache) = &args.cache {
        cfg.paths.cache = Some(cache.clone());
    }

    let users: Vec<UserPersona> = read_jsonl(&args.user_personas)?;
    let agents: Vec<AgentPersona> = read_jsonl(&args.agent_personas)?;
    let blueprints = BlueprintStore::load(&args.blueprints)?;
    let seeds: Vec<SeedDialogue> = read_jsonl(&args.seeds)?;

    let mut registry = KbRegistry::new();
    if args.kb.is_empty() {
        registry = orchestrator::kb_registry(&cfg)?;
    }
    for path in &args.kb {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .with_context(|| format!("knowledge base path {} has no file stem", path.display()))?;
        registry.insert(KnowledgeBase::load(format!("kb-{stem}"), path)?)?;
    }
    if registry.is_empty() {
        bail!("no knowledge bases: pass --kb or configure [paths.kb]");
    }

    let ontology_path = args.ontology.as_ref().unwrap_or(&cfg.paths.ontology);
    let rows: Vec<SlotOntology> = read_jsonl(ontology_path)?;
    let ontologies: BTreeMap<String, SlotOntology> = rows
        .into_iter()
        .map(|o| (o.domain.label().to_string(), o))
        .collect();

    let provider = orchestrator::build_provider(&cfg, None)?;
    let deps = deps_for_mode(&args.mode)?;
    let gateway = orchestrator::build_gateway(&cfg, deps.backend)?;

    let qa_pairs: Vec<QaPair> = match &args.signals {
        Some(path) => orchestrator::signals_per_domain(read_jsonl(path)?)
            .into_values()
            .flat_map(|s| s.qa_pairs)
            .collect(),
        None => Vec::new(),
    };
    let openings: RetrievalPool = build_opening_pool(&seeds, provider.as_ref())?;
    let user_queries = build_user_query_pool(&qa_pairs, provider.as_ref())?;
    let agent_messages = build_agent_message_pool(&qa_pairs, provider.as_ref())?;
    let pools = SessionPools {
        seed_openings: &openings,
        agent_messages: &agent_messages,
        user_queries: &user_queries,
    };

    let phase_cfg = GenerationPhaseConfig {
        sessions: args.n,
        master_seed: args.seed,
        limits: SessionLimits {
            max_turns: cfg.generation.max_turns,
            retrieval_k: cfg.generation.retrieval_k,
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
        provider.as_ref(),
        &gateway,
    )?;
    write_jsonl(&args.out, &out.sessions)?;
    if gateway.mode() == GatewayMode::Record {
        if let Some(cache) = &args.cache {
            gateway.save_cache(cache)?;
        }
    }
    println!(
        "generated {} sessions -> {} ({} aborted)",
        out.sessions.len(),
        args.out.display(),
        out.aborted.len()
    );
    for (id, reason) in &out.aborted {
        log::info!("aborted {id}: {reason}");
    }
    Ok(())
}

fn cmd_filter(config: Option<&Path>, args: FilterArgs) -> Result<()> {
    let cfg = match config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    let sessions: Vec<SessionQuadruplet> = read_jsonl(&args.input)?;
    let provider = orchestrator::build_provider(&cfg, None)?;
    let opts = FilterOptions {
        tau_u: args.tau_u,
        tau_a: args.tau_a,
        rho: args.rho,
        method: CommunityMethod::from_str(&args.method)?,
        seed: args.seed,
    };
    let (retained, report) =
        streamforge_core::filter::run_filter_phase(&sessions, provider.as_ref(), &opts)?;
    write_jsonl(&args.out, &retained)?;
    if let Some(path) = &args.report {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        std::fs::write(path, text)?;
    }
    println!(
        "retained {} of {} sessions ({} edges, {} communities) -> {}",
        retained.len(),
        sessions.len(),
        report.edges,
        report.community_sizes.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Dst { gold, pred } => {
            let gold: Vec<DialogueStateAnnotation> = read_jsonl(&gold)?;
            let pred: Vec<DialogueStateAnnotation> = read_jsonl(&pred)?;
            let jga = joint_goal_accuracy(&gold, &pred)?;
            let scores = slot_value_f1(&gold, &pred)?;
            println!("Joint Goal Accuracy: {jga:.2}");
            println!(
                "Slot P/R/F1: {:.2} / {:.2} / {:.2}",
                scores.precision, scores.recall, scores.f1
            );
        }
        EvalCommand::Slots { input, ontology } => {
            let dialogues: Vec<SessionQuadruplet> = read_jsonl(&input)?;
            let ontologies: Vec<SlotOntology> = read_jsonl(&ontology)?;
            for ontology in &ontologies {
                let label = ontology.domain.label();
                let subset: Vec<SessionQuadruplet> = dialogues
                    .iter()
                    .filter(|d| d.domain.label() == label)
                    .cloned()
                    .collect();
                if subset.is_empty() {
                    continue;
                }
                let table = slot_distribution(&subset, ontology);
                println!("domain: {label} ({} dialogues)", subset.len());
                print!("{}", render_slot_table(&table));
                println!();
            }
        }
        EvalCommand::Mix {
            public,
            synthetic,
            budget,
            ratio,
            seed,
            out,
        } => {
            let public: Vec<SessionQuadruplet> = read_jsonl(&public)?;
            let synthetic: Vec<SessionQuadruplet> = read_jsonl(&synthetic)?;
            let (mixed, manifest) = mix_training_budget(&public, &synthetic, budget, ratio, seed)?;
            if let Some(path) = &out {
                write_jsonl(path, &mixed)?;
            }
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        EvalCommand::JudgeExport {
            inputs,
            seed,
            out,
            key,
        } => {
            let mut sources: BTreeMap<String, Vec<SessionQuadruplet>> = BTreeMap::new();
            for path in &inputs {
                let stem = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .with_context(|| format!("{} has no file stem", path.display()))?;
                sources.insert(stem.to_string(), read_jsonl(path)?);
            }
            let (batch, batch_key) = export_judge_batch(&sources, seed)?;
            std::fs::create_dir_all(&out)?;
            let batch_path = out.join("batch.json");
            let mut text = serde_json::to_string_pretty(&batch)?;
            text.push('\n');
            std::fs::write(&batch_path, text)?;
            let mut key_text = serde_json::to_string_pretty(&batch_key)?;
            key_text.push('\n');
            std::fs::write(&key, key_text)?;
            println!(
                "exported {} items over {} dimensions -> {} (key -> {})",
                batch.items.len(),
                batch.dimensions.len(),
                batch_path.display(),
                key.display()
            );
        }
        EvalCommand::JudgeAggregate { scores, key, out } => {
            let mut files = Vec::new();
            for path in &scores {
                let text = std::fs::read_to_string(path)?;
                let file: JudgeScoreFile = serde_json::from_str(&text)?;
                files.push(file);
            }
            let key_text = std::fs::read_to_string(&key)?;
            let batch_key = serde_json::from_str(&key_text)?;
            let dimensions: Vec<String> =
                JUDGE_DIMENSIONS.iter().map(|d| d.to_string()).collect();
            let aggregate = aggregate_judge_scores(&files, &batch_key, &dimensions)?;
            println!(
                "{:<12} {:<18} {:<10} {:>6} {:>7}",
                "Source", "Dimension", "Judge", "Mean", "Scored"
            );
            for row in &aggregate.rows {
                println!(
                    "{:<12} {:<18} {:<10} {:>6.2} {:>7}",
                    row.source, row.dimension, row.judge, row.mean, row.scored
                );
            }
            for gap in &aggregate.missing {
                log::warn!("missing score: {gap}");
            }
            if let Some(path) = &out {
                let mut text = serde_json::to_string_pretty(&aggregate)?;
                text.push('\n');
                std::fs::write(path, text)?;
            }
        }
    }
    Ok(())
}

fn render_slot_table(table: &SlotDistributionTable) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:>12} {:>17}\n",
        "Slot", "Coverage (%)", "Distinct Values"
    ));
    for row in &table.rows {
        out.push_str(&format!(
            "{:<20} {:>12.2} {:>17}\n",
            row.slot, row.coverage_pct, row.distinct_values
        ));
    }
    out.push_str(&format!(
        "coverage variance: {:.2}, avg distinct values: {:.1}\n",
        table.coverage_variance, table.avg_values
    ));
    out
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let dialogues: Vec<SessionQuadruplet> = read_jsonl(&args.input)?;
    let stats = compute_dataset_stats(dialogues.iter());
    if args.counts {
        println!("{}", serde_json::to_string_pretty(&stats)?);
    } else {
        print!("{}", stats.render_table());
    }
    if let Some(path) = &args.report {
        let mut text = serde_json::to_string_pretty(&stats)?;
        text.push('\n');
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn cmd_run(config: Option<&Path>, args: RunArgs) -> Result<()> {
    let config_path = config.context("`run` needs --config")?;
    let phases: Vec<Phase> = match &args.phases {
        Some(spec) => spec
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(Phase::from_str)
            .collect::<streamforge_core::Result<_>>()?,
        None => Vec::new(),
    };
    let mode = match &args.mode {
        Some(raw) => Some(GatewayMode::from_str(raw)?),
        None => None,
    };
    let deps = match mode {
        Some(GatewayMode::Record) | Some(GatewayMode::Live) => {
            deps_for_mode(args.mode.as_deref().unwrap_or("mock"))?
        }
        Some(_) => ExternalDeps::default(),
        None => {
            // Mode comes from the config; load it just to pick deps.
            let cfg = load_config(config_path)?;
            deps_for_mode(&cfg.gateway.mode)?
        }
    };
    let manifest = run_pipeline(config_path, &phases, args.seed, mode, deps)?;
    print_manifest_summary(&manifest);
    if manifest.status != "completed" {
        let failed = manifest
            .phases
            .iter()
            .find(|p| p.status == "failed")
            .map(|p| p.phase.clone())
            .unwrap_or_else(|| "unknown".to_string());
        bail!("pipeline failed at phase `{failed}`");
    }
    Ok(())
}

fn print_manifest_summary(manifest: &RunManifest) {
    println!(
        "run {} (mode {}, seed {}, backend {}, embeddings {})",
        manifest.status,
        manifest.mode,
        manifest.master_seed,
        manifest.backend,
        manifest.embedding_provider
    );
    for phase in &manifest.phases {
        let outputs: Vec<String> = phase
            .outputs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        match &phase.error {
            Some(error) => println!("  {:<10} {} ({error})", phase.phase, phase.status),
            None => println!("  {:<10} {} {}", phase.phase, phase.status, outputs.join(" ")),
        }
    }
    println!("artifacts: {}", manifest.artifacts.len());
}

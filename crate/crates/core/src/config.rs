//! Pipeline configuration: one TOML file, one section per module.
//!
//! Every tunable that the source material leaves open (windows, thresholds,
//! retrieval k, caps, ratios) lives here with a documented default, so a run
//! is fully described by its config file plus a master seed. Validation is
//! report-based: unknown keys (typo guard), out-of-range thresholds, and
//! unresolvable template ids all surface as violations, not panics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::CommunityMethod;
use crate::gateway::{GatewayMode, TemplateStore};
use crate::schema::ValidationReport;

/// Template ids the phases call into; a config is only valid if all of them
/// resolve against the builtin store plus any overlay directory.
pub const REQUIRED_TEMPLATES: [&str; 8] = [
    "persona_user",
    "persona_agent",
    "blueprint",
    "opening",
    "user_turn",
    "agent_turn",
    "judge",
    "strategy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    /// Master seed; per-phase seeds are derived from it by name.
    pub seed: u64,
    /// Directory for all phase outputs and the run manifest.
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> RunSection {
        RunSection {
            seed: 42,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsSection {
    /// Directory of source archives (one subdirectory per source).
    pub sources: PathBuf,
    /// Seed dialogues, one per line.
    pub seeds: PathBuf,
    /// Slot ontologies, one per line.
    pub ontology: PathBuf,
    /// Knowledge base file per domain label; the registry id is
    /// `kb-<domain>`.
    pub kb: BTreeMap<String, PathBuf>,
    /// Lexicon TSV files applied during transcript normalization.
    pub lexicons: Vec<PathBuf>,
    /// Strategy taxonomy rules (JSON); empty uses the builtin rules.
    pub taxonomy: Option<PathBuf>,
    /// Directory of `*.txt` prompt templates overlaid on the builtins.
    pub templates: Option<PathBuf>,
    /// Gateway replay cache location.
    pub cache: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> PathsSection {
        PathsSection {
            sources: PathBuf::from("fixtures/sources"),
            seeds: PathBuf::from("fixtures/seeds.jsonl"),
            ontology: PathBuf::from("fixtures/ontology.jsonl"),
            kb: BTreeMap::new(),
            lexicons: Vec::new(),
            taxonomy: None,
            templates: None,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    /// Topical keywords matched against source tags; empty matches all.
    pub keywords: Vec<String>,
    /// Sources with a viewer count must strictly exceed this.
    pub min_viewers: u64,
    /// QA alignment window in seconds.
    pub window_secs: f64,
    /// Semantic relevance floor for QA alignment.
    pub theta_sem: f64,
    /// Minimum comment length in characters.
    pub min_comment_length: usize,
    /// Near-duplicate comment cutoff.
    pub dedup_threshold: f64,
    /// Spam regexes; empty keeps the builtin set.
    pub spam_patterns: Vec<String>,
}

impl Default for IngestSection {
    fn default() -> IngestSection {
        IngestSection {
            keywords: Vec::new(),
            min_viewers: 1000,
            window_secs: 120.0,
            theta_sem: 0.75,
            min_comment_length: 4,
            dedup_threshold: 0.95,
            spam_patterns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSection {
    /// `offline` (deterministic hasher) or `remote`.
    pub provider: String,
    /// Seed for the offline provider.
    pub seed: u64,
}

impl Default for EmbeddingSection {
    fn default() -> EmbeddingSection {
        EmbeddingSection {
            provider: "offline".to_string(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewaySection {
    /// `mock`, `replay`, `record`, or `live`.
    pub mode: String,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub token_budget: Option<u64>,
    pub max_concurrency: usize,
    /// In replay mode, fall back to the mock backend on cache miss.
    pub replay_fallback_mock: bool,
}

impl Default for GatewaySection {
    fn default() -> GatewaySection {
        GatewaySection {
            mode: "mock".to_string(),
            max_retries: 3,
            backoff_ms: 250,
            token_budget: None,
            max_concurrency: 4,
            replay_fallback_mock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonasSection {
    pub user_personas_per_domain: usize,
    pub questions_per_persona: usize,
    pub seeds_per_prompt: usize,
}

impl Default for PersonasSection {
    fn default() -> PersonasSection {
        PersonasSection {
            user_personas_per_domain: 8,
            questions_per_persona: 5,
            seeds_per_prompt: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlueprintSection {
    pub seeds_per_prompt: usize,
}

impl Default for BlueprintSection {
    fn default() -> BlueprintSection {
        BlueprintSection { seeds_per_prompt: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSection {
    /// Sessions to generate in a pipeline run.
    pub sessions: usize,
    /// Hard cap on dialogue length in turns.
    pub max_turns: usize,
    /// Evidence samples retrieved per simulated turn.
    pub retrieval_k: usize,
}

impl Default for GenerationSection {
    fn default() -> GenerationSection {
        GenerationSection {
            sessions: 50,
            max_turns: crate::generation::DEFAULT_MAX_TURNS,
            retrieval_k: crate::generation::DEFAULT_RETRIEVAL_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSection {
    pub tau_u: f64,
    pub tau_a: f64,
    pub rho: f64,
    /// `components` or `label_propagation`.
    pub method: String,
}

impl Default for FilterSection {
    fn default() -> FilterSection {
        FilterSection {
            tau_u: crate::filter::DEFAULT_TAU_U,
            tau_a: crate::filter::DEFAULT_TAU_A,
            rho: crate::filter::DEFAULT_RHO,
            method: "components".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// Training-mix budget.
    pub budget: usize,
    /// Synthetic share of the mix.
    pub synth_ratio: f64,
}

impl Default for EvalSection {
    fn default() -> EvalSection {
        EvalSection {
            budget: 2000,
            synth_ratio: 0.5,
        }
    }
}

/// The whole pipeline configuration. Every section and key is optional in
/// the file; omitted values take the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub run: RunSection,
    pub paths: PathsSection,
    pub ingest: IngestSection,
    pub embedding: EmbeddingSection,
    pub gateway: GatewaySection,
    pub personas: PersonasSection,
    pub blueprint: BlueprintSection,
    pub generation: GenerationSection,
    pub filter: FilterSection,
    pub eval: EvalSection,
}

impl PipelineConfig {
    /// Value-level checks: threshold ranges, parsable enums, resolvable
    /// template ids, compilable patterns. Key-level checks live in
    /// [`validate_config_text`].
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        let mut range = |name: &str, ok: bool, value: f64| {
            if !ok {
                report.push(
                    "threshold out of range",
                    format!("{name} = {value} is out of range"),
                );
            }
        };
        range(
            "filter.tau_u",
            self.filter.tau_u > -1.0 && self.filter.tau_u < 1.0,
            self.filter.tau_u,
        );
        range(
            "filter.tau_a",
            self.filter.tau_a > -1.0 && self.filter.tau_a < 1.0,
            self.filter.tau_a,
        );
        range(
            "filter.rho",
            self.filter.rho > 0.0 && self.filter.rho <= 1.0,
            self.filter.rho,
        );
        range(
            "ingest.theta_sem",
            (0.0..=1.0).contains(&self.ingest.theta_sem),
            self.ingest.theta_sem,
        );
        range(
            "ingest.dedup_threshold",
            (0.0..=1.0).contains(&self.ingest.dedup_threshold),
            self.ingest.dedup_threshold,
        );
        range(
            "eval.synth_ratio",
            (0.0..=1.0).contains(&self.eval.synth_ratio),
            self.eval.synth_ratio,
        );
        if self.ingest.window_secs <= 0.0 {
            report.push(
                "threshold out of range",
                format!(
                    "ingest.window_secs = {} must be positive",
                    self.ingest.window_secs
                ),
            );
        }
        if self.generation.max_turns < 2 {
            report.push(
                "threshold out of range",
                format!(
                    "generation.max_turns = {} leaves no room for an opening and a reply",
                    self.generation.max_turns
                ),
            );
        }
        if self.generation.retrieval_k == 0 {
            report.push(
                "threshold out of range",
                "generation.retrieval_k = 0 disables evidence retrieval".to_string(),
            );
        }

        if GatewayMode::from_str(&self.gateway.mode).is_err() {
            report.push(
                "invalid mode",
                format!("gateway.mode = `{}` is not a known mode", self.gateway.mode),
            );
        }
        if CommunityMethod::from_str(&self.filter.method).is_err() {
            report.push(
                "invalid method",
                format!(
                    "filter.method = `{}` is not a known community method",
                    self.filter.method
                ),
            );
        }
        if !matches!(self.embedding.provider.as_str(), "offline" | "remote") {
            report.push(
                "invalid provider",
                format!(
                    "embedding.provider = `{}` (expected `offline` or `remote`)",
                    self.embedding.provider
                ),
            );
        }

        for pattern in &self.ingest.spam_patterns {
            if regex::Regex::new(pattern).is_err() {
                report.push(
                    "invalid pattern",
                    format!("ingest.spam_patterns entry `{pattern}` does not compile"),
                );
            }
        }

        match self.template_store() {
            Ok(store) => {
                for id in REQUIRED_TEMPLATES {
                    if !store.contains(id) {
                        report.push(
                            "unresolvable template",
                            format!("template id `{id}` is not resolvable"),
                        );
                    }
                }
            }
            Err(e) => report.push(
                "unresolvable template",
                format!("template directory failed to load: {e}"),
            ),
        }
        report
    }

    /// Builtin templates plus the configured overlay directory, if any.
    pub fn template_store(&self) -> Result<TemplateStore> {
        match &self.paths.templates {
            Some(dir) => TemplateStore::with_dir(dir),
            None => Ok(TemplateStore::builtin()),
        }
    }

    /// Re-bases every relative path onto `base`; absolute paths are left
    /// alone. `load_config` applies this with the config file's directory,
    /// so a config works regardless of the process working directory.
    pub fn anchor(&mut self, base: &Path) {
        fn fix(base: &Path, p: &mut PathBuf) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        fix(base, &mut self.run.out_dir);
        fix(base, &mut self.paths.sources);
        fix(base, &mut self.paths.seeds);
        fix(base, &mut self.paths.ontology);
        for p in self.paths.kb.values_mut() {
            fix(base, p);
        }
        for p in &mut self.paths.lexicons {
            fix(base, p);
        }
        for p in [
            &mut self.paths.taxonomy,
            &mut self.paths.templates,
            &mut self.paths.cache,
        ]
        .into_iter()
        .flatten()
        {
            fix(base, p);
        }
    }
}

/// Parses config TOML. Syntax errors are hard errors; unknown keys are not
/// (they are reported by [`validate_config_text`]).
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("config parse failure: {e}")))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(base) = path.parent() {
        cfg.anchor(base);
    }
    Ok(cfg)
}

const SECTION_KEYS: &[(&str, &[&str])] = &[
    ("run", &["seed", "out_dir"]),
    (
        "paths",
        &[
            "sources",
            "seeds",
            "ontology",
            "kb",
            "lexicons",
            "taxonomy",
            "templates",
            "cache",
        ],
    ),
    (
        "ingest",
        &[
            "keywords",
            "min_viewers",
            "window_secs",
            "theta_sem",
            "min_comment_length",
            "dedup_threshold",
            "spam_patterns",
        ],
    ),
    ("embedding", &["provider", "seed"]),
    (
        "gateway",
        &[
            "mode",
            "max_retries",
            "backoff_ms",
            "token_budget",
            "max_concurrency",
            "replay_fallback_mock",
        ],
    ),
    (
        "personas",
        &[
            "user_personas_per_domain",
            "questions_per_persona",
            "seeds_per_prompt",
        ],
    ),
    ("blueprint", &["seeds_per_prompt"]),
    ("generation", &["sessions", "max_turns", "retrieval_k"]),
    ("filter", &["tau_u", "tau_a", "rho", "method"]),
    ("eval", &["budget", "synth_ratio"]),
];

fn push_unknown(report: &mut ValidationReport, path: &str) {
    report.push("unknown key", format!("unknown key `{path}`"));
}

/// Typo guard: flags every key the schema does not know, at both section and
/// field level. `[paths.kb]` is the one wildcard table (domain → file).
fn check_unknown_keys(value: &toml::Value, report: &mut ValidationReport) {
    let Some(top) = value.as_table() else {
        report.push("unknown key", "config root is not a table".to_string());
        return;
    };
    for (section, body) in top {
        let Some(known) = SECTION_KEYS
            .iter()
            .find(|(name, _)| name == section)
            .map(|(_, keys)| *keys)
        else {
            match body.as_table() {
                Some(fields) if !fields.is_empty() => {
                    for key in fields.keys() {
                        push_unknown(report, &format!("{section}.{key}"));
                    }
                }
                _ => push_unknown(report, section),
            }
            continue;
        };
        let Some(fields) = body.as_table() else {
            push_unknown(report, section);
            continue;
        };
        for key in fields.keys() {
            if !known.contains(&key.as_str()) {
                push_unknown(report, &format!("{section}.{key}"));
            }
        }
    }
}

/// Full report-based validation of config text: unknown keys, type errors,
/// out-of-range values, unresolvable templates. Empty report means the
/// config is safe to run.
pub fn validate_config_text(text: &str) -> Result<ValidationReport> {
    let value: toml::Value = text
        .parse()
        .map_err(|e| Error::Config(format!("config parse failure: {e}")))?;
    let mut report = ValidationReport::new();
    check_unknown_keys(&value, &mut report);
    match parse_config(text) {
        Ok(cfg) => report.merge(cfg.validate()),
        Err(e) => report.push("type error", e.to_string()),
    }
    Ok(report)
}

pub fn validate_config_file(path: impl AsRef<Path>) -> Result<ValidationReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    validate_config_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults_and_valid() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert!(cfg.validate().accepted());
        assert_eq!(cfg.run.seed, 42);
        assert_eq!(cfg.ingest.window_secs, 120.0);
        assert_eq!(cfg.ingest.theta_sem, 0.75);
        assert_eq!(cfg.ingest.dedup_threshold, 0.95);
        assert_eq!(cfg.filter.tau_u, 0.85);
        assert_eq!(cfg.filter.rho, 0.6);
        assert_eq!(cfg.generation.max_turns, 40);
        assert_eq!(cfg.generation.retrieval_k, 3);
    }

    #[test]
    fn canonical_example_config_yields_empty_report() {
        let text = r#"
[run]
seed = 42
out_dir = "out"

[paths]
sources = "fixtures/sources"
seeds = "fixtures/seeds.jsonl"
ontology = "fixtures/ontology.jsonl"
lexicons = ["fixtures/lexicon_automotive.tsv"]

[paths.kb]
automotive = "fixtures/kb/automotive.jsonl"

[ingest]
keywords = ["auto", "property"]
min_viewers = 1000
window_secs = 120.0
theta_sem = 0.75

[embedding]
provider = "offline"
seed = 7

[gateway]
mode = "mock"
max_retries = 3

[personas]
user_personas_per_domain = 8

[generation]
sessions = 50
max_turns = 40
retrieval_k = 3

[filter]
tau_u = 0.85
tau_a = 0.85
rho = 0.6
method = "components"

[eval]
budget = 2000
synth_ratio = 0.5
"#;
        let report = validate_config_text(text).unwrap();
        assert!(report.accepted(), "{report}");
    }

    #[test]
    fn out_of_range_threshold_is_flagged() {
        let report = validate_config_text("[filter]\ntau_u = 1.5\n").unwrap();
        assert!(report.has_code("threshold out of range"), "{report}");
    }

    #[test]
    fn misspelled_section_is_an_unknown_key() {
        let report = validate_config_text("[generaton]\nmax_turns = 40\n").unwrap();
        assert!(report.has_code("unknown key"), "{report}");
        let msg = report.to_string();
        assert!(msg.contains("generaton.max_turns"), "{msg}");
    }

    #[test]
    fn misspelled_field_is_an_unknown_key() {
        let report = validate_config_text("[generation]\nmax_turn = 40\n").unwrap();
        assert!(report.has_code("unknown key"), "{report}");
        assert!(report.to_string().contains("generation.max_turn"));
    }

    #[test]
    fn kb_table_accepts_arbitrary_domain_keys() {
        let text = "[paths.kb]\nautomotive = \"a.jsonl\"\nrealestate = \"b.jsonl\"\n";
        let report = validate_config_text(text).unwrap();
        assert!(report.accepted(), "{report}");
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.paths.kb.len(), 2);
    }

    #[test]
    fn invalid_gateway_mode_and_method_are_flagged() {
        let report =
            validate_config_text("[gateway]\nmode = \"turbo\"\n[filter]\nmethod = \"louvain\"\n")
                .unwrap();
        assert!(report.has_code("invalid mode"));
        assert!(report.has_code("invalid method"));
    }

    #[test]
    fn bad_spam_pattern_is_flagged() {
        let report = validate_config_text("[ingest]\nspam_patterns = [\"([\"]\n").unwrap();
        assert!(report.has_code("invalid pattern"), "{report}");
    }

    #[test]
    fn type_error_is_reported_not_panicked() {
        let report = validate_config_text("[filter]\ntau_u = \"high\"\n").unwrap();
        assert!(report.has_code("type error"), "{report}");
    }

    #[test]
    fn syntax_error_is_a_hard_error() {
        assert!(validate_config_text("not [valid toml").is_err());
    }

    #[test]
    fn required_templates_resolve_against_builtins() {
        let cfg = PipelineConfig::default();
        let store = cfg.template_store().unwrap();
        for id in REQUIRED_TEMPLATES {
            assert!(store.contains(id), "missing builtin template {id}");
        }
    }

    #[test]
    fn max_turns_below_two_is_out_of_range() {
        let report = validate_config_text("[generation]\nmax_turns = 1\n").unwrap();
        assert!(report.has_code("threshold out of range"));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(cfg, back);
    }
}

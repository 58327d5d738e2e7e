//! Uniform client for text-generation backends.
//!
//! Every model call in the pipeline goes through [`Gateway::generate`]: the
//! prompt comes from a versioned template, the request is fingerprinted, and
//! the configured mode decides whether the call hits a real backend, a
//! record/replay cache, or the deterministic mock synthesizer. Mock and
//! replay runs are bit-reproducible.

mod backend;
mod cache;
mod mock;
mod templates;

pub use backend::{Backend, NullBackend, ScriptedBackend};
pub use cache::ReplayCache;
pub use mock::MockBackend;
pub use templates::{Template, TemplateStore};

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// What a request is for. Drives the mock synthesizer and usage accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurposeTag {
    Persona,
    Blueprint,
    Opening,
    UserTurn,
    AgentTurn,
    Judge,
    Strategy,
}

impl PurposeTag {
    pub fn label(&self) -> &'static str {
        match self {
            PurposeTag::Persona => "persona",
            PurposeTag::Blueprint => "blueprint",
            PurposeTag::Opening => "opening",
            PurposeTag::UserTurn => "user_turn",
            PurposeTag::AgentTurn => "agent_turn",
            PurposeTag::Judge => "judge",
            PurposeTag::Strategy => "strategy",
        }
    }
}

impl std::fmt::Display for PurposeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Decoding parameters. Part of the request fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f32,
    pub max_tokens: u32,
    pub seed: u64,
}

impl Default for Decoding {
    fn default() -> Decoding {
        Decoding {
            temperature: 0.7,
            max_tokens: 1024,
            seed: 0,
        }
    }
}

/// One generation request against a named template.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub template_id: String,
    pub variables: BTreeMap<String, String>,
    pub decoding: Decoding,
    pub purpose: PurposeTag,
}

impl GenerationRequest {
    pub fn new(template_id: impl Into<String>, purpose: PurposeTag) -> GenerationRequest {
        GenerationRequest {
            template_id: template_id.into(),
            variables: BTreeMap::new(),
            decoding: Decoding::default(),
            purpose,
        }
    }

    pub fn var(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.variables.insert(key.into(), value.into());
        self
    }

    pub fn decoding(mut self, decoding: Decoding) -> Self {
        self.decoding = decoding;
        self
    }
}

/// A request after template resolution, as handed to a backend.
#[derive(Debug)]
pub struct PreparedRequest<'a> {
    pub template_id: &'a str,
    pub purpose: PurposeTag,
    pub prompt: String,
    pub variables: &'a BTreeMap<String, String>,
    pub decoding: &'a Decoding,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Mock,
    Replay,
    Record,
    Live,
}

impl std::fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let label = match self {
            GatewayMode::Mock => "mock",
            GatewayMode::Replay => "replay",
            GatewayMode::Record => "record",
            GatewayMode::Live => "live",
        };
        f.write_str(label)
    }
}

impl std::str::FromStr for GatewayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<GatewayMode> {
        match s {
            "mock" => Ok(GatewayMode::Mock),
            "replay" => Ok(GatewayMode::Replay),
            "record" => Ok(GatewayMode::Record),
            "live" => Ok(GatewayMode::Live),
            other => Err(Error::Config(format!(
                "unknown gateway mode `{other}` (expected mock|replay|record|live)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub mode: GatewayMode,
    /// Retries after the first attempt, with exponential backoff.
    pub max_retries: u32,
    pub backoff_ms: u64,
    /// Estimated-token ceiling per run; `None` disables the check.
    pub token_budget: Option<u64>,
    pub max_concurrency: usize,
    /// On a replay miss, fall back to the mock synthesizer instead of erroring.
    pub replay_fallback_mock: bool,
}

impl Default for GatewayConfig {
    fn default() -> GatewayConfig {
        GatewayConfig {
            mode: GatewayMode::Mock,
            max_retries: 3,
            backoff_ms: 250,
            token_budget: None,
            max_concurrency: 4,
            replay_fallback_mock: false,
        }
    }
}

/// Request fingerprint: covers template id, resolved variables, decoding
/// parameters, and backend identity, so a cache entry can never be replayed
/// against a request it was not recorded for.
pub fn fingerprint(
    template_id: &str,
    variables: &BTreeMap<String, String>,
    decoding: &Decoding,
    backend_id: &str,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(template_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(decoding.temperature.to_bits().to_le_bytes());
    hasher.update(decoding.max_tokens.to_le_bytes());
    hasher.update(decoding.seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(backend_id.as_bytes());
    hasher.update([0u8]);
    for (key, value) in variables {
        hasher.update(key.as_bytes());
        hasher.update([1u8]);
        hasher.update(value.as_bytes());
        hasher.update([2u8]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Rough token estimate (4 characters per token) used for budget accounting;
/// no tokenizer dependency, so the figure is an upper-bound heuristic.
fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64 + 3) / 4
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
        SemaphoreGuard { sem: self }
    }
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.sem.permits.lock().unwrap();
        *permits += 1;
        self.sem.cv.notify_one();
    }
}

/// The gateway. Shareable across worker threads; in-flight backend calls are
/// bounded by `max_concurrency` and cache/budget state is lock-protected.
pub struct Gateway {
    templates: TemplateStore,
    backend: Box<dyn Backend>,
    mock: MockBackend,
    cfg: GatewayConfig,
    cache: Mutex<ReplayCache>,
    tokens_used: Mutex<u64>,
    usage: Mutex<BTreeMap<String, u64>>,
    sem: Semaphore,
}

impl Gateway {
    pub fn new(templates: TemplateStore, backend: Box<dyn Backend>, cfg: GatewayConfig) -> Gateway {
        let concurrency = cfg.max_concurrency;
        Gateway {
            templates,
            backend,
            mock: MockBackend::new(),
            cfg,
            cache: Mutex::new(ReplayCache::new()),
            tokens_used: Mutex::new(0),
            usage: Mutex::new(BTreeMap::new()),
            sem: Semaphore::new(concurrency),
        }
    }

    /// Mock-mode gateway over the builtin templates; the workhorse for
    /// offline runs and tests.
    pub fn mock() -> Gateway {
        Gateway::new(
            TemplateStore::builtin(),
            Box::new(NullBackend::new("mock")),
            GatewayConfig::default(),
        )
    }

    pub fn with_cache(self, cache: ReplayCache) -> Gateway {
        Gateway {
            cache: Mutex::new(cache),
            ..self
        }
    }

    pub fn mode(&self) -> GatewayMode {
        self.cfg.mode
    }

    pub fn templates(&self) -> &TemplateStore {
        &self.templates
    }

    /// Backend identity as recorded in fingerprints and manifests.
    pub fn backend_id(&self) -> &str {
        match self.cfg.mode {
            GatewayMode::Mock => "mock",
            _ => self.backend.id(),
        }
    }

    pub fn tokens_used(&self) -> u64 {
        *self.tokens_used.lock().unwrap()
    }

    /// Successful generations per purpose label.
    pub fn usage(&self) -> BTreeMap<String, u64> {
        self.usage.lock().unwrap().clone()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn save_cache(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.cache.lock().unwrap().save(path)
    }

    pub fn generate(&self, req: &GenerationRequest) -> Result<String> {
        let template = self.templates.get(&req.template_id)?;
        let prompt = template.resolve(&req.variables)?;
        let backend_id = self.backend_id().to_string();
        let fp = fingerprint(&req.template_id, &req.variables, &req.decoding, &backend_id);
        let prepared = PreparedRequest {
            template_id: &req.template_id,
            purpose: req.purpose,
            prompt,
            variables: &req.variables,
            decoding: &req.decoding,
            fingerprint: fp,
        };

        let text = match self.cfg.mode {
            GatewayMode::Mock => self.call_mock(&prepared)?,
            GatewayMode::Replay => {
                let hit = {
                    let cache = self.cache.lock().unwrap();
                    cache.get(&prepared.fingerprint).map(str::to_string)
                };
                match hit {
                    Some(text) => text,
                    None if self.cfg.replay_fallback_mock => self.call_mock(&prepared)?,
                    None => {
                        return Err(Error::CacheMiss {
                            fingerprint: prepared.fingerprint,
                        })
                    }
                }
            }
            GatewayMode::Record => {
                let text = self.call_backend(&prepared)?;
                self.cache
                    .lock()
                    .unwrap()
                    .put(prepared.fingerprint.clone(), text.clone());
                text
            }
            GatewayMode::Live => self.call_backend(&prepared)?,
        };

        let mut usage = self.usage.lock().unwrap();
        *usage.entry(req.purpose.label().to_string()).or_insert(0) += 1;
        Ok(text)
    }

    fn charge_budget(&self, prompt: &str) -> Result<()> {
        if let Some(budget) = self.cfg.token_budget {
            let used = *self.tokens_used.lock().unwrap();
            let projected = used + estimate_tokens(prompt);
            if projected > budget {
                return Err(Error::BudgetExceeded { used, budget });
            }
        }
        Ok(())
    }

    fn settle_budget(&self, prompt: &str, response: &str) {
        let mut used = self.tokens_used.lock().unwrap();
        *used += estimate_tokens(prompt) + estimate_tokens(response);
    }

    fn call_mock(&self, prepared: &PreparedRequest<'_>) -> Result<String> {
        self.charge_budget(&prepared.prompt)?;
        let text = self.mock.complete(prepared).map_err(|message| Error::Backend {
            backend: "mock".into(),
            attempts: 1,
            message,
        })?;
        self.settle_budget(&prepared.prompt, &text);
        Ok(text)
    }

    fn call_backend(&self, prepared: &PreparedRequest<'_>) -> Result<String> {
        self.charge_budget(&prepared.prompt)?;
        let _permit = self.sem.acquire();
        let attempts = self.cfg.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            match self.backend.complete(prepared) {
                Ok(text) => {
                    self.settle_budget(&prepared.prompt, &text);
                    return Ok(text);
                }
                Err(message) => {
                    log::warn!(
                        "backend {} attempt {attempt}/{attempts} failed: {message}",
                        self.backend.id()
                    );
                    last_error = message;
                    if attempt < attempts && self.cfg.backoff_ms > 0 {
                        let delay = self.cfg.backoff_ms << (attempt - 1);
                        std::thread::sleep(std::time::Duration::from_millis(delay));
                    }
                }
            }
        }
        Err(Error::Backend {
            backend: self.backend.id().to_string(),
            attempts,
            message: last_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn basic_request() -> GenerationRequest {
        GenerationRequest::new("strategy", PurposeTag::Strategy)
            .var("response", "what day works for you? I will reserve a test drive")
            .var("taxonomy", "greeting; requirement_mining; conversion")
    }

    #[test]
    fn mock_mode_is_deterministic() {
        let gw = Gateway::mock();
        let req = basic_request();
        let a = gw.generate(&req).unwrap();
        let b = gw.generate(&req).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn unknown_template_is_rejected() {
        let gw = Gateway::mock();
        let req = GenerationRequest::new("no_such_template", PurposeTag::Judge);
        assert!(matches!(
            gw.generate(&req),
            Err(Error::TemplateMissing(_))
        ));
    }

    #[test]
    fn uncovered_slot_is_rejected() {
        let gw = Gateway::mock();
        let req = GenerationRequest::new("strategy", PurposeTag::Strategy)
            .var("response", "hello");
        match gw.generate(&req) {
            Err(Error::TemplateSlot { template, slot }) => {
                assert_eq!(template, "strategy");
                assert_eq!(slot, "taxonomy");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn record_then_replay_returns_identical_text() {
        let cfg = GatewayConfig {
            mode: GatewayMode::Record,
            backoff_ms: 0,
            ..GatewayConfig::default()
        };
        let recorder = Gateway::new(
            TemplateStore::builtin(),
            Box::new(ScriptedBackend::new("scripted", vec!["recorded answer"])),
            cfg,
        );
        let req = basic_request();
        let recorded = recorder.generate(&req).unwrap();
        assert_eq!(recorded, "recorded answer");

        let dir = tempfile::tempdir().unwrap();
        let cache_path = dir.path().join("cache.jsonl");
        recorder.save_cache(&cache_path).unwrap();

        let replay_cfg = GatewayConfig {
            mode: GatewayMode::Replay,
            ..GatewayConfig::default()
        };
        let replayer = Gateway::new(
            TemplateStore::builtin(),
            Box::new(NullBackend::new("scripted")),
            replay_cfg,
        )
        .with_cache(ReplayCache::load(&cache_path).unwrap());
        let replayed = replayer.generate(&req).unwrap();
        assert_eq!(replayed, recorded);
    }

    #[test]
    fn replay_miss_without_fallback_names_the_fingerprint() {
        let cfg = GatewayConfig {
            mode: GatewayMode::Replay,
            ..GatewayConfig::default()
        };
        let gw = Gateway::new(
            TemplateStore::builtin(),
            Box::new(NullBackend::new("backend-x")),
            cfg,
        );
        let req = basic_request();
        let expected =
            fingerprint(&req.template_id, &req.variables, &req.decoding, "backend-x");
        match gw.generate(&req) {
            Err(Error::CacheMiss { fingerprint }) => assert_eq!(fingerprint, expected),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn replay_miss_with_fallback_uses_mock() {
        let cfg = GatewayConfig {
            mode: GatewayMode::Replay,
            replay_fallback_mock: true,
            ..GatewayConfig::default()
        };
        let gw = Gateway::new(
            TemplateStore::builtin(),
            Box::new(NullBackend::new("backend-x")),
            cfg,
        );
        let text = gw.generate(&basic_request()).unwrap();
        assert!(!text.is_empty());
    }

    #[test]
    fn transient_failures_are_retried() {
        let cfg = GatewayConfig {
            mode: GatewayMode::Live,
            backoff_ms: 0,
            ..GatewayConfig::default()
        };
        let gw = Gateway::new(
            TemplateStore::builtin(),
            Box::new(ScriptedBackend::failing("flaky", 3, "eventual answer")),
            cfg,
        );
        assert_eq!(gw.generate(&basic_request()).unwrap(), "eventual answer");
    }

    #[test]
    fn exhausted_retries_surface_a_backend_error() {
        let cfg = GatewayConfig {
            mode: GatewayMode::Live,
            backoff_ms: 0,
            ..GatewayConfig::default()
        };
        let gw = Gateway::new(
            TemplateStore::builtin(),
            Box::new(ScriptedBackend::failing("flaky", 10, "never reached")),
            cfg,
        );
        match gw.generate(&basic_request()) {
            Err(Error::Backend {
                backend, attempts, ..
            }) => {
                assert_eq!(backend, "flaky");
                assert_eq!(attempts, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn token_budget_is_enforced() {
        let cfg = GatewayConfig {
            token_budget: Some(10),
            ..GatewayConfig::default()
        };
        let gw = Gateway::new(
            TemplateStore::builtin(),
            Box::new(NullBackend::new("mock")),
            cfg,
        );
        match gw.generate(&basic_request()) {
            Err(Error::BudgetExceeded { used, budget }) => {
                assert_eq!(used, 0);
                assert_eq!(budget, 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fingerprints_are_injective_over_a_fixture_request_set() {
        let requests = vec![
            basic_request(),
            GenerationRequest::new("strategy", PurposeTag::Strategy)
                .var("response", "different text")
                .var("taxonomy", "greeting; conversion"),
            GenerationRequest::new("judge", PurposeTag::Judge)
                .var("dialogue", "U: hi\nA: hello")
                .var("dimensions", "Coherence; Naturalness"),
            basic_request().decoding(Decoding {
                temperature: 0.2,
                ..Decoding::default()
            }),
            basic_request().decoding(Decoding {
                seed: 7,
                ..Decoding::default()
            }),
        ];
        let mut seen = BTreeSet::new();
        for req in &requests {
            let fp = fingerprint(&req.template_id, &req.variables, &req.decoding, "mock");
            assert!(seen.insert(fp), "fingerprint collision in fixture set");
        }
        let other_backend =
            fingerprint("strategy", &requests[0].variables, &requests[0].decoding, "live-a");
        assert!(!seen.contains(&other_backend));
    }

    #[test]
    fn usage_counters_track_purposes() {
        let gw = Gateway::mock();
        gw.generate(&basic_request()).unwrap();
        gw.generate(&basic_request()).unwrap();
        assert_eq!(gw.usage().get("strategy"), Some(&2));
        assert!(gw.tokens_used() > 0);
    }

    #[test]
    fn gateway_is_shareable_across_threads() {
        let cfg = GatewayConfig {
            max_concurrency: 2,
            ..GatewayConfig::default()
        };
        let gw = std::sync::Arc::new(Gateway::new(
            TemplateStore::builtin(),
            Box::new(NullBackend::new("mock")),
            cfg,
        ));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let gw = gw.clone();
            handles.push(std::thread::spawn(move || {
                gw.generate(&basic_request()).unwrap()
            }));
        }
        let outputs: BTreeSet<String> =
            handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(outputs.len(), 1);
    }
}

//! Backend abstraction plus the test/replay implementations that ship with
//! the core crate. Network-backed implementations live in the CLI crate.

use std::collections::VecDeque;
use std::sync::Mutex;

use super::PreparedRequest;

/// A text-generation backend. Errors are plain messages; the gateway owns
/// retry policy and typed error wrapping.
pub trait Backend: Send + Sync {
    /// Stable identity, folded into request fingerprints.
    fn id(&self) -> &str;

    fn complete(&self, req: &PreparedRequest<'_>) -> std::result::Result<String, String>;
}

/// A backend that cannot generate. Used for replay-only gateways, where only
/// the identity matters (fingerprints must match the recording backend).
pub struct NullBackend {
    id: String,
}

impl NullBackend {
    pub fn new(id: impl Into<String>) -> NullBackend {
        NullBackend { id: id.into() }
    }
}

impl Backend for NullBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, _req: &PreparedRequest<'_>) -> std::result::Result<String, String> {
        Err("null backend cannot generate".into())
    }
}

/// Deterministic scripted backend for tests: pops pre-seeded results in order.
pub struct ScriptedBackend {
    id: String,
    script: Mutex<VecDeque<std::result::Result<String, String>>>,
}

impl ScriptedBackend {
    pub fn new(id: impl Into<String>, responses: Vec<&str>) -> ScriptedBackend {
        ScriptedBackend {
            id: id.into(),
            script: Mutex::new(responses.into_iter().map(|r| Ok(r.to_string())).collect()),
        }
    }

    /// Fails `failures` times, then always answers `then`.
    pub fn failing(id: impl Into<String>, failures: usize, then: &str) -> ScriptedBackend {
        let mut script: VecDeque<std::result::Result<String, String>> = (0..failures)
            .map(|i| Err(format!("scripted failure {}", i + 1)))
            .collect();
        script.push_back(Ok(then.to_string()));
        ScriptedBackend {
            id: id.into(),
            script: Mutex::new(script),
        }
    }

    pub fn with_results(
        id: impl Into<String>,
        results: Vec<std::result::Result<String, String>>,
    ) -> ScriptedBackend {
        ScriptedBackend {
            id: id.into(),
            script: Mutex::new(results.into()),
        }
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, _req: &PreparedRequest<'_>) -> std::result::Result<String, String> {
        let mut script = self.script.lock().unwrap();
        match script.pop_front() {
            Some(result) => {
                // The final scripted entry keeps answering, so retry loops
                // that overshoot the script stay deterministic.
                if script.is_empty() {
                    if let Ok(text) = &result {
                        script.push_back(Ok(text.clone()));
                    }
                }
                result
            }
            None => Err("script exhausted".into()),
        }
    }
}

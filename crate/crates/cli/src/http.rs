//! Network backend for record and live gateway modes.
//!
//! Credentials and routing come from the environment, never from config
//! files or flags:
//!   STREAMFORGE_ENDPOINT  completion URL (required)
//!   STREAMFORGE_API_KEY   bearer token (required)
//!   STREAMFORGE_MODEL     model identifier (optional, default "default")
//!
//! The wire contract is a single POST of
//!   {"model", "prompt", "temperature", "max_tokens", "seed"}
//! answered with {"text": "..."}.

use std::time::Duration;

use serde::Deserialize;
use streamforge_core::gateway::{Backend, PreparedRequest};

pub const ENV_ENDPOINT: &str = "STREAMFORGE_ENDPOINT";
pub const ENV_API_KEY: &str = "STREAMFORGE_API_KEY";
pub const ENV_MODEL: &str = "STREAMFORGE_MODEL";

pub struct HttpBackend {
    id: String,
    endpoint: String,
    api_key: String,
    model: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

impl HttpBackend {
    pub fn new(endpoint: String, api_key: String, model: String) -> anyhow::Result<HttpBackend> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()?;
        Ok(HttpBackend {
            id: format!("http:{model}"),
            endpoint,
            api_key,
            model,
            client,
        })
    }

    /// Builds a backend from the environment, or None when no endpoint is
    /// configured. A set endpoint with a missing key is an error rather than
    /// a silent fallback.
    pub fn from_env() -> anyhow::Result<Option<HttpBackend>> {
        let Ok(endpoint) = std::env::var(ENV_ENDPOINT) else {
            return Ok(None);
        };
        let api_key = std::env::var(ENV_API_KEY).map_err(|_| {
            anyhow::anyhow!("{ENV_ENDPOINT} is set but {ENV_API_KEY} is not")
        })?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".to_string());
        Ok(Some(HttpBackend::new(endpoint, api_key, model)?))
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &PreparedRequest<'_>) -> Result<String, String> {
        let body = serde_json::json!({
            "model": self.model,
            "prompt": req.prompt,
            "temperature": req.decoding.temperature,
            "max_tokens": req.decoding.max_tokens,
            "seed": req.decoding.seed,
        });
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| format!("request failed: {e}"))?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("backend returned {status}"));
        }
        let parsed: CompletionResponse = response
            .json()
            .map_err(|e| format!("malformed completion response: {e}"))?;
        Ok(parsed.text)
    }
}

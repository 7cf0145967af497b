//! Model clients: a fixture-driven mock and an HTTP endpoint.

use std::path::Path;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::config::ModelConfig;

use super::prompt::Prompt;

pub const ENDPOINT_VAR: &str = "DATAWISE_MODEL_ENDPOINT";
pub const KEY_VAR: &str = "DATAWISE_MODEL_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model did not answer within {0:?}")]
    Timeout(Duration),
    #[error("model request failed: {0}")]
    Request(String),
    #[error("invalid fixture file: {0}")]
    Fixtures(String),
    #[error("no model endpoint configured; set {ENDPOINT_VAR}")]
    NoEndpoint,
}

pub trait ModelClient: Send + Sync {
    fn generate(&self, prompt: &Prompt, max_tokens: u32) -> Result<String, ModelError>;
    fn identity(&self) -> String;
    fn timeout(&self) -> Duration;
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct Fixture {
    /// Statement being completed, compared after trimming trailing whitespace.
    pub partial: String,
    pub response: String,
    #[serde(default)]
    pub delay_ms: u64,
}

#[derive(Debug, Deserialize)]
struct FixtureFile {
    #[serde(default, rename = "fixture")]
    fixtures: Vec<Fixture>,
}

/// Answers from scripted fixtures; unmatched prompts get an empty code block.
#[derive(Debug, Clone)]
pub struct MockModel {
    fixtures: Vec<Fixture>,
    timeout: Duration,
}

impl Default for MockModel {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl MockModel {
    pub fn new(fixtures: Vec<Fixture>) -> Self {
        Self {
            fixtures,
            timeout: Duration::from_secs(10),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let file: FixtureFile = toml::from_str(text).map_err(|e| ModelError::Fixtures(e.to_string()))?;
        Ok(Self::new(file.fixtures))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Fixtures(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn lookup(&self, statement: &str) -> Option<&Fixture> {
        let key = statement.trim_end();
        self.fixtures.iter().find(|f| f.partial.trim_end() == key)
    }
}

impl ModelClient for MockModel {
    fn generate(&self, prompt: &Prompt, _max_tokens: u32) -> Result<String, ModelError> {
        match self.lookup(&prompt.statement) {
            Some(f) => {
                if f.delay_ms > 0 {
                    std::thread::sleep(Duration::from_millis(f.delay_ms));
                }
                Ok(f.response.clone())
            }
            None => Ok("```\n```".to_string()),
        }
    }

    fn identity(&self) -> String {
        format!("mock ({} fixtures)", self.fixtures.len())
    }

    fn timeout(&self) -> Duration {
        self.timeout
    }
}

/// POSTs the prompt as JSON and reads the completion text back.
pub struct HttpModel {
    endpoint: String,
    key: Option<String>,
    timeout: Duration,
    client: reqwest::blocking::Client,
}

impl HttpModel {
    pub fn new(endpoint: impl Into<String>, key: Option<String>, timeout: Duration) -> Result<Self, ModelError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ModelError::Request(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            key,
            timeout,
            client,
        })
    }

    /// Endpoint and key from the environment, falling back to the config.
    pub fn from_env(config: &ModelConfig) -> Result<Self, ModelError> {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .ok()
            .or_else(|| config.endpoint.clone())
            .ok_or(ModelError::NoEndpoint)?;
        let key = std::env::var(KEY_VAR).ok();
        Self::new(endpoint, key, Duration::from_millis(config.timeout_ms))
    }
}

/// Accepts `{"text": ..}`, `{"completion": ..}`, `{"choices": [{"text": ..}]}` or a bare string.
fn extract_text(body: &str) -> String {
    let Ok(v) = serde_json::from_str::<serde_json::Value>(body) else {
        return body.to_string();
    };
    let pick = |v: &serde_json::Value| v.as_str().map(str::to_string);
    v.get("text")
        .and_then(pick)
        .or_else(|| v.get("completion").and_then(pick))
        .or_else(|| v.pointer("/choices/0/text").and_then(pick))
        .or_else(|| pick(&v))
        .unwrap_or_else(|| body.to_string())
}

impl ModelClient for HttpModel {
    fn generate(&self, prompt: &Prompt, max_tokens: u32) -> Result<String, ModelError> {
        let body = json!({
            "prompt": {
                "code_context": prompt.code_context,
                "data_context": prompt.data_context,
                "task_instruction": prompt.task_instruction,
                "format_control": prompt.format_control,
            },
            "text": prompt.render(),
            "max_tokens": max_tokens,
            "temperature": 0,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(k) = &self.key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                ModelError::Timeout(self.timeout)
            } else {
                ModelError::Request(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ModelError::Request(e.to_string()))?;
        if !status.is_success() {
            return Err(ModelError::Request(format!("status {status}: {text}")));
        }
        Ok(extract_text(&text))
    }

    fn identity(&self) -> String {
        format!("http {}", self.endpoint)
    }

    fn timeout(&self) -> Duration {
        self.timeout
    }
}

/// Runs one request on a worker thread and gives up after the client's timeout.
pub fn generate_with_timeout(client: &Arc<dyn ModelClient>, prompt: &Prompt, max_tokens: u32) -> Result<String, ModelError> {
    let (tx, rx) = mpsc::channel();
    let worker = Arc::clone(client);
    let prompt = prompt.clone();
    std::thread::spawn(move || {
        let _ = tx.send(worker.generate(&prompt, max_tokens));
    });
    let limit = client.timeout();
    rx.recv_timeout(limit).unwrap_or(Err(ModelError::Timeout(limit)))
}

/// Builds the client a model config asks for.
pub fn client_from_config(config: &ModelConfig) -> Result<Arc<dyn ModelClient>, ModelError> {
    let timeout = Duration::from_millis(config.timeout_ms);
    if config.mock {
        let mock = match &config.fixtures {
            Some(path) => MockModel::load(path)?,
            None => MockModel::default(),
        };
        Ok(Arc::new(mock.with_timeout(timeout)))
    } else {
        Ok(Arc::new(HttpModel::from_env(config)?))
    }
}

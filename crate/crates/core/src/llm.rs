//! Uniform language-model access: a chat-completions HTTP client with bounded
//! retries, and a hash-keyed deterministic mock for offline runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical::read_json;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_MAX_OUTPUT: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleTag {
    Policy,
    Inducer,
    Attributor,
    Scorer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub role_tag: RoleTag,
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_output: u32,
}

impl PromptRequest {
    pub fn new(role_tag: RoleTag, system_text: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            role_tag,
            system_text: system_text.into(),
            user_text: user_text.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_output: DEFAULT_MAX_OUTPUT,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    fn check(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::BadRequest("temperature must be non-negative".into()));
        }
        if self.system_text.trim().is_empty() || self.user_text.trim().is_empty() {
            return Err(GatewayError::BadRequest("prompt texts must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("mock table has no response for role {0:?}")]
    NoDefault(RoleTag),
    #[error("cannot load mock table: {0}")]
    Table(String),
}

impl From<GatewayError> for crate::Error {
    fn from(e: GatewayError) -> Self {
        crate::Error::Gateway(e.to_string())
    }
}

pub trait Gateway: Send + Sync {
    fn complete(&self, request: &PromptRequest) -> Result<String, GatewayError>;

    /// Completed-or-attempted requests so far.
    fn call_count(&self) -> usize;
}

/// Lowercased, whitespace-collapsed text hashed to 32 hex characters.
pub fn prompt_key(user_text: &str) -> String {
    let normalized = user_text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let hash = Sha256::digest(normalized.as_bytes());
    hash.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub role: RoleTag,
    /// Precomputed [`prompt_key`]; alternatively give the prompt text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub response: String,
}

impl Default for RoleTag {
    fn default() -> Self {
        RoleTag::Policy
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockTable {
    #[serde(default)]
    pub entries: Vec<MockEntry>,
    #[serde(default)]
    pub defaults: BTreeMap<RoleTag, String>,
}

#[derive(Debug, Default)]
pub struct MockGateway {
    responses: BTreeMap<(RoleTag, String), String>,
    defaults: BTreeMap<RoleTag, String>,
    calls: AtomicUsize,
}

impl MockGateway {
    pub fn new(table: MockTable) -> Result<Self, GatewayError> {
        let mut responses = BTreeMap::new();
        for (i, e) in table.entries.into_iter().enumerate() {
            let key = match (e.key, e.prompt) {
                (Some(k), _) => k,
                (None, Some(p)) => prompt_key(&p),
                (None, None) => return Err(GatewayError::Table(format!("entry {i} has neither key nor prompt"))),
            };
            responses.insert((e.role, key), e.response);
        }
        Ok(Self {
            responses,
            defaults: table.defaults,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let table: MockTable = read_json(path).map_err(|e| GatewayError::Table(e.to_string()))?;
        Self::new(table)
    }

    pub fn with_default(mut self, role: RoleTag, response: impl Into<String>) -> Self {
        self.defaults.insert(role, response.into());
        self
    }

    pub fn with_response(mut self, role: RoleTag, prompt: &str, response: impl Into<String>) -> Self {
        self.responses.insert((role, prompt_key(prompt)), response.into());
        self
    }
}

impl Gateway for MockGateway {
    fn complete(&self, request: &PromptRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        request.check()?;
        let key = (request.role_tag, prompt_key(&request.user_text));
        self.responses
            .get(&key)
            .or_else(|| self.defaults.get(&request.role_tag))
            .cloned()
            .ok_or(GatewayError::NoDefault(request.role_tag))
    }

    fn call_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    2
}

fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// First backoff delay; doubles after every failed attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
}

impl ProviderConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            token_env: None,
            timeout_secs: default_timeout(),
            retries: default_retries(),
            backoff_base_ms: default_backoff_ms(),
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

static REMOTE_ATTEMPTS: AtomicUsize = AtomicUsize::new(0);

/// HTTP requests attempted by any remote gateway in this process.
pub fn remote_attempts() -> usize {
    REMOTE_ATTEMPTS.load(Ordering::Relaxed)
}

pub struct RemoteGateway {
    config: ProviderConfig,
    client: reqwest::blocking::Client,
    calls: AtomicUsize,
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl RemoteGateway {
    pub fn new(config: ProviderConfig) -> Result<Self, GatewayError> {
        if !(config.timeout_secs > 0.0) {
            return Err(GatewayError::BadRequest("timeout must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Transport { attempts: 0, message: e.to_string() })?;
        Ok(Self {
            config,
            client,
            calls: AtomicUsize::new(0),
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Result<String, Attempt> {
        REMOTE_ATTEMPTS.fetch_add(1, Ordering::Relaxed);
        let mut req = self.client.post(self.endpoint()).json(body);
        if let Some(var) = &self.config.token_env {
            if let Ok(token) = std::env::var(var) {
                req = req.bearer_auth(token);
            }
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(Attempt::Fatal(GatewayError::Status { status: status.as_u16(), body }));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| Attempt::Fatal(GatewayError::Malformed(e.to_string())))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Attempt::Fatal(GatewayError::Malformed("no choices".into())))
    }
}

impl Gateway for RemoteGateway {
    fn complete(&self, request: &PromptRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        request.check()?;
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![
                ChatMessage { role: "system", content: &request.system_text },
                ChatMessage { role: "user", content: &request.user_text },
            ],
            temperature: request.temperature,
            max_tokens: request.max_output,
        };
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("gateway attempt {} of {attempts} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(GatewayError::Transport { attempts, message: last })
    }

    fn call_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

//! Text-generation providers: the provider trait, request/transcript types,
//! and a blocking client for OpenAI-compatible chat-completion endpoints.
//!
//! [`ChatClient`] is the only code in the crate that opens network
//! connections; [`network_requests`] counts every HTTP request it sends.

mod extract;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use extract::{
    extract_code_block, extract_code_blocks, extract_tests, extract_verdict, ParseError, ParsedTests, TestPair, Verdict,
};

static NETWORK_REQUESTS: AtomicUsize = AtomicUsize::new(0);

/// Number of HTTP requests sent by any [`ChatClient`] in this process.
pub fn network_requests() -> usize {
    NETWORK_REQUESTS.load(Ordering::SeqCst)
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("authentication rejected ({status}): {body}")]
    Auth { status: u16, body: String },
    #[error("request rejected ({status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("environment variable {0} is not set")]
    MissingToken(String),
    #[error("provider setup failed: {0}")]
    Setup(String),
    #[error("mock provider has no response for template `{0}`")]
    NoMockResponse(String),
}

/// A rendered prompt plus the named values it was rendered from. Live
/// providers only look at `prompt`; the mock provider can use `vars`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub task: String,
    pub template: String,
    pub prompt: String,
    pub vars: BTreeMap<String, String>,
    pub temperature: f64,
}

impl PromptRequest {
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.template.as_bytes());
        h.update([0]);
        h.update(self.prompt.as_bytes());
        h.update([0]);
        h.update(self.temperature.to_bits().to_le_bytes());
        hex::encode(h.finalize())
    }
}

/// Verbatim record of one completion, kept for replay and the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionTranscript {
    pub task: String,
    pub template: String,
    pub request_digest: String,
    pub prompt: String,
    pub response: String,
    pub latency_ms: u64,
    pub retry_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub transcript: CompletionTranscript,
}

pub trait TextProvider: Send + Sync {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. When the
    /// variable is unset no Authorization header is sent.
    pub auth_env: String,
    pub require_auth: bool,
    pub temperature: f64,
    /// Per-task temperature overrides, keyed by task name.
    pub temperature_overrides: BTreeMap<String, f64>,
    pub max_retries: u32,
    pub request_timeout_secs: f64,
    pub backoff_initial_ms: u64,
    pub parallelism: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "gpt-5-mini".into(),
            auth_env: "OPENAI_API_KEY".into(),
            require_auth: false,
            temperature: 0.8,
            temperature_overrides: BTreeMap::from([("debug".into(), 0.2), ("edge_case_gen".into(), 0.2)]),
            max_retries: 3,
            request_timeout_secs: 120.0,
            backoff_initial_ms: 500,
            parallelism: 4,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), String> {
        let bad = |t: f64| t.is_nan() || t < 0.0;
        if bad(self.temperature) || self.temperature_overrides.values().any(|t| bad(*t)) {
            return Err("temperature must be non-negative".into());
        }
        if self.request_timeout_secs.is_nan() || self.request_timeout_secs <= 0.0 {
            return Err("request_timeout_secs must be positive".into());
        }
        Ok(())
    }

    pub fn temperature_for(&self, task: &str) -> f64 {
        self.temperature_overrides.get(task).copied().unwrap_or(self.temperature)
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
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: Option<String>,
}

/// Blocking client for `POST {base_url}/chat/completions`.
pub struct ChatClient {
    config: ProviderConfig,
    http: reqwest::blocking::Client,
    token: Option<String>,
}

impl ChatClient {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let token = std::env::var(&config.auth_env).ok().filter(|t| !t.is_empty());
        if config.require_auth && token.is_none() {
            return Err(ProviderError::MissingToken(config.auth_env.clone()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.request_timeout_secs))
            .build()
            .map_err(|e| ProviderError::Setup(e.to_string()))?;
        Ok(Self { config, http, token })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    /// Sends one prompt, retrying 429, 5xx and transport failures with
    /// exponential backoff. Returns the assistant text and the retry count.
    pub fn chat(&self, prompt: &str, temperature: f64) -> Result<(String, u32), ProviderError> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![ChatMessage { role: "user", content: prompt }],
            temperature,
        };
        let mut retries = 0u32;
        loop {
            let mut req = self.http.post(self.endpoint()).json(&body);
            if let Some(token) = &self.token {
                req = req.bearer_auth(token);
            }
            NETWORK_REQUESTS.fetch_add(1, Ordering::SeqCst);
            let failure = match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: ChatResponse = resp.json().map_err(|e| ProviderError::Malformed(e.to_string()))?;
                        let text = parsed
                            .choices
                            .into_iter()
                            .next()
                            .and_then(|c| c.message.content)
                            .ok_or_else(|| ProviderError::Malformed("no choices[0].message.content".into()))?;
                        return Ok((text, retries));
                    }
                    let code = status.as_u16();
                    let text = resp.text().unwrap_or_default();
                    if code == 401 || code == 403 {
                        return Err(ProviderError::Auth { status: code, body: text });
                    }
                    if code != 429 && !status.is_server_error() {
                        return Err(ProviderError::Rejected { status: code, body: text });
                    }
                    format!("HTTP {code}: {text}")
                }
                Err(e) => e.to_string(),
            };
            if retries >= self.config.max_retries {
                return Err(ProviderError::Exhausted { attempts: retries + 1, last: failure });
            }
            let delay = self.config.backoff_initial_ms.saturating_mul(1 << retries.min(16)).min(30_000);
            log::warn!("provider request failed ({failure}); retrying in {delay} ms");
            thread::sleep(Duration::from_millis(delay));
            retries += 1;
        }
    }
}

impl TextProvider for ChatClient {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, ProviderError> {
        let start = Instant::now();
        let (text, retry_count) = self.chat(&request.prompt, request.temperature)?;
        Ok(Completion {
            transcript: CompletionTranscript {
                task: request.task.clone(),
                template: request.template.clone(),
                request_digest: request.digest(),
                prompt: request.prompt.clone(),
                response: text.clone(),
                latency_ms: start.elapsed().as_millis() as u64,
                retry_count,
            },
            text,
        })
    }
}

//! Provider-agnostic LLM access with live, record and replay modes.
//!
//! Every call goes through [`LlmGateway::complete`]. In replay mode the
//! gateway only consults its [`FixtureStore`] and never touches a transport;
//! a missing fixture is a hard [`GatewayError::FixtureMiss`].

mod fixture;
mod http;
mod stub;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use fixture::{FixtureRecord, FixtureStore};
pub use http::HttpTransport;
pub use stub::StubTransport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Gemini,
    Chatgpt,
    Stub,
}

impl Provider {
    pub fn as_str(self) -> &'static str {
        match self {
            Provider::Gemini => "gemini",
            Provider::Chatgpt => "chatgpt",
            Provider::Stub => "stub",
        }
    }

    pub fn default_model(self) -> &'static str {
        match self {
            Provider::Gemini => "gemini-1.5-flash",
            Provider::Chatgpt => "gpt-4o-mini",
            Provider::Stub => "stub-v1",
        }
    }

    pub fn default_credential_env(self) -> &'static str {
        match self {
            Provider::Gemini => "GEMINI_API_KEY",
            Provider::Chatgpt => "OPENAI_API_KEY",
            Provider::Stub => "TESTPILOT_STUB_KEY",
        }
    }
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provider {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gemini" => Ok(Provider::Gemini),
            "chatgpt" | "openai" => Ok(Provider::Chatgpt),
            "stub" => Ok(Provider::Stub),
            other => Err(format!("unknown provider `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

impl FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(GatewayMode::Live),
            "record" => Ok(GatewayMode::Record),
            "replay" => Ok(GatewayMode::Replay),
            other => Err(format!("unknown gateway mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub provider: Provider,
    pub model: String,
    pub prompt: String,
    pub max_output: u32,
    pub temperature: f32,
}

impl LlmRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("prompt is empty".into()));
        }
        if self.max_output == 0 {
            return Err(GatewayError::InvalidRequest("max_output must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub request_key: String,
    pub response_text: String,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("{provider} request failed after {attempts} attempt(s): {message}")]
    ProviderError { provider: Provider, attempts: u32, message: String },
    #[error("no replay fixture for request key {key}")]
    FixtureMiss { key: String },
    #[error("invalid LLM request: {0}")]
    InvalidRequest(String),
    #[error("fixture store {path}: {message}")]
    FixtureStore { path: String, message: String },
}

/// Failure reported by a [`Transport`]. `retryable` marks transient errors
/// (timeouts, rate limits, 5xx).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError {
    pub message: String,
    pub retryable: bool,
}

impl TransportError {
    pub fn transient(message: impl Into<String>) -> Self {
        Self { message: message.into(), retryable: true }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self { message: message.into(), retryable: false }
    }
}

/// A way of reaching one provider.
pub trait Transport: Send + Sync {
    fn send(&self, request: &LlmRequest, timeout: Duration) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, initial_backoff: Duration::from_millis(500) }
    }
}

/// Default request parameters applied by [`LlmGateway::request`].
#[derive(Debug, Clone, PartialEq)]
pub struct RequestDefaults {
    pub provider: Provider,
    pub model: String,
    pub max_output: u32,
    pub temperature: f32,
}

impl RequestDefaults {
    pub fn for_provider(provider: Provider) -> Self {
        Self { provider, model: provider.default_model().to_string(), max_output: 8192, temperature: 0.2 }
    }
}

/// Normalizes a prompt for keying: CRLF and CR become LF, then the whole
/// prompt is trimmed.
pub fn normalize_prompt(prompt: &str) -> String {
    prompt.replace("\r\n", "\n").replace('\r', "\n").trim().to_string()
}

/// Stable fixture key: lowercase hex SHA-256 over
/// `"testpilot-fixture-v1\0" provider "\0" model "\0" normalized_prompt`.
///
/// Decoding parameters are not part of the key.
pub fn fixture_key(request: &LlmRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"testpilot-fixture-v1\0");
    hasher.update(request.provider.as_str().as_bytes());
    hasher.update(b"\0");
    hasher.update(request.model.as_bytes());
    hasher.update(b"\0");
    hasher.update(normalize_prompt(&request.prompt).as_bytes());
    hex::encode(hasher.finalize())
}

/// Shareable gateway handle.
pub struct LlmGateway {
    mode: GatewayMode,
    defaults: RequestDefaults,
    transports: HashMap<Provider, Arc<dyn Transport>>,
    store: Option<Arc<FixtureStore>>,
    retry: RetryPolicy,
    timeout: Duration,
}

impl fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmGateway")
            .field("mode", &self.mode)
            .field("defaults", &self.defaults)
            .field("providers", &self.transports.keys().collect::<Vec<_>>())
            .field("store", &self.store.as_ref().map(|s| s.path().to_path_buf()))
            .field("retry", &self.retry)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl LlmGateway {
    /// Gateway with the stub transport registered and no fixture store.
    pub fn new(mode: GatewayMode, defaults: RequestDefaults) -> Self {
        let mut transports: HashMap<Provider, Arc<dyn Transport>> = HashMap::new();
        transports.insert(Provider::Stub, Arc::new(StubTransport));
        Self {
            mode,
            defaults,
            transports,
            store: None,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
        }
    }

    /// Replay-only gateway over an existing store.
    pub fn replay(store: FixtureStore, defaults: RequestDefaults) -> Self {
        Self::new(GatewayMode::Replay, defaults).with_store(store)
    }

    pub fn with_store(mut self, store: FixtureStore) -> Self {
        self.store = Some(Arc::new(store));
        self
    }

    pub fn with_transport(mut self, provider: Provider, transport: Arc<dyn Transport>) -> Self {
        self.transports.insert(provider, transport);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    pub fn defaults(&self) -> &RequestDefaults {
        &self.defaults
    }

    pub fn store(&self) -> Option<&FixtureStore> {
        self.store.as_deref()
    }

    /// Builds a request for `prompt` from the gateway defaults.
    pub fn request(&self, prompt: impl Into<String>) -> LlmRequest {
        LlmRequest {
            provider: self.defaults.provider,
            model: self.defaults.model.clone(),
            prompt: prompt.into(),
            max_output: self.defaults.max_output,
            temperature: self.defaults.temperature,
        }
    }

    /// Convenience for `complete(&self.request(prompt))`.
    pub fn ask(&self, prompt: impl Into<String>) -> Result<LlmExchange, GatewayError> {
        self.complete(&self.request(prompt))
    }

    pub fn complete(&self, request: &LlmRequest) -> Result<LlmExchange, GatewayError> {
        request.validate()?;
        let key = fixture_key(request);
        match self.mode {
            GatewayMode::Replay => {
                let store = self.store.as_ref().ok_or_else(|| GatewayError::FixtureStore {
                    path: "<none>".into(),
                    message: "replay mode requires a fixture store".into(),
                })?;
                let record = store.get(&key).ok_or(GatewayError::FixtureMiss { key })?;
                Ok(LlmExchange {
                    request_key: record.request_key,
                    response_text: record.response_text,
                    latency_ms: record.latency_ms,
                })
            }
            GatewayMode::Live => self.call_provider(request, key),
            GatewayMode::Record => {
                let store = self.store.as_ref().ok_or_else(|| GatewayError::FixtureStore {
                    path: "<none>".into(),
                    message: "record mode requires a fixture store".into(),
                })?;
                let exchange = self.call_provider(request, key)?;
                store.append(FixtureRecord {
                    request_key: exchange.request_key.clone(),
                    provider: request.provider,
                    model: request.model.clone(),
                    prompt: request.prompt.clone(),
                    response_text: exchange.response_text.clone(),
                    latency_ms: exchange.latency_ms,
                })?;
                Ok(exchange)
            }
        }
    }

    fn call_provider(&self, request: &LlmRequest, key: String) -> Result<LlmExchange, GatewayError> {
        let transport = self.transports.get(&request.provider).ok_or_else(|| GatewayError::ProviderError {
            provider: request.provider,
            attempts: 0,
            message: "no transport configured for provider".into(),
        })?;
        let attempts_allowed = self.retry.max_attempts.max(1);
        let mut backoff = self.retry.initial_backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let started = Instant::now();
            match transport.send(request, self.timeout) {
                Ok(text) => {
                    return Ok(LlmExchange {
                        request_key: key,
                        response_text: text,
                        latency_ms: started.elapsed().as_millis() as u64,
                    })
                }
                Err(err) if err.retryable && attempt < attempts_allowed => {
                    tracing::warn!(provider = %request.provider, attempt, "transient LLM failure: {}", err.message);
                    std::thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                }
                Err(err) => {
                    return Err(GatewayError::ProviderError {
                        provider: request.provider,
                        attempts: attempt,
                        message: err.message,
                    })
                }
            }
        }
    }
}

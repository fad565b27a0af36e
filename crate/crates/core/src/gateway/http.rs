//! HTTPS transports for hosted providers. Credentials are read from the
//! configured environment variable at call time and never stored.

use std::time::Duration;

use serde_json::{json, Value};

use super::{LlmRequest, Provider, Transport, TransportError};

#[derive(Debug, Clone)]
pub struct HttpTransport {
    provider: Provider,
    credential_env: String,
    base_url: String,
}

impl HttpTransport {
    pub fn new(provider: Provider, credential_env: impl Into<String>) -> Self {
        let base_url = match provider {
            Provider::Gemini => "https://generativelanguage.googleapis.com/v1beta",
            Provider::Chatgpt | Provider::Stub => "https://api.openai.com/v1",
        };
        Self { provider, credential_env: credential_env.into(), base_url: base_url.to_string() }
    }

    pub fn with_base_url(mut self, base_url: impl Into<String>) -> Self {
        self.base_url = base_url.into();
        self
    }

    fn credential(&self) -> Result<String, TransportError> {
        std::env::var(&self.credential_env)
            .ok()
            .filter(|v| !v.is_empty())
            .ok_or_else(|| TransportError::fatal(format!("environment variable {} is not set", self.credential_env)))
    }
}

fn classify(status: reqwest::StatusCode, body: &str) -> TransportError {
    let snippet: String = body.chars().take(300).collect();
    let message = format!("HTTP {status}: {snippet}");
    if status.as_u16() == 429 || status.is_server_error() {
        TransportError::transient(message)
    } else {
        TransportError::fatal(message)
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &LlmRequest, timeout: Duration) -> Result<String, TransportError> {
        let key = self.credential()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::fatal(e.to_string()))?;
        let builder = match self.provider {
            Provider::Gemini => client
                .post(format!("{}/models/{}:generateContent", self.base_url, request.model))
                .header("x-goog-api-key", key)
                .json(&json!({
                    "contents": [{ "role": "user", "parts": [{ "text": request.prompt }] }],
                    "generationConfig": {
                        "temperature": request.temperature,
                        "maxOutputTokens": request.max_output,
                    }
                })),
            Provider::Chatgpt | Provider::Stub => {
                client.post(format!("{}/chat/completions", self.base_url)).bearer_auth(key).json(&json!({
                    "model": request.model,
                    "messages": [{ "role": "user", "content": request.prompt }],
                    "temperature": request.temperature,
                    "max_tokens": request.max_output,
                }))
            }
        };
        let response = builder.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() {
                TransportError::transient(e.to_string())
            } else {
                TransportError::fatal(e.to_string())
            }
        })?;
        let status = response.status();
        let body = response.text().map_err(|e| TransportError::transient(e.to_string()))?;
        if !status.is_success() {
            return Err(classify(status, &body));
        }
        let value: Value = serde_json::from_str(&body).map_err(|e| TransportError::fatal(e.to_string()))?;
        extract_text(self.provider, &value)
            .ok_or_else(|| TransportError::fatal("response carried no text candidate".to_string()))
    }
}

fn extract_text(provider: Provider, value: &Value) -> Option<String> {
    match provider {
        Provider::Gemini => {
            let parts = value.pointer("/candidates/0/content/parts")?.as_array()?;
            let text: String = parts.iter().filter_map(|p| p.get("text")?.as_str()).collect();
            Some(text)
        }
        Provider::Chatgpt | Provider::Stub => value.pointer("/choices/0/message/content")?.as_str().map(str::to_string),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_provider_payloads() {
        let gemini = json!({"candidates": [{"content": {"parts": [{"text": "a"}, {"text": "b"}]}}]});
        assert_eq!(extract_text(Provider::Gemini, &gemini).as_deref(), Some("ab"));
        let openai = json!({"choices": [{"message": {"content": "hello"}}]});
        assert_eq!(extract_text(Provider::Chatgpt, &openai).as_deref(), Some("hello"));
        assert_eq!(extract_text(Provider::Chatgpt, &json!({})), None);
    }

    #[test]
    fn missing_credential_is_fatal_and_names_the_variable() {
        let t = HttpTransport::new(Provider::Gemini, "TESTPILOT_TEST_SURELY_UNSET_VAR");
        let req = LlmRequest {
            provider: Provider::Gemini,
            model: "m".into(),
            prompt: "p".into(),
            max_output: 1,
            temperature: 0.0,
        };
        let err = t.send(&req, Duration::from_secs(1)).unwrap_err();
        assert!(!err.retryable);
        assert!(err.message.contains("TESTPILOT_TEST_SURELY_UNSET_VAR"));
    }

    #[test]
    fn rate_limits_and_server_errors_are_transient() {
        assert!(classify(reqwest::StatusCode::TOO_MANY_REQUESTS, "").retryable);
        assert!(classify(reqwest::StatusCode::BAD_GATEWAY, "").retryable);
        assert!(!classify(reqwest::StatusCode::UNAUTHORIZED, "").retryable);
    }
}

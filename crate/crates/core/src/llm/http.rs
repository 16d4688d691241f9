use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{Backend, BackendError, Query};
use super::LlmError;

pub const API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    /// Full URL of a chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub deadline_secs: f64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            temperature: 0.0,
            deadline_secs: 10.0,
        }
    }
}

/// Single-message chat completion over HTTP.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl HttpBackend {
    /// Reads the API key from `LLM_API_KEY`; without it no `Authorization`
    /// header is sent.
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        Self::with_api_key(config, std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_api_key(config: HttpConfig, api_key: Option<String>) -> Result<Self, LlmError> {
        if !(config.deadline_secs > 0.0) {
            return Err(LlmError::Config("deadline_secs must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.deadline_secs))
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        Ok(HttpBackend { config, api_key, client })
    }

    pub fn request_body(&self, prompt: &str) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{ "role": "user", "content": prompt }],
        })
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, q: &Query) -> Result<String, BackendError> {
        let mut req = self.client.post(&self.config.endpoint).json(&self.request_body(&q.prompt));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Status(status.as_u16()));
        }
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let parsed: CompletionResponse = serde_json::from_str(&body).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))
    }
}

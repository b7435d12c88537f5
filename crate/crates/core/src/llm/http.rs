//! OpenAI-compatible chat-completions backend.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, GenerationSettings, LlmBackend};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpBackendConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth.
    pub token_env: String,
    pub timeout_secs: u64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            token_env: "FINAGENT_LLM_TOKEN".into(),
            timeout_secs: 120,
        }
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// Reads the token from the configured environment variable.
    pub fn new(config: HttpBackendConfig) -> Self {
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        Self::with_token(config, token)
    }

    pub fn with_token(config: HttpBackendConfig, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, token, agent }
    }

    fn request_body(&self, prompt: &str, settings: &GenerationSettings) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": settings.max_tokens,
        });
        if let Some(t) = settings.temperature {
            body["temperature"] = json!(t);
        }
        for (k, v) in &settings.extra {
            body[k] = v.clone();
        }
        body
    }
}

fn transport(e: ureq::Error) -> BackendError {
    let retriable = matches!(
        e,
        ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed
    );
    BackendError::Transport {
        reason: e.to_string(),
        retriable,
    }
}

impl LlmBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, prompt: &str, settings: &GenerationSettings) -> Result<String, BackendError> {
        let body = self.request_body(prompt, settings).to_string();
        let mut request = self
            .agent
            .post(&self.config.endpoint)
            .header("content-type", "application/json");
        if let Some(token) = &self.token {
            request = request.header("authorization", format!("Bearer {token}"));
        }
        let mut response = request.send(&body).map_err(transport)?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(transport)?;
        if status == 429 || status >= 500 {
            return Err(BackendError::Transport {
                reason: format!("HTTP {status}"),
                retriable: true,
            });
        }
        if status >= 400 {
            return Err(BackendError::Transport {
                reason: format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
                retriable: false,
            });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| BackendError::Response(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Response("missing choices[0].message.content".into()))
    }
}

//! Backend-agnostic LLM access: templates, token budgeting, envelope
//! parsing and the backends themselves.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod http;
pub mod parse;
mod scripted;
pub mod template;
mod tokens;

pub use http::{HttpBackend, HttpBackendConfig};
pub use parse::{
    action_envelope, meta_envelope, parse_action, parse_agent_meta, parse_reflexion, reflexion_envelope, ParseFailure,
    ACTION_GRAMMAR, META_GRAMMAR, REFLEXION_GRAMMAR,
};
pub use scripted::{prompt_sha256, write_transcript, ScriptedBackend, TranscriptError, TranscriptRecord};
pub use template::{render_prompt, Prompt, PromptSet, PromptTemplate, Slot, SlotBindings, TemplateError};
pub use tokens::estimate_tokens;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport error: {reason}")]
    Transport { reason: String, retriable: bool },
    #[error("transcript exhausted after {calls} calls")]
    TranscriptExhausted { calls: usize },
    #[error("prompt hash mismatch at call {ordinal}: expected {expected}, got {found}")]
    PromptMismatch {
        ordinal: usize,
        expected: String,
        found: String,
    },
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("malformed backend response: {0}")]
    Response(String),
}

impl BackendError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::Transport { retriable: true, .. })
    }
}

/// Per-call decoding settings handed to the backend.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GenerationSettings {
    pub max_tokens: usize,
    pub temperature: Option<f64>,
    /// Passed through to the backend untouched.
    pub extra: BTreeMap<String, serde_json::Value>,
}

pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, prompt: &str, settings: &GenerationSettings) -> Result<String, BackendError>;

    /// Exact token count, when the backend has a tokenizer.
    fn count_tokens(&self, _text: &str) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// Maximum prompt size in tokens.
    pub context_budget: usize,
    /// Maximum generation size in tokens.
    pub output_budget: usize,
    pub temperature: Option<f64>,
    pub extra: BTreeMap<String, serde_json::Value>,
    /// Extra attempts after a retriable transport error.
    pub max_transport_retries: u32,
    pub retry_backoff_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            context_budget: 8192,
            output_budget: 2048,
            temperature: None,
            extra: BTreeMap::new(),
            max_transport_retries: 2,
            retry_backoff_ms: 250,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.context_budget == 0 || self.output_budget == 0 {
            return Err("llm budgets must be positive".into());
        }
        Ok(())
    }

    pub fn settings(&self) -> GenerationSettings {
        GenerationSettings {
            max_tokens: self.output_budget,
            temperature: self.temperature,
            extra: self.extra.clone(),
        }
    }
}

/// Token count for `text`: the backend's tokenizer if any, else the estimate.
pub fn count_tokens(backend: &dyn LlmBackend, text: &str) -> usize {
    backend.count_tokens(text).unwrap_or_else(|| estimate_tokens(text))
}

/// One LLM call. Retriable transport errors are retried up to
/// `max_transport_retries` times; the whole exchange counts as one call.
pub fn complete(
    backend: &dyn LlmBackend,
    config: &LlmConfig,
    prompt: &str,
    calls: &mut u32,
) -> Result<String, BackendError> {
    *calls += 1;
    let settings = config.settings();
    let mut attempt = 0;
    loop {
        match backend.complete(prompt, &settings) {
            Err(e) if e.is_retriable() && attempt < config.max_transport_retries => {
                attempt += 1;
                std::thread::sleep(Duration::from_millis(config.retry_backoff_ms * u64::from(attempt)));
            }
            other => return other,
        }
    }
}

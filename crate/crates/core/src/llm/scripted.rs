//! Replays a fixed transcript, one record per call.
//!
//! Transcript file: JSON lines `{"response": "..", "prompt_sha256": ".."}`.
//! The hash is optional; in strict mode a present hash must match the
//! SHA-256 of the prompt actually sent.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{BackendError, GenerationSettings, LlmBackend};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("transcript line {line}: {reason}")]
pub struct TranscriptError {
    pub line: usize,
    pub reason: String,
}

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug)]
pub struct ScriptedBackend {
    records: Vec<TranscriptRecord>,
    next: AtomicUsize,
    strict: bool,
}

impl ScriptedBackend {
    pub fn new(records: Vec<TranscriptRecord>) -> Self {
        Self {
            records,
            next: AtomicUsize::new(0),
            strict: false,
        }
    }

    pub fn from_responses<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            responses
                .into_iter()
                .map(|r| TranscriptRecord {
                    response: r.into(),
                    prompt_sha256: None,
                })
                .collect(),
        )
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TranscriptError> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| TranscriptError {
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self::new(records))
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Calls made so far.
    pub fn calls(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }
}

pub fn write_transcript(records: &[TranscriptRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("transcript record serializes") + "\n")
        .collect()
}

impl LlmBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, prompt: &str, _: &GenerationSettings) -> Result<String, BackendError> {
        let ordinal = self.next.fetch_add(1, Ordering::SeqCst);
        let record = self
            .records
            .get(ordinal)
            .ok_or(BackendError::TranscriptExhausted { calls: self.records.len() })?;
        if self.strict {
            if let Some(expected) = &record.prompt_sha256 {
                let found = prompt_sha256(prompt);
                if &found != expected {
                    return Err(BackendError::PromptMismatch {
                        ordinal: ordinal + 1,
                        expected: expected.clone(),
                        found,
                    });
                }
            }
        }
        Ok(record.response.clone())
    }
}

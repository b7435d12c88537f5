//! Hybrid tool search: LLM-chosen category, embedding recall capped at M
//! for large categories, plus retrieval scoring.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::LookupError;

pub mod bench;
mod embed;
mod index;
mod score;
mod select;

pub use embed::{tokenize, EmbedError, Embedder, HashEmbedder};
pub use index::{cosine, cosine_topk, cosine_topk_filtered, index_catalog, IndexEntry, Scored, VectorIndex};
pub use score::{score_retrieval, RetrievalScore};
pub use select::{select_candidates, Candidates, SelectionPath};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("vector dimension mismatch: index has {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("embedding `{tool}` failed: {reason}")]
    Embed { tool: String, reason: String },
    #[error(transparent)]
    Lookup(#[from] LookupError),
    #[error("no gold set for query `{0}`")]
    MissingGold(String),
    #[error("gold set for query `{0}` is empty")]
    EmptyGold(String),
    #[error("no results for query `{0}`")]
    MissingResults(String),
    #[error("invalid search config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Candidate cap for embedding recall.
    pub m: usize,
    /// Categories with at most this many tools are listed whole.
    pub direct_threshold: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            m: 10,
            direct_threshold: 64,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.m == 0 {
            return Err(SearchError::Config("m must be at least 1".into()));
        }
        if self.direct_threshold < self.m {
            return Err(SearchError::Config(format!(
                "direct_threshold ({}) must be at least m ({})",
                self.direct_threshold, self.m
            )));
        }
        Ok(())
    }
}

//! Pluggable web search behind the `web-search` action.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchHit {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

pub trait WebSearchProvider: Send + Sync {
    fn name(&self) -> &str;

    fn search(&self, query: &str) -> Result<Vec<SearchHit>, String>;
}

/// Fixed results keyed by exact query text; unknown queries return no hits.
///
/// File format: a JSON object mapping query text to a list of hits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CannedSearch {
    results: BTreeMap<String, Vec<SearchHit>>,
}

impl CannedSearch {
    pub fn new(results: BTreeMap<String, Vec<SearchHit>>) -> Self {
        Self { results }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }
}

impl WebSearchProvider for CannedSearch {
    fn name(&self) -> &str {
        "canned"
    }

    fn search(&self, query: &str) -> Result<Vec<SearchHit>, String> {
        Ok(self.results.get(query).cloned().unwrap_or_default())
    }
}

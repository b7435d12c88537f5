use crate::catalog::Catalog;

use super::embed::Embedder;
use super::index::{cosine_topk_filtered, VectorIndex};
use super::{SearchConfig, SearchError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionPath {
    /// The whole category fits under the direct threshold.
    Direct,
    /// Category-filtered embedding recall capped at M.
    Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    pub category: String,
    pub path: SelectionPath,
    pub category_size: usize,
    pub names: Vec<String>,
}

/// Candidate tools for an `api-select` request.
pub fn select_candidates(
    catalog: &Catalog,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    config: &SearchConfig,
    category: &str,
    task: &str,
) -> Result<Candidates, SearchError> {
    let members = catalog.list_category(category)?;
    if members.len() <= config.direct_threshold {
        return Ok(Candidates {
            category: category.to_string(),
            path: SelectionPath::Direct,
            category_size: members.len(),
            names: members.to_vec(),
        });
    }
    let query = embedder.embed(task).map_err(|e| SearchError::Embed {
        tool: "<task description>".to_string(),
        reason: e.0,
    })?;
    let top = cosine_topk_filtered(index, &query, config.m, |e| e.category == category)?;
    Ok(Candidates {
        category: category.to_string(),
        path: SelectionPath::Embedding,
        category_size: members.len(),
        names: top.into_iter().map(|s| s.name).collect(),
    })
}

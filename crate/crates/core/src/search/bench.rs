//! Retrieval benchmark behind the `search-eval` command.
//!
//! Query file: JSON lines `{"id": .., "category": .., "task": .., "gold": [..]}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;

use super::{cosine_topk, cosine_topk_filtered, score_retrieval, Embedder, RetrievalScore, SearchError, VectorIndex};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchQuery {
    pub id: String,
    pub category: String,
    pub task: String,
    pub gold: Vec<String>,
}

pub fn parse_bench_queries(text: &str) -> Result<Vec<BenchQuery>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub fn write_bench_queries(queries: &[BenchQuery]) -> String {
    queries
        .iter()
        .map(|q| serde_json::to_string(q).expect("bench query serializes") + "\n")
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Embedding recall over every specific tool, ignoring categories.
    Embedding,
    /// The chosen category's list in lexicographic order.
    CategoryList,
    /// Embedding recall restricted to the chosen category.
    CategoryEmbedding,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Embedding, Method::CategoryList, Method::CategoryEmbedding];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Embedding => "embedding",
            Method::CategoryList => "category-list",
            Method::CategoryEmbedding => "category+embedding",
        })
    }
}

/// Ranks up to `depth` tool names for `query` using `method`.
pub fn rank(
    method: Method,
    catalog: &Catalog,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    query: &BenchQuery,
    depth: usize,
) -> Result<Vec<String>, SearchError> {
    let embed = |text: &str| {
        embedder.embed(text).map_err(|e| SearchError::Embed {
            tool: format!("<query {}>", query.id),
            reason: e.0,
        })
    };
    let names = match method {
        Method::Embedding => cosine_topk(index, &embed(&query.task)?, depth)?
            .into_iter()
            .map(|s| s.name)
            .collect(),
        Method::CategoryList => catalog
            .list_category(&query.category)?
            .iter()
            .take(depth)
            .cloned()
            .collect(),
        Method::CategoryEmbedding => {
            catalog.list_category(&query.category)?;
            cosine_topk_filtered(index, &embed(&query.task)?, depth, |e| e.category == query.category)?
                .into_iter()
                .map(|s| s.name)
                .collect()
        }
    };
    Ok(names)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodScores {
    pub method: Method,
    /// One score per requested cutoff, in order.
    pub scores: Vec<RetrievalScore>,
}

pub fn evaluate(
    catalog: &Catalog,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    queries: &[BenchQuery],
    cutoffs: &[usize],
) -> Result<Vec<MethodScores>, SearchError> {
    let depth = cutoffs.iter().copied().max().unwrap_or(0);
    if depth == 0 {
        return Err(SearchError::InvalidK);
    }
    let gold: BTreeMap<String, BTreeSet<String>> = queries
        .iter()
        .map(|q| (q.id.clone(), q.gold.iter().cloned().collect()))
        .collect();
    Method::ALL
        .into_iter()
        .map(|method| {
            let results = queries
                .iter()
                .map(|q| Ok((q.id.clone(), rank(method, catalog, index, embedder, q, depth)?)))
                .collect::<Result<BTreeMap<_, _>, SearchError>>()?;
            let scores = cutoffs
                .iter()
                .map(|&k| score_retrieval(&results, &gold, k))
                .collect::<Result<_, _>>()?;
            Ok(MethodScores { method, scores })
        })
        .collect()
}

/// Method × cutoff × {all right, all wrong} grid.
pub fn render_grid(rows: &[MethodScores]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let _ = write!(out, "{:<20}", "Method");
    for s in &first.scores {
        let _ = write!(out, " | {:^21}", format!("Top{}", s.k));
    }
    out.push('\n');
    let _ = write!(out, "{:<20}", "");
    for _ in &first.scores {
        let _ = write!(out, " | {:>10} {:>10}", "all right", "all wrong");
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:<20}", row.method.to_string());
        for s in &row.scores {
            let _ = write!(out, " | {:>10.2} {:>10.2}", s.all_right_rate, s.all_wrong_rate);
        }
        out.push('\n');
    }
    out
}

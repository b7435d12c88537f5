use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SearchError;

/// Per-query outcome rates within the top `k` retrieved names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalScore {
    pub k: usize,
    pub n_queries: usize,
    /// Percentage of queries whose every gold tool appears in the top k.
    pub all_right_rate: f64,
    /// Percentage of queries with no gold tool in the top k.
    pub all_wrong_rate: f64,
}

/// Scores ranked results against gold sets.
///
/// A query with some but not all gold tools in its top `k` counts toward
/// neither rate.
pub fn score_retrieval(
    results: &BTreeMap<String, Vec<String>>,
    gold: &BTreeMap<String, BTreeSet<String>>,
    k: usize,
) -> Result<RetrievalScore, SearchError> {
    if k == 0 {
        return Err(SearchError::InvalidK);
    }
    if let Some(id) = gold.keys().find(|id| !results.contains_key(*id)) {
        return Err(SearchError::MissingResults(id.clone()));
    }
    let mut all_right = 0usize;
    let mut all_wrong = 0usize;
    for (id, ranked) in results {
        let gold_set = gold
            .get(id)
            .ok_or_else(|| SearchError::MissingGold(id.clone()))?;
        if gold_set.is_empty() {
            return Err(SearchError::EmptyGold(id.clone()));
        }
        let top: BTreeSet<&str> = ranked.iter().take(k).map(String::as_str).collect();
        let hits = gold_set.iter().filter(|g| top.contains(g.as_str())).count();
        if hits == gold_set.len() {
            all_right += 1;
        } else if hits == 0 {
            all_wrong += 1;
        }
    }
    let n = results.len();
    let rate = |count: usize| if n == 0 { 0.0 } else { 100.0 * count as f64 / n as f64 };
    Ok(RetrievalScore {
        k,
        n_queries: n,
        all_right_rate: rate(all_right),
        all_wrong_rate: rate(all_wrong),
    })
}

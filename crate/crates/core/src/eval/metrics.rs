//! End-to-end metrics: Best, Helpful, Robust, Freq-Tool and Freq-LLM.
//!
//! Score file: CSV with header `query_id,rater_id,score`, scores 0 to 3.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{InterruptCause, Trajectory};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpfulnessScore {
    pub query_id: String,
    pub rater_id: String,
    pub score: u8,
}

pub fn parse_scores(text: &str) -> Result<Vec<HelpfulnessScore>, EvalError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<HelpfulnessScore>().enumerate() {
        let line = i + 2;
        let score = row.map_err(|e| EvalError::ScoreFormat {
            line,
            reason: e.to_string(),
        })?;
        if score.score > 3 {
            return Err(EvalError::ScoreFormat {
                line,
                reason: format!("score {} outside 0..=3", score.score),
            });
        }
        out.push(score);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_runs: usize,
    /// Percent of runs whose mean score rounds to 3.
    pub best_rate: f64,
    /// Mean per-run score, interrupted runs counted as 0.
    pub helpful: f64,
    /// Percent of runs that finished.
    pub robust: f64,
    pub freq_tool: f64,
    pub freq_llm: f64,
    pub interrupt_breakdown: BTreeMap<InterruptCause, usize>,
}

/// The "Best" rule: a mean score counts as best when it rounds to 3.
pub fn best_from_mean(mean: f64) -> bool {
    mean >= 2.5
}

pub fn compute_metrics(runs: &[Trajectory], scores: &[HelpfulnessScore]) -> Result<MetricsReport, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let mut ids = BTreeSet::new();
    for t in runs {
        if !ids.insert(t.query.id.as_str()) {
            return Err(EvalError::DuplicateRun(t.query.id.clone()));
        }
    }
    let mut by_query: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
    for s in scores {
        if !ids.contains(s.query_id.as_str()) {
            return Err(EvalError::OrphanScore(s.query_id.clone()));
        }
        by_query.entry(&s.query_id).or_default().push(s.score);
    }

    let n = runs.len() as f64;
    let mut helpful_sum = 0.0;
    let mut best = 0usize;
    let mut finished = 0usize;
    let mut breakdown: BTreeMap<InterruptCause, usize> = InterruptCause::ALL.into_iter().map(|c| (c, 0)).collect();
    for t in runs {
        let mean = match t.status.cause() {
            Some(cause) => {
                *breakdown.entry(cause).or_default() += 1;
                0.0
            }
            None => {
                finished += 1;
                let s = by_query
                    .get(t.query.id.as_str())
                    .ok_or_else(|| EvalError::MissingScore(t.query.id.clone()))?;
                s.iter().map(|&v| f64::from(v)).sum::<f64>() / s.len() as f64
            }
        };
        helpful_sum += mean;
        best += usize::from(best_from_mean(mean));
    }
    Ok(MetricsReport {
        n_runs: runs.len(),
        best_rate: 100.0 * best as f64 / n,
        helpful: helpful_sum / n,
        robust: 100.0 * finished as f64 / n,
        freq_tool: runs.iter().map(|t| f64::from(t.tool_calls())).sum::<f64>() / n,
        freq_llm: runs.iter().map(|t| f64::from(t.llm_calls())).sum::<f64>() / n,
        interrupt_breakdown: breakdown,
    })
}

/// Text table: the five headline columns, then the interrupt breakdown.
pub fn render_report(r: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>6} {:>8} {:>8} {:>8} {:>10} {:>9}",
        "Runs", "Best", "Helpful", "Robust", "Freq-Tool", "Freq-LLM"
    );
    let _ = writeln!(
        out,
        "{:>6} {:>8.2} {:>8.2} {:>8.2} {:>10.2} {:>9.2}",
        r.n_runs, r.best_rate, r.helpful, r.robust, r.freq_tool, r.freq_llm
    );
    out.push_str("Interrupts:\n");
    for (cause, count) in &r.interrupt_breakdown {
        let _ = writeln!(out, "  {:<22} {count}", cause.as_str());
    }
    out
}

pub fn report_csv(r: &MetricsReport) -> String {
    let mut out = String::from("runs,best,helpful,robust,freq_tool,freq_llm");
    for cause in r.interrupt_breakdown.keys() {
        let _ = write!(out, ",{}", cause.as_str());
    }
    let _ = write!(
        out,
        "\n{},{},{},{},{},{}",
        r.n_runs, r.best_rate, r.helpful, r.robust, r.freq_tool, r.freq_llm
    );
    for count in r.interrupt_breakdown.values() {
        let _ = write!(out, ",{count}");
    }
    out.push('\n');
    out
}

//! Metrics over trajectory logs, fine-tuning dataset export and the
//! dataset split.

use thiserror::Error;

mod accuracy;
mod metrics;
mod sft;
mod split;

pub use accuracy::{parse_labeled_outputs, render_accuracy, score_task_accuracy, LabeledOutput, TaskAccuracy};
pub use metrics::{
    best_from_mean, compute_metrics, parse_scores, render_report, report_csv, HelpfulnessScore, MetricsReport,
};
pub use sft::{export_sft, export_sft_logs, SftExport, SftRecord, SFT_VERSION};
pub use split::{split_dataset, split_sizes, Split};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("score file line {line}: {reason}")]
    ScoreFormat { line: usize, reason: String },
    #[error("score references unknown run `{0}`")]
    OrphanScore(String),
    #[error("finished run `{0}` has no score")]
    MissingScore(String),
    #[error("duplicate run id `{0}`")]
    DuplicateRun(String),
    #[error("no runs to evaluate")]
    NoRuns,
    #[error("too few for 8:1:1 (need at least 10 unique questions, got {0})")]
    TooFewForSplit(usize),
    #[error("record `{0}` has no label")]
    Unlabeled(String),
    #[error("labeled output line {line}: {reason}")]
    LabelFormat { line: usize, reason: String },
    #[error("sandbox: {0}")]
    Sandbox(String),
}

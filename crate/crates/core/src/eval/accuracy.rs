//! Per-task accuracy from labeled model outputs.
//!
//! Input: JSON lines
//! `{"id": .., "task": "plan|action|code|summary", "correct": true}`.
//! A code record may instead carry `"code"` and optionally
//! `"expected_output"`; it is then run in the sandbox and passes when it
//! exits cleanly and its stdout matches the expectation (trailing
//! whitespace ignored). Precomputed `"exit_ok"` and `"stdout"` fields are
//! accepted in place of running the code.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::TaskKind;
use crate::sandbox::{execute, SandboxConfig};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledOutput {
    pub id: String,
    pub task: String,
    #[serde(default)]
    pub correct: Option<bool>,
    #[serde(default)]
    pub code: Option<String>,
    #[serde(default)]
    pub expected_output: Option<String>,
    #[serde(default)]
    pub exit_ok: Option<bool>,
    #[serde(default)]
    pub stdout: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAccuracy {
    pub task: TaskKind,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Code only: records judged by execution, and how many passed.
    pub sandbox_runs: usize,
    pub sandbox_passed: usize,
}

impl TaskAccuracy {
    pub fn sandbox_pass_rate(&self) -> Option<f64> {
        (self.sandbox_runs > 0).then(|| 100.0 * self.sandbox_passed as f64 / self.sandbox_runs as f64)
    }
}

fn task_from_short_name(s: &str) -> Option<TaskKind> {
    TaskKind::ALL.into_iter().find(|t| t.short_name() == s)
}

pub fn parse_labeled_outputs(text: &str) -> Result<Vec<LabeledOutput>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let record: LabeledOutput = serde_json::from_str(l).map_err(|e| EvalError::LabelFormat {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if task_from_short_name(&record.task).is_none() {
                return Err(EvalError::LabelFormat {
                    line: i + 1,
                    reason: format!("unknown task `{}`", record.task),
                });
            }
            Ok(record)
        })
        .collect()
}

fn matches_expected(stdout: &str, expected: Option<&str>) -> bool {
    expected.is_none_or(|e| stdout.trim_end() == e.trim_end())
}

/// Execution verdict for a code record, if it carries anything to judge.
fn sandbox_verdict(r: &LabeledOutput, sandbox: Option<&SandboxConfig>) -> Result<Option<bool>, EvalError> {
    if let (Some(exit_ok), Some(stdout)) = (r.exit_ok, &r.stdout) {
        return Ok(Some(exit_ok && matches_expected(stdout, r.expected_output.as_deref())));
    }
    if let Some(exit_ok) = r.exit_ok {
        return Ok(Some(exit_ok && r.expected_output.is_none()));
    }
    match (&r.code, sandbox) {
        (Some(code), Some(config)) => {
            let result = execute(code, config).map_err(|e| EvalError::Sandbox(e.to_string()))?;
            Ok(Some(result.exit_ok && matches_expected(&result.stdout, r.expected_output.as_deref())))
        }
        _ => Ok(None),
    }
}

/// Accuracy per task, in task order. Code records judged by execution use
/// that verdict; all others need an explicit label.
pub fn score_task_accuracy(
    records: &[LabeledOutput],
    sandbox: Option<&SandboxConfig>,
) -> Result<Vec<TaskAccuracy>, EvalError> {
    let mut rows: BTreeMap<TaskKind, TaskAccuracy> = BTreeMap::new();
    for r in records {
        let task = task_from_short_name(&r.task).ok_or_else(|| EvalError::LabelFormat {
            line: 0,
            reason: format!("unknown task `{}`", r.task),
        })?;
        let row = rows.entry(task).or_insert(TaskAccuracy {
            task,
            n: 0,
            correct: 0,
            accuracy: 0.0,
            sandbox_runs: 0,
            sandbox_passed: 0,
        });
        let verdict = if task == TaskKind::CodeWriting {
            sandbox_verdict(r, sandbox)?
        } else {
            None
        };
        let ok = match (verdict, r.correct) {
            (Some(pass), _) => {
                row.sandbox_runs += 1;
                row.sandbox_passed += usize::from(pass);
                pass
            }
            (None, Some(label)) => label,
            (None, None) => return Err(EvalError::Unlabeled(r.id.clone())),
        };
        row.n += 1;
        row.correct += usize::from(ok);
    }
    Ok(rows
        .into_values()
        .map(|mut row| {
            row.accuracy = 100.0 * row.correct as f64 / row.n as f64;
            row
        })
        .collect())
}

pub fn render_accuracy(rows: &[TaskAccuracy]) -> String {
    let mut out = format!("{:<8} {:>6} {:>8} {:>10}\n", "Task", "N", "Accuracy", "Sandbox");
    for r in rows {
        let sandbox = r.sandbox_pass_rate().map_or("-".to_string(), |p| format!("{p:.2}"));
        let _ = writeln!(out, "{:<8} {:>6} {:>8.2} {:>10}", r.task.short_name(), r.n, r.accuracy, sandbox);
    }
    out
}

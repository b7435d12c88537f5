//! Fine-tuning datasets from trajectories, one per LLM sub-task.
//!
//! Each file is JSON lines: a header `{"header": {"task": .., "version": "v1"}}`
//! followed by one record per adopted turn. Meta turns go to `plan`,
//! reflexion turns to `summary`, and action turns to `code` when the adopted
//! request is `code-exec` and to `action` otherwise. Rejected turns are
//! never exported.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::llm::parse_action;
use crate::model::log::decode_trajectory;
use crate::model::{ActionKind, TaskKind, Trajectory};

pub const SFT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub task: TaskKind,
    pub prompt: String,
    pub target: String,
    pub run_id: String,
    /// 0 for agent meta.
    pub step_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SftExport {
    pub records: BTreeMap<TaskKind, Vec<SftRecord>>,
    /// Inputs that could not be decoded, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl SftExport {
    pub fn count(&self, task: TaskKind) -> usize {
        self.records.get(&task).map_or(0, Vec::len)
    }

    /// File name and contents for each of the four tasks.
    pub fn files(&self) -> Vec<(String, String)> {
        TaskKind::ALL
            .into_iter()
            .map(|task| {
                let mut text = json!({"header": {"task": task.short_name(), "version": SFT_VERSION}}).to_string();
                text.push('\n');
                for r in self.records.get(&task).into_iter().flatten() {
                    text.push_str(&serde_json::to_string(r).expect("sft records serialize"));
                    text.push('\n');
                }
                (format!("{}.jsonl", task.short_name()), text)
            })
            .collect()
    }
}

fn route(task: TaskKind, response: &str) -> TaskKind {
    match task {
        TaskKind::ActionTaking | TaskKind::CodeWriting => match parse_action(response) {
            Ok(r) if r.kind() == ActionKind::CodeExec => TaskKind::CodeWriting,
            _ => TaskKind::ActionTaking,
        },
        other => other,
    }
}

pub fn export_sft(runs: &[Trajectory]) -> SftExport {
    let mut records: BTreeMap<TaskKind, Vec<SftRecord>> = TaskKind::ALL.into_iter().map(|t| (t, Vec::new())).collect();
    for t in runs {
        for (step, turn) in t.turns() {
            if !turn.adopted || turn.response.trim().is_empty() {
                continue;
            }
            let task = route(turn.task, &turn.response);
            records.entry(task).or_default().push(SftRecord {
                task,
                prompt: turn.prompt.clone(),
                target: turn.response.clone(),
                run_id: t.run_id.clone(),
                step_index: step.unwrap_or(0),
            });
        }
    }
    SftExport {
        records,
        skipped: Vec::new(),
    }
}

/// Decodes `(name, log text)` pairs and exports those that decode.
pub fn export_sft_logs(logs: &[(String, String)]) -> SftExport {
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for (name, text) in logs {
        match decode_trajectory(text) {
            Ok(t) => runs.push(t),
            Err(e) => skipped.push((name.clone(), e.to_string())),
        }
    }
    let mut export = export_sft(&runs);
    export.skipped = skipped;
    export
}

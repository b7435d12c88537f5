//! Executes one action request against the environment.

use std::path::PathBuf;

use serde_json::json;

use crate::model::{ActionKind, ActionRequest, Observation};
use crate::sandbox::{execute_with_artifacts, ExecutionResult};
use crate::search::{select_candidates, SelectionPath};

use super::memory::MemoryState;
use super::{Engine, EngineError};

/// Observation payload for a code execution. Duration is left out so that
/// logs stay reproducible.
pub fn execution_payload(r: &ExecutionResult) -> String {
    json!({
        "exit_ok": r.exit_ok,
        "exit_code": r.exit_code,
        "timed_out": r.timed_out,
        "stdout": r.stdout,
        "stderr": r.stderr,
        "artifacts": r.artifacts,
    })
    .to_string()
}

impl Engine<'_> {
    /// Runs `request`. Tool failures become `ok = false` observations;
    /// only infrastructure faults are errors.
    pub fn dispatch(
        &self,
        request: &ActionRequest,
        memory: &mut MemoryState,
        run_id: &str,
        step: u32,
    ) -> Result<Observation, EngineError> {
        let kind = request.kind();
        let obs = match request {
            ActionRequest::ApiSelect { category, task } => {
                match select_candidates(
                    self.catalog,
                    self.index,
                    self.embedder,
                    &self.config.search,
                    category,
                    task,
                ) {
                    Ok(c) => {
                        let payload = json!({
                            "category": c.category,
                            "path": match c.path {
                                SelectionPath::Direct => "direct",
                                SelectionPath::Embedding => "embedding",
                            },
                            "category_size": c.category_size,
                            "candidates": c.names,
                        })
                        .to_string();
                        memory.selected_candidates = Some(c);
                        Observation::success(kind, payload)
                    }
                    Err(e) => Observation::failure(kind, "", e.to_string()),
                }
            }
            ActionRequest::ApiDetails { name } => match self.catalog.get_details(name) {
                Ok(spec) => {
                    let payload = serde_json::to_string(spec).expect("tool specs serialize");
                    memory.last_tool_spec = Some(spec.clone());
                    Observation::success(kind, payload)
                }
                Err(e) => Observation::failure(kind, "", e.to_string()),
            },
            ActionRequest::CodeExec { code } => {
                let dest: Option<PathBuf> = self
                    .config
                    .artifact_root
                    .as_ref()
                    .map(|root| root.join(run_id).join(step.to_string()));
                let result = execute_with_artifacts(code, &self.config.sandbox, dest.as_deref())?;
                let payload = execution_payload(&result);
                let mut obs = if result.exit_ok {
                    Observation::success(kind, payload)
                } else if result.timed_out {
                    let limit = self.config.sandbox.limits.wall_time;
                    Observation::failure(kind, payload, format!("timed out after {limit}s"))
                } else {
                    let detail = match result.exit_code {
                        Some(code) => format!("exit code {code}"),
                        None => "terminated by signal".to_string(),
                    };
                    Observation::failure(kind, payload, detail)
                };
                obs.artifacts = result.artifacts;
                obs
            }
            ActionRequest::WebSearch { query } => match self.web {
                None => Observation::failure(kind, "", "no web-search provider configured"),
                Some(provider) => match provider.search(query) {
                    Ok(hits) => Observation::success(
                        kind,
                        json!({"provider": provider.name(), "results": hits}).to_string(),
                    ),
                    Err(e) => Observation::failure(kind, "", e),
                },
            },
            ActionRequest::Finish { .. } => Observation::success(ActionKind::Finish, ""),
        };
        Ok(obs)
    }
}

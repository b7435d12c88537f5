//! The control loop: agent meta, bounded action steps, tool dispatch and
//! summary/reflexion with plan revision.
//!
//! A step is one action turn, its dispatch and one reflexion turn. Meta
//! generation precedes step 1 and is not counted against the step budget.
//! `finish` ends the run without a reflexion turn.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::llm::{
    action_envelope, complete, count_tokens, parse_action, parse_agent_meta, parse_reflexion, BackendError, LlmBackend,
    LlmConfig, ParseFailure, PromptSet, Slot, SlotBindings, TemplateError, ACTION_GRAMMAR, META_GRAMMAR,
    REFLEXION_GRAMMAR,
};
use crate::model::{
    apply_revision, ActionKind, ActionRequest, InterruptCause, LlmTurn, Observation, Query, StepRecord, TaskKind,
    TerminationStatus, Trajectory, Verdict,
};
use crate::sandbox::{SandboxConfig, SandboxError};
use crate::search::{Embedder, SearchConfig, VectorIndex};

mod dispatch;
pub mod memory;
mod web;

pub use dispatch::execution_payload;
pub use memory::MemoryState;
pub use web::{CannedSearch, SearchHit, WebSearchProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrchestratorConfig {
    /// Step budget L.
    pub max_steps: u32,
    pub llm: LlmConfig,
    pub search: SearchConfig,
    pub sandbox: SandboxConfig,
    pub reflexion_enabled: bool,
    /// Code artifacts are copied to `<artifact_root>/<run-id>/<step>/`.
    pub artifact_root: Option<PathBuf>,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            max_steps: 10,
            llm: LlmConfig::default(),
            search: SearchConfig::default(),
            sandbox: SandboxConfig::default(),
            reflexion_enabled: true,
            artifact_root: None,
        }
    }
}

impl OrchestratorConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.max_steps == 0 {
            return Err(EngineError::Config("max_steps must be at least 1".into()));
        }
        self.llm.validate().map_err(EngineError::Config)?;
        self.search.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        self.sandbox.limits.validate()?;
        Ok(())
    }
}

/// Infrastructure faults that end a run without a trajectory. Everything
/// the model can cause is folded into [`TerminationStatus`] instead.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("llm backend: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("prompt template: {0}")]
    Template(#[from] TemplateError),
    #[error("configuration: {0}")]
    Config(String),
}

pub trait Clock: Send + Sync {
    /// Seconds since an arbitrary fixed origin.
    fn now(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    }
}

/// Always reads the same instant, so recorded wall times are zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedClock(pub f64);

impl Clock for FixedClock {
    fn now(&self) -> f64 {
        self.0
    }
}

/// Counters kept while the run executes, independent of the trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Accounting {
    pub llm_calls: u32,
    pub tool_calls: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub accounting: Accounting,
}

/// `Some(cause)` when the next LLM call must not happen.
///
/// `step` is the step the call belongs to; 0 is meta generation.
pub fn check_budgets(step: u32, max_steps: u32, prompt_tokens: usize, context_budget: usize) -> Option<InterruptCause> {
    if step > max_steps {
        Some(InterruptCause::StepBudgetExceeded)
    } else if prompt_tokens > context_budget {
        Some(InterruptCause::PromptOverflow)
    } else {
        None
    }
}

/// Appended to a prompt whose completion failed to parse.
pub fn repair_prompt(prompt: &str, failure: &ParseFailure) -> String {
    format!(
        "{prompt}\n\nYour previous reply could not be parsed ({failure}). \
         Reply again with exactly one JSON object in the required format."
    )
}

/// Shared, read-only resources for any number of runs.
pub struct Engine<'a> {
    pub catalog: &'a Catalog,
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn Embedder,
    pub config: OrchestratorConfig,
    pub prompts: PromptSet,
    pub web: Option<&'a dyn WebSearchProvider>,
    pub clock: Arc<dyn Clock>,
}

enum Asked<T> {
    Done(T),
    Interrupted(InterruptCause),
}

struct Run<'r> {
    backend: &'r dyn LlmBackend,
    accounting: Accounting,
}

impl<'a> Engine<'a> {
    pub fn new(
        catalog: &'a Catalog,
        index: &'a VectorIndex,
        embedder: &'a dyn Embedder,
        config: OrchestratorConfig,
    ) -> Self {
        Self {
            catalog,
            index,
            embedder,
            config,
            prompts: PromptSet::default(),
            web: None,
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn with_web_search(mut self, provider: &'a dyn WebSearchProvider) -> Self {
        self.web = Some(provider);
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// One LLM exchange with a single repair retry. Every call, adopted or
    /// not, is appended to `turns`.
    fn ask<T>(
        &self,
        run: &mut Run<'_>,
        task: TaskKind,
        step: u32,
        prompt: String,
        parse: fn(&str) -> Result<T, ParseFailure>,
        turns: &mut Vec<LlmTurn>,
    ) -> Result<Asked<T>, EngineError> {
        let mut prompt = prompt;
        for _ in 0..2 {
            let tokens = count_tokens(run.backend, &prompt);
            if let Some(cause) = check_budgets(step, self.config.max_steps, tokens, self.config.llm.context_budget) {
                return Ok(Asked::Interrupted(cause));
            }
            let response = complete(run.backend, &self.config.llm, &prompt, &mut run.accounting.llm_calls)?;
            match parse(&response) {
                Ok(value) => {
                    turns.push(LlmTurn {
                        task,
                        prompt,
                        response,
                        adopted: true,
                        error: None,
                    });
                    return Ok(Asked::Done(value));
                }
                Err(failure) => {
                    let retry = repair_prompt(&prompt, &failure);
                    turns.push(LlmTurn {
                        task,
                        prompt: std::mem::replace(&mut prompt, retry),
                        response,
                        adopted: false,
                        error: Some(failure.to_string()),
                    });
                }
            }
        }
        Ok(Asked::Interrupted(InterruptCause::ParseFailure))
    }

    fn render(&self, task: TaskKind, bindings: &SlotBindings) -> Result<String, EngineError> {
        Ok(self.prompts.get(task).render(bindings)?.text)
    }

    /// Runs `query` to completion or interruption.
    pub fn run(&self, query: &Query, backend: &dyn LlmBackend) -> Result<RunOutput, EngineError> {
        self.config.validate()?;
        let started = self.clock.now();
        let mut run = Run {
            backend,
            accounting: Accounting::default(),
        };
        let mut trajectory = Trajectory {
            run_id: query.id.clone(),
            max_steps: self.config.max_steps,
            query: query.clone(),
            meta: None,
            meta_turns: Vec::new(),
            steps: Vec::new(),
            dangling_turns: Vec::new(),
            status: TerminationStatus::Finished,
            wall_time: 0.0,
        };
        let status = self.drive(&mut run, query, &mut trajectory)?;
        trajectory.status = status;
        trajectory.wall_time = (self.clock.now() - started).max(0.0);
        Ok(RunOutput {
            trajectory,
            accounting: run.accounting,
        })
    }

    fn drive(&self, run: &mut Run<'_>, query: &Query, t: &mut Trajectory) -> Result<TerminationStatus, EngineError> {
        let interrupted = |cause| Ok(TerminationStatus::Interrupted { cause });

        let mut bindings = SlotBindings::new();
        bindings.insert(Slot::Query, query.text.clone());
        bindings.insert(Slot::Grammar, META_GRAMMAR.to_string());
        let prompt = self.render(TaskKind::AgentMetaGen, &bindings)?;
        let meta = match self.ask(run, TaskKind::AgentMetaGen, 0, prompt, parse_agent_meta, &mut t.meta_turns)? {
            Asked::Done(meta) => meta,
            Asked::Interrupted(cause) => return interrupted(cause),
        };
        t.meta = Some(meta.clone());
        let mut memory = MemoryState::new(meta);

        for step in 1.. {
            if let Some(cause) = check_budgets(step, self.config.max_steps, 0, self.config.llm.context_budget) {
                return interrupted(cause);
            }
            let planned = memory.plan().step(step).cloned();
            let mut bindings = memory.bindings(query, self.catalog, step);
            bindings.insert(Slot::Grammar, ACTION_GRAMMAR.to_string());
            let task = match &planned {
                Some(p) if p.action == ActionKind::CodeExec => {
                    bindings.insert(Slot::Goal, p.goal.clone());
                    TaskKind::CodeWriting
                }
                _ => TaskKind::ActionTaking,
            };
            let prompt = self.render(task, &bindings)?;
            let mut turns = Vec::new();
            let request = match self.ask(run, task, step, prompt, parse_action, &mut turns)? {
                Asked::Done(request) => request,
                Asked::Interrupted(cause) => {
                    t.dangling_turns = turns;
                    return interrupted(cause);
                }
            };

            if let ActionRequest::Finish { .. } = request {
                t.steps.push(StepRecord {
                    step_index: step,
                    llm_calls: turns.len() as u32,
                    tool_calls: 0,
                    request,
                    observation: Observation::success(ActionKind::Finish, ""),
                    reflexion: None,
                    turns,
                });
                return Ok(TerminationStatus::Finished);
            }

            let observation = self.dispatch(&request, &mut memory, &t.run_id, step)?;
            run.accounting.tool_calls += 1;

            let mut record = StepRecord {
                step_index: step,
                request,
                observation,
                reflexion: None,
                llm_calls: 0,
                tool_calls: 1,
                turns,
            };
            let outcome = if self.config.reflexion_enabled {
                let mut bindings = memory.bindings(query, self.catalog, step);
                bindings.insert(Slot::Grammar, REFLEXION_GRAMMAR.to_string());
                bindings.insert(Slot::Action, action_envelope(&record.request));
                bindings.insert(Slot::Observation, render_observation(&record.observation));
                let prompt = self.render(TaskKind::SummaryReflexion, &bindings)?;
                match self.ask(run, TaskKind::SummaryReflexion, step, prompt, parse_reflexion, &mut record.turns)? {
                    Asked::Done(outcome) => Some(outcome),
                    Asked::Interrupted(cause) => {
                        record.llm_calls = record.turns.len() as u32;
                        t.steps.push(record);
                        return interrupted(cause);
                    }
                }
            } else {
                None
            };

            match outcome {
                Some(mut outcome) => {
                    if outcome.verdict == Verdict::Revise {
                        if let Some(proposed) = &outcome.revised_plan {
                            let revised = apply_revision(memory.plan(), proposed, step as usize);
                            memory.meta.plan = revised.clone();
                            outcome.revised_plan = Some(revised);
                        }
                    }
                    memory.summaries.push(outcome.summary.clone());
                    record.reflexion = Some(outcome);
                }
                None => memory.summaries.push(format!(
                    "{} {}",
                    record.request.kind(),
                    if record.observation.ok { "succeeded" } else { "failed" }
                )),
            }
            record.llm_calls = record.turns.len() as u32;
            t.steps.push(record);
        }
        unreachable!("the step loop only exits by returning")
    }
}

/// How an observation is shown to the reflexion turn.
pub fn render_observation(obs: &Observation) -> String {
    let mut out = format!("status: {}\n", if obs.ok { "ok" } else { "failed" });
    if let Some(detail) = &obs.error_detail {
        out.push_str(&format!("error: {detail}\n"));
    }
    if !obs.artifacts.is_empty() {
        let names: Vec<_> = obs.artifacts.iter().map(|a| a.name.as_str()).collect();
        out.push_str(&format!("artifacts: {}\n", names.join(", ")));
    }
    out.push_str(&obs.payload);
    out
}

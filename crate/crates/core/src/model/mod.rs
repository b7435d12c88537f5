//! Domain types shared by every part of the engine.
//!
//! Everything here is a plain value: constructed once, cloned freely and
//! safe to send between threads. The trajectory log codec lives in [`log`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod log;
mod plan;

pub use plan::{apply_revision, validate_plan, validate_plan_with, PlanViolation};

/// A user question, the unit of work for one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            metadata: BTreeMap::new(),
        }
    }
}

/// The role the agent adopts for a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub role_name: String,
    pub description: String,
    pub abilities: Vec<String>,
}

/// The closed set of actions an agent can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    ApiSelect,
    ApiDetails,
    CodeExec,
    WebSearch,
    Finish,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::ApiSelect,
        ActionKind::ApiDetails,
        ActionKind::CodeExec,
        ActionKind::WebSearch,
        ActionKind::Finish,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::ApiSelect => "api-select",
            ActionKind::ApiDetails => "api-details",
            ActionKind::CodeExec => "code-exec",
            ActionKind::WebSearch => "web-search",
            ActionKind::Finish => "finish",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownActionKind(pub String);

impl fmt::Display for UnknownActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown action kind `{}`", self.0)
    }
}

impl std::error::Error for UnknownActionKind {}

impl FromStr for ActionKind {
    type Err = UnknownActionKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownActionKind(s.to_string()))
    }
}

/// One planned step. `index` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub index: u32,
    pub action: ActionKind,
    pub goal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverallPlan {
    pub steps: Vec<PlanStep>,
    /// 0 for the initial plan, +1 per amendment.
    pub revision: u32,
}

impl OverallPlan {
    /// Builds a plan from `(action, goal)` pairs, numbering steps from 1.
    pub fn from_actions<I, S>(steps: I) -> Self
    where
        I: IntoIterator<Item = (ActionKind, S)>,
        S: Into<String>,
    {
        let steps = steps
            .into_iter()
            .enumerate()
            .map(|(i, (action, goal))| PlanStep {
                index: i as u32 + 1,
                action,
                goal: goal.into(),
            })
            .collect();
        Self { steps, revision: 0 }
    }

    pub fn step(&self, index: u32) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.index == index)
    }
}

/// Profile plus Overall Plan, generated once per run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMeta {
    pub profile: Profile,
    pub plan: OverallPlan,
}

/// What the model asked the environment to do.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActionRequest {
    ApiSelect { category: String, task: String },
    ApiDetails { name: String },
    CodeExec { code: String },
    WebSearch { query: String },
    Finish { answer: String },
}

impl ActionRequest {
    pub fn kind(&self) -> ActionKind {
        match self {
            ActionRequest::ApiSelect { .. } => ActionKind::ApiSelect,
            ActionRequest::ApiDetails { .. } => ActionKind::ApiDetails,
            ActionRequest::CodeExec { .. } => ActionKind::CodeExec,
            ActionRequest::WebSearch { .. } => ActionKind::WebSearch,
            ActionRequest::Finish { .. } => ActionKind::Finish,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Image,
    Table,
    Text,
    Other,
}

impl MediaKind {
    /// Classifies a file by its extension (case-insensitive).
    pub fn from_file_name(name: &str) -> Self {
        let ext = name
            .rsplit_once('.')
            .map(|(_, ext)| ext.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "png" | "jpg" | "jpeg" | "gif" | "svg" | "bmp" | "webp" => MediaKind::Image,
            "csv" | "tsv" | "xlsx" | "xls" | "parquet" => MediaKind::Table,
            "txt" | "md" | "json" | "log" => MediaKind::Text,
            _ => MediaKind::Other,
        }
    }
}

/// A file produced by a code execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub name: String,
    pub media_kind: MediaKind,
    pub byte_size: u64,
}

/// What the environment returned for an action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub kind: ActionKind,
    pub payload: String,
    pub artifacts: Vec<ArtifactRef>,
    pub ok: bool,
    pub error_detail: Option<String>,
}

impl Observation {
    pub fn success(kind: ActionKind, payload: impl Into<String>) -> Self {
        Self {
            kind,
            payload: payload.into(),
            artifacts: Vec::new(),
            ok: true,
            error_detail: None,
        }
    }

    pub fn failure(kind: ActionKind, payload: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            kind,
            payload: payload.into(),
            artifacts: Vec::new(),
            ok: false,
            error_detail: Some(detail.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Proceed,
    Revise,
}

/// Result of the post-action summary pass.
///
/// When the verdict is `revise`, `revised_plan` holds the plan as applied:
/// executed steps kept, the remainder replaced, revision bumped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflexionOutcome {
    pub summary: String,
    pub verdict: Verdict,
    pub revised_plan: Option<OverallPlan>,
}

/// The four LLM sub-tasks of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    AgentMetaGen,
    ActionTaking,
    CodeWriting,
    SummaryReflexion,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::AgentMetaGen,
        TaskKind::ActionTaking,
        TaskKind::CodeWriting,
        TaskKind::SummaryReflexion,
    ];

    /// Short name used for SFT dataset files and reports.
    pub fn short_name(self) -> &'static str {
        match self {
            TaskKind::AgentMetaGen => "plan",
            TaskKind::ActionTaking => "action",
            TaskKind::CodeWriting => "code",
            TaskKind::SummaryReflexion => "summary",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// One LLM call: the rendered prompt and the raw completion.
///
/// `adopted` is false for completions that failed to parse and were retried.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmTurn {
    pub task: TaskKind,
    pub prompt: String,
    pub response: String,
    pub adopted: bool,
    pub error: Option<String>,
}

/// One loop iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: u32,
    pub request: ActionRequest,
    pub observation: Observation,
    /// Absent for `finish` and for steps interrupted during reflexion.
    pub reflexion: Option<ReflexionOutcome>,
    pub llm_calls: u32,
    pub tool_calls: u32,
    pub turns: Vec<LlmTurn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterruptCause {
    StepBudgetExceeded,
    ParseFailure,
    PromptOverflow,
}

impl InterruptCause {
    pub const ALL: [InterruptCause; 3] = [
        InterruptCause::StepBudgetExceeded,
        InterruptCause::ParseFailure,
        InterruptCause::PromptOverflow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InterruptCause::StepBudgetExceeded => "step-budget-exceeded",
            InterruptCause::ParseFailure => "parse-failure",
            InterruptCause::PromptOverflow => "prompt-overflow",
        }
    }
}

impl fmt::Display for InterruptCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TerminationStatus {
    Finished,
    Interrupted { cause: InterruptCause },
}

impl TerminationStatus {
    pub fn is_finished(self) -> bool {
        matches!(self, TerminationStatus::Finished)
    }

    pub fn cause(self) -> Option<InterruptCause> {
        match self {
            TerminationStatus::Finished => None,
            TerminationStatus::Interrupted { cause } => Some(cause),
        }
    }
}

impl fmt::Display for TerminationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminationStatus::Finished => f.write_str("finished"),
            TerminationStatus::Interrupted { cause } => write!(f, "interrupted({cause})"),
        }
    }
}

/// A complete episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub run_id: String,
    pub max_steps: u32,
    pub query: Query,
    /// Initial agent meta; `None` when the run stopped before it was adopted.
    pub meta: Option<AgentMeta>,
    pub meta_turns: Vec<LlmTurn>,
    pub steps: Vec<StepRecord>,
    /// LLM calls made for a step that never produced a request.
    pub dangling_turns: Vec<LlmTurn>,
    pub status: TerminationStatus,
    pub wall_time: f64,
}

impl Trajectory {
    pub fn llm_calls(&self) -> u32 {
        self.meta_turns.len() as u32
            + self.steps.iter().map(|s| s.llm_calls).sum::<u32>()
            + self.dangling_turns.len() as u32
    }

    pub fn tool_calls(&self) -> u32 {
        self.steps.iter().map(|s| s.tool_calls).sum()
    }

    /// The plan in force at the end of the run.
    pub fn current_plan(&self) -> Option<&OverallPlan> {
        self.steps
            .iter()
            .rev()
            .find_map(|s| s.reflexion.as_ref().and_then(|r| r.revised_plan.as_ref()))
            .or(self.meta.as_ref().map(|m| &m.plan))
    }

    pub fn final_answer(&self) -> Option<&str> {
        match self.steps.last().map(|s| &s.request) {
            Some(ActionRequest::Finish { answer }) => Some(answer),
            _ => None,
        }
    }

    /// Every LLM turn in call order.
    pub fn turns(&self) -> impl Iterator<Item = (Option<u32>, &LlmTurn)> {
        self.meta_turns
            .iter()
            .map(|t| (None, t))
            .chain(
                self.steps
                    .iter()
                    .flat_map(|s| s.turns.iter().map(move |t| (Some(s.step_index), t))),
            )
            .chain(self.dangling_turns.iter().map(|t| (None, t)))
    }

    /// Checks the structural invariants a well-formed trajectory satisfies.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.steps.len() > self.max_steps as usize {
            return Err(format!(
                "{} steps exceed the budget of {}",
                self.steps.len(),
                self.max_steps
            ));
        }
        let ends_in_finish = matches!(
            self.steps.last().map(|s| s.request.kind()),
            Some(ActionKind::Finish)
        );
        if self.status.is_finished() != ends_in_finish {
            return Err(format!(
                "status {} disagrees with last request kind",
                self.status
            ));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.step_index != i as u32 + 1 {
                return Err(format!("step {} has index {}", i + 1, step.step_index));
            }
            if step.llm_calls as usize != step.turns.len() {
                return Err(format!("step {} llm_calls disagrees with turns", i + 1));
            }
            if step.llm_calls < 1 || (step.reflexion.is_some() && step.llm_calls < 2) {
                return Err(format!("step {} has too few llm calls", i + 1));
            }
            if !step.observation.ok && step.observation.error_detail.is_none() {
                return Err(format!("step {} failed without error detail", i + 1));
            }
            if let Some(r) = &step.reflexion {
                if (r.verdict == Verdict::Revise) != r.revised_plan.is_some() {
                    return Err(format!("step {} verdict/plan mismatch", i + 1));
                }
            }
        }
        Ok(())
    }
}

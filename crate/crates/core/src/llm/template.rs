//! Prompt templates with named slots.
//!
//! `{{slot}}` is a required slot and `{{slot?}}` an optional one; unbound
//! optional slots render as `(none)`. Values are inserted verbatim and never
//! re-expanded.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::model::TaskKind;

use super::tokens::estimate_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Query,
    Profile,
    Plan,
    History,
    Categories,
    Candidates,
    ToolSpec,
    Goal,
    Action,
    Observation,
    Grammar,
}

impl Slot {
    pub const ALL: [Slot; 11] = [
        Slot::Query,
        Slot::Profile,
        Slot::Plan,
        Slot::History,
        Slot::Categories,
        Slot::Candidates,
        Slot::ToolSpec,
        Slot::Goal,
        Slot::Action,
        Slot::Observation,
        Slot::Grammar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Slot::Query => "query",
            Slot::Profile => "profile",
            Slot::Plan => "plan",
            Slot::History => "history",
            Slot::Categories => "categories",
            Slot::Candidates => "candidates",
            Slot::ToolSpec => "tool_spec",
            Slot::Goal => "goal",
            Slot::Action => "action",
            Slot::Observation => "observation",
            Slot::Grammar => "grammar",
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Slot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Slot::ALL
            .into_iter()
            .find(|slot| slot.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("slot '{0}' unbound")]
    Unbound(Slot),
    #[error("template for {task}: unknown slot '{name}'")]
    UnknownSlot { task: TaskKind, name: String },
    #[error("template for {task}: unterminated marker at byte {offset}")]
    Unterminated { task: TaskKind, offset: usize },
    #[error("cannot read template {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot { slot: Slot, optional: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    task: TaskKind,
    pieces: Vec<Piece>,
}

pub type SlotBindings = BTreeMap<Slot, String>;

/// A rendered prompt with its token estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub task: TaskKind,
    pub text: String,
    pub token_estimate: usize,
}

impl Prompt {
    pub fn new(task: TaskKind, text: String) -> Self {
        let token_estimate = estimate_tokens(&text);
        Self {
            task,
            text,
            token_estimate,
        }
    }
}

impl PromptTemplate {
    pub fn parse(task: TaskKind, body: &str) -> Result<Self, TemplateError> {
        let mut pieces = Vec::new();
        let mut rest = body;
        let mut offset = 0;
        while let Some(start) = rest.find("{{") {
            if start > 0 {
                pieces.push(Piece::Text(rest[..start].to_string()));
            }
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or(TemplateError::Unterminated {
                task,
                offset: offset + start,
            })?;
            let marker = after[..end].trim();
            let (name, optional) = match marker.strip_suffix('?') {
                Some(name) => (name, true),
                None => (marker, false),
            };
            let slot = name.parse::<Slot>().map_err(|name| TemplateError::UnknownSlot { task, name })?;
            pieces.push(Piece::Slot { slot, optional });
            let consumed = start + 2 + end + 2;
            offset += consumed;
            rest = &rest[consumed..];
        }
        if !rest.is_empty() {
            pieces.push(Piece::Text(rest.to_string()));
        }
        Ok(Self { task, pieces })
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    /// Slots in order of first use, with whether each is required.
    pub fn slots(&self) -> Vec<(Slot, bool)> {
        let mut out: Vec<(Slot, bool)> = Vec::new();
        for piece in &self.pieces {
            if let Piece::Slot { slot, optional } = piece {
                match out.iter_mut().find(|(s, _)| s == slot) {
                    Some(entry) => entry.1 |= !optional,
                    None => out.push((*slot, !optional)),
                }
            }
        }
        out
    }

    pub fn render(&self, bindings: &SlotBindings) -> Result<Prompt, TemplateError> {
        let mut text = String::new();
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => text.push_str(t),
                Piece::Slot { slot, optional } => match bindings.get(slot) {
                    Some(value) => text.push_str(value),
                    None if *optional => text.push_str("(none)"),
                    None => return Err(TemplateError::Unbound(*slot)),
                },
            }
        }
        Ok(Prompt::new(self.task, text))
    }
}

pub fn render_prompt(template: &PromptTemplate, bindings: &SlotBindings) -> Result<Prompt, TemplateError> {
    template.render(bindings)
}

const AGENT_META: &str = include_str!("../../templates/agent_meta.txt");
const ACTION: &str = include_str!("../../templates/action.txt");
const CODE: &str = include_str!("../../templates/code.txt");
const REFLEXION: &str = include_str!("../../templates/reflexion.txt");

/// One template per sub-task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<TaskKind, PromptTemplate>,
}

fn file_name(task: TaskKind) -> &'static str {
    match task {
        TaskKind::AgentMetaGen => "agent_meta.txt",
        TaskKind::ActionTaking => "action.txt",
        TaskKind::CodeWriting => "code.txt",
        TaskKind::SummaryReflexion => "reflexion.txt",
    }
}

fn default_body(task: TaskKind) -> &'static str {
    match task {
        TaskKind::AgentMetaGen => AGENT_META,
        TaskKind::ActionTaking => ACTION,
        TaskKind::CodeWriting => CODE,
        TaskKind::SummaryReflexion => REFLEXION,
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        let templates = TaskKind::ALL
            .into_iter()
            .map(|t| (t, PromptTemplate::parse(t, default_body(t)).expect("built-in templates parse")))
            .collect();
        Self { templates }
    }
}

impl PromptSet {
    /// Built-in templates, overridden by any `<task>.txt` present in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::default();
        for task in TaskKind::ALL {
            let path = dir.join(file_name(task));
            if path.exists() {
                let body = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })?;
                set.templates.insert(task, PromptTemplate::parse(task, &body)?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, task: TaskKind) -> &PromptTemplate {
        &self.templates[&task]
    }
}

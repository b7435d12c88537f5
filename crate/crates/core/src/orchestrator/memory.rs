//! What the agent carries between steps, and how it is shown to the model.
//!
//! Later prompts see the profile, the current plan and the per-step
//! summaries. Raw observations are never replayed; only the last candidate
//! list and the last API document are kept as working slots.

use std::fmt::Write as _;

use crate::catalog::{Catalog, ToolSpec};
use crate::llm::{Slot, SlotBindings};
use crate::model::{AgentMeta, OverallPlan, Profile, Query};
use crate::search::{Candidates, SelectionPath};

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    /// Profile plus the plan currently in force.
    pub meta: AgentMeta,
    /// One entry per completed step.
    pub summaries: Vec<String>,
    pub selected_candidates: Option<Candidates>,
    pub last_tool_spec: Option<ToolSpec>,
}

impl MemoryState {
    pub fn new(meta: AgentMeta) -> Self {
        Self {
            meta,
            summaries: Vec::new(),
            selected_candidates: None,
            last_tool_spec: None,
        }
    }

    pub fn plan(&self) -> &OverallPlan {
        &self.meta.plan
    }

    /// Slots shared by every in-loop prompt, for the step about to run.
    pub fn bindings(&self, query: &Query, catalog: &Catalog, step: u32) -> SlotBindings {
        let mut b = SlotBindings::new();
        b.insert(Slot::Query, query.text.clone());
        b.insert(Slot::Profile, render_profile(&self.meta.profile));
        b.insert(Slot::Plan, render_plan(&self.meta.plan, Some(step)));
        b.insert(Slot::History, render_history(&self.summaries));
        b.insert(Slot::Categories, render_categories(catalog));
        if let Some(c) = &self.selected_candidates {
            b.insert(Slot::Candidates, render_candidates(c, catalog));
        }
        if let Some(spec) = &self.last_tool_spec {
            b.insert(Slot::ToolSpec, spec.render_document());
        }
        b
    }
}

pub fn render_profile(p: &Profile) -> String {
    format!(
        "{}: {}\nAbilities: {}",
        p.role_name,
        p.description,
        p.abilities.join(", ")
    )
}

/// One line per step; `current` is marked with `->`.
pub fn render_plan(plan: &OverallPlan, current: Option<u32>) -> String {
    let mut out = String::new();
    for s in &plan.steps {
        let marker = if Some(s.index) == current { "->" } else { "  " };
        let _ = writeln!(out, "{marker} {}. [{}] {}", s.index, s.action, s.goal);
    }
    let _ = write!(out, "(revision {})", plan.revision);
    out
}

pub fn render_history(summaries: &[String]) -> String {
    if summaries.is_empty() {
        return "(no steps completed yet)".to_string();
    }
    summaries
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Step {}: {}", i + 1, s))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_categories(catalog: &Catalog) -> String {
    catalog
        .specific_categories()
        .map(|c| format!("- {} ({} APIs)", c.name, catalog.count(&c.name)))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_candidates(c: &Candidates, catalog: &Catalog) -> String {
    let how = match c.path {
        SelectionPath::Direct => "full category list",
        SelectionPath::Embedding => "embedding recall",
    };
    let mut out = format!(
        "Category {} ({how}, {} of {}):",
        c.category,
        c.names.len(),
        c.category_size
    );
    for name in &c.names {
        let description = catalog.get_details(name).map(|s| s.description.as_str()).unwrap_or("");
        let _ = write!(out, "\n- {name}: {description}");
    }
    out
}

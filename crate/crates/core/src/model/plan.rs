use std::fmt;

use super::{ActionKind, OverallPlan, PlanStep};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanViolation {
    Empty,
    NonContiguousIndex { position: usize, expected: u32, found: u32 },
    MissingTerminalFinish,
    UnregisteredActionKind { index: u32, kind: ActionKind },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::Empty => f.write_str("plan has no steps"),
            PlanViolation::NonContiguousIndex {
                position,
                expected,
                found,
            } => write!(
                f,
                "non-contiguous indices: step at position {position} has index {found}, expected {expected}"
            ),
            PlanViolation::MissingTerminalFinish => f.write_str("missing terminal finish"),
            PlanViolation::UnregisteredActionKind { index, kind } => {
                write!(f, "step {index} uses unregistered action kind `{kind}`")
            }
        }
    }
}

/// Returns every invariant violation of `plan`; empty means valid.
pub fn validate_plan(plan: &OverallPlan) -> Vec<PlanViolation> {
    validate_plan_with(plan, &ActionKind::ALL)
}

/// Like [`validate_plan`], restricting steps to the `registered` action kinds.
pub fn validate_plan_with(plan: &OverallPlan, registered: &[ActionKind]) -> Vec<PlanViolation> {
    let mut violations = Vec::new();
    if plan.steps.is_empty() {
        violations.push(PlanViolation::Empty);
        violations.push(PlanViolation::MissingTerminalFinish);
        return violations;
    }
    for (position, step) in plan.steps.iter().enumerate() {
        let expected = position as u32 + 1;
        if step.index != expected {
            violations.push(PlanViolation::NonContiguousIndex {
                position,
                expected,
                found: step.index,
            });
        }
        if !registered.contains(&step.action) {
            violations.push(PlanViolation::UnregisteredActionKind {
                index: step.index,
                kind: step.action,
            });
        }
    }
    if plan.steps.last().map(|s| s.action) != Some(ActionKind::Finish) {
        violations.push(PlanViolation::MissingTerminalFinish);
    }
    violations
}

/// Applies an amendment after `executed` steps have run.
///
/// The first `executed` steps of `current` are frozen history (the terminal
/// `finish` is never frozen); `proposed` replaces the rest and is renumbered
/// to follow them. The result carries `current.revision + 1`.
pub fn apply_revision(current: &OverallPlan, proposed: &OverallPlan, executed: usize) -> OverallPlan {
    let frozen = executed.min(current.steps.len().saturating_sub(1));
    let mut steps: Vec<PlanStep> = current.steps[..frozen].to_vec();
    steps.extend(proposed.steps.iter().enumerate().map(|(i, s)| PlanStep {
        index: (frozen + i) as u32 + 1,
        action: s.action,
        goal: s.goal.clone(),
    }));
    OverallPlan {
        steps,
        revision: current.revision + 1,
    }
}

//! Strict parsers for model output envelopes.
//!
//! Every model turn must be exactly one JSON object, optionally wrapped in
//! a single fenced code block. Keys are closed per envelope: unknown or
//! missing keys, wrong types, empty strings and invalid plans are all
//! [`ParseFailure`]s. The parsers never panic.

use std::fmt;

use serde_json::{json, Map, Value};

use crate::model::{
    validate_plan, ActionKind, ActionRequest, AgentMeta, OverallPlan, PlanStep, Profile, ReflexionOutcome, Verdict,
};

pub const META_GRAMMAR: &str = r#"Reply with exactly one JSON object and nothing else:
{"profile": {"role_name": "<role>", "description": "<one sentence>", "abilities": ["<ability>", ...]},
 "plan": [{"step": 1, "action": "<api-select|api-details|code-exec|web-search|finish>", "goal": "<what this step achieves>"}, ...]}
Steps are numbered from 1 without gaps and the last step is finish."#;

pub const ACTION_GRAMMAR: &str = r#"Reply with exactly one JSON object and nothing else, one of:
{"kind": "api-select", "category": "<category>", "task": "<what the API must provide>"}
{"kind": "api-details", "name": "<api name>"}
{"kind": "code-exec", "code": "<complete Python program>"}
{"kind": "web-search", "query": "<search text>"}
{"kind": "finish", "answer": "<final answer>"}"#;

pub const REFLEXION_GRAMMAR: &str = r#"Reply with exactly one JSON object and nothing else, one of:
{"summary": "<insights>", "verdict": "proceed"}
{"summary": "<insights>", "verdict": "revise", "plan": [{"step": 1, "action": "<kind>", "goal": "<goal>"}, ...]}
A revised plan lists only the remaining steps, numbered from 1, ending with finish."#;

/// Why a model output was rejected, and where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    /// `line L, column C` for syntax errors, a JSON pointer otherwise.
    pub location: String,
    pub reason: String,
}

impl ParseFailure {
    fn at(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: {}", self.location, self.reason)
    }
}

impl std::error::Error for ParseFailure {}

/// Strips one optional fenced block around the envelope.
fn envelope_text(raw: &str) -> Result<&str, ParseFailure> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(ParseFailure::at("line 1, column 1", "empty output"));
    }
    let Some(rest) = trimmed.strip_prefix("```") else {
        return Ok(trimmed);
    };
    let (lang, body) = rest.split_once('\n').unwrap_or((rest, ""));
    if !lang.trim().is_empty() && lang.trim() != "json" {
        return Err(ParseFailure::at("line 1", format!("unexpected fence language `{}`", lang.trim())));
    }
    body.trim_end()
        .strip_suffix("```")
        .map(str::trim)
        .ok_or_else(|| ParseFailure::at("end of output", "unterminated code fence"))
}

fn parse_object(raw: &str) -> Result<Map<String, Value>, ParseFailure> {
    let text = envelope_text(raw)?;
    let value: Value = serde_json::from_str(text).map_err(|e| {
        ParseFailure::at(format!("line {}, column {}", e.line(), e.column()), e.to_string())
    })?;
    match value {
        Value::Object(map) => Ok(map),
        other => Err(ParseFailure::at("/", format!("expected an object, found {}", type_name(&other)))),
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn check_keys(obj: &Map<String, Value>, path: &str, required: &[&str], optional: &[&str]) -> Result<(), ParseFailure> {
    for key in obj.keys() {
        if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
            return Err(ParseFailure::at(format!("{path}/{key}"), format!("unknown field `{key}`")));
        }
    }
    for key in required {
        if !obj.contains_key(*key) {
            return Err(ParseFailure::at(path.to_string(), format!("missing field `{key}`")));
        }
    }
    Ok(())
}

fn string_at(obj: &Map<String, Value>, path: &str, key: &str) -> Result<String, ParseFailure> {
    match obj.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
        Some(Value::String(_)) => Err(ParseFailure::at(format!("{path}/{key}"), format!("`{key}` is empty"))),
        Some(other) => Err(ParseFailure::at(
            format!("{path}/{key}"),
            format!("`{key}` must be a string, found {}", type_name(other)),
        )),
        None => Err(ParseFailure::at(path.to_string(), format!("missing field `{key}`"))),
    }
}

fn parse_profile(value: &Value) -> Result<Profile, ParseFailure> {
    let Value::Object(obj) = value else {
        return Err(ParseFailure::at("/profile", format!("expected an object, found {}", type_name(value))));
    };
    check_keys(obj, "/profile", &["role_name", "description", "abilities"], &[])?;
    let abilities = match &obj["abilities"] {
        Value::Array(items) if !items.is_empty() => items
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::String(s) if !s.trim().is_empty() => Ok(s.clone()),
                _ => Err(ParseFailure::at(
                    format!("/profile/abilities/{i}"),
                    "ability must be a non-empty string",
                )),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Value::Array(_) => return Err(ParseFailure::at("/profile/abilities", "abilities is empty")),
        other => {
            return Err(ParseFailure::at(
                "/profile/abilities",
                format!("expected an array, found {}", type_name(other)),
            ))
        }
    };
    Ok(Profile {
        role_name: string_at(obj, "/profile", "role_name")?,
        description: string_at(obj, "/profile", "description")?,
        abilities,
    })
}

fn parse_plan(value: &Value, path: &str) -> Result<OverallPlan, ParseFailure> {
    let Value::Array(items) = value else {
        return Err(ParseFailure::at(path, format!("expected an array, found {}", type_name(value))));
    };
    let mut steps = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let step_path = format!("{path}/{i}");
        let Value::Object(obj) = item else {
            return Err(ParseFailure::at(step_path, format!("expected an object, found {}", type_name(item))));
        };
        check_keys(obj, &step_path, &["step", "action", "goal"], &[])?;
        let index = match &obj["step"] {
            Value::Number(n) => n
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| ParseFailure::at(format!("{step_path}/step"), "step must be a positive integer"))?,
            other => {
                return Err(ParseFailure::at(
                    format!("{step_path}/step"),
                    format!("step must be an integer, found {}", type_name(other)),
                ))
            }
        };
        let action = string_at(obj, &step_path, "action")?
            .parse::<ActionKind>()
            .map_err(|e| ParseFailure::at(format!("{step_path}/action"), e.to_string()))?;
        steps.push(PlanStep {
            index,
            action,
            goal: string_at(obj, &step_path, "goal")?,
        });
    }
    let plan = OverallPlan { steps, revision: 0 };
    if let Some(violation) = validate_plan(&plan).into_iter().next() {
        return Err(ParseFailure::at(path, violation.to_string()));
    }
    Ok(plan)
}

/// Parses the agent-meta envelope: profile plus a valid plan.
pub fn parse_agent_meta(raw: &str) -> Result<AgentMeta, ParseFailure> {
    let obj = parse_object(raw)?;
    check_keys(&obj, "", &["profile", "plan"], &[])?;
    Ok(AgentMeta {
        profile: parse_profile(&obj["profile"])?,
        plan: parse_plan(&obj["plan"], "/plan")?,
    })
}

/// Parses an action envelope. `code-exec` code is passed through verbatim.
pub fn parse_action(raw: &str) -> Result<ActionRequest, ParseFailure> {
    let obj = parse_object(raw)?;
    let kind = string_at(&obj, "", "kind")?
        .parse::<ActionKind>()
        .map_err(|e| ParseFailure::at("/kind", e.to_string()))?;
    let request = match kind {
        ActionKind::ApiSelect => {
            check_keys(&obj, "", &["kind", "category", "task"], &[])?;
            ActionRequest::ApiSelect {
                category: string_at(&obj, "", "category")?,
                task: string_at(&obj, "", "task")?,
            }
        }
        ActionKind::ApiDetails => {
            check_keys(&obj, "", &["kind", "name"], &[])?;
            ActionRequest::ApiDetails {
                name: string_at(&obj, "", "name")?,
            }
        }
        ActionKind::CodeExec => {
            check_keys(&obj, "", &["kind", "code"], &[])?;
            ActionRequest::CodeExec {
                code: string_at(&obj, "", "code")?,
            }
        }
        ActionKind::WebSearch => {
            check_keys(&obj, "", &["kind", "query"], &[])?;
            ActionRequest::WebSearch {
                query: string_at(&obj, "", "query")?,
            }
        }
        ActionKind::Finish => {
            check_keys(&obj, "", &["kind", "answer"], &[])?;
            ActionRequest::Finish {
                answer: string_at(&obj, "", "answer")?,
            }
        }
    };
    Ok(request)
}

/// Parses a summary/reflexion envelope.
///
/// For `revise`, `revised_plan` holds the proposed remaining steps as
/// written by the model (revision 0); the caller merges it into the
/// running plan.
pub fn parse_reflexion(raw: &str) -> Result<ReflexionOutcome, ParseFailure> {
    let obj = parse_object(raw)?;
    check_keys(&obj, "", &["summary", "verdict"], &["plan"])?;
    let summary = string_at(&obj, "", "summary")?;
    let verdict = match string_at(&obj, "", "verdict")?.as_str() {
        "proceed" => Verdict::Proceed,
        "revise" => Verdict::Revise,
        other => return Err(ParseFailure::at("/verdict", format!("unknown verdict `{other}`"))),
    };
    let revised_plan = match (verdict, obj.get("plan")) {
        (Verdict::Proceed, None) => None,
        (Verdict::Proceed, Some(_)) => {
            return Err(ParseFailure::at("/plan", "verdict proceed must not carry a plan"))
        }
        (Verdict::Revise, None) => return Err(ParseFailure::at("", "verdict revise requires a plan")),
        (Verdict::Revise, Some(plan)) => Some(parse_plan(plan, "/plan")?),
    };
    Ok(ReflexionOutcome {
        summary,
        verdict,
        revised_plan,
    })
}

fn plan_value(plan: &OverallPlan) -> Value {
    Value::Array(
        plan.steps
            .iter()
            .map(|s| json!({"step": s.index, "action": s.action.as_str(), "goal": s.goal}))
            .collect(),
    )
}

/// Serializes agent meta in the envelope grammar.
pub fn meta_envelope(meta: &AgentMeta) -> String {
    json!({
        "profile": {
            "role_name": meta.profile.role_name,
            "description": meta.profile.description,
            "abilities": meta.profile.abilities,
        },
        "plan": plan_value(&meta.plan),
    })
    .to_string()
}

/// Serializes an action request in the envelope grammar.
pub fn action_envelope(request: &ActionRequest) -> String {
    serde_json::to_string(request).expect("action requests serialize")
}

/// Serializes a reflexion outcome in the envelope grammar.
pub fn reflexion_envelope(outcome: &ReflexionOutcome) -> String {
    let verdict = match outcome.verdict {
        Verdict::Proceed => "proceed",
        Verdict::Revise => "revise",
    };
    let mut obj = json!({"summary": outcome.summary, "verdict": verdict});
    if let Some(plan) = &outcome.revised_plan {
        obj["plan"] = plan_value(plan);
    }
    obj.to_string()
}

//! Line-delimited trajectory log, format `v1`.
//!
//! ```text
//! HDR<TAB>{"version":"v1","run_id":..,"max_steps":..,"query":..,"meta":..,"meta_turns":[..]}
//! STEP<TAB>{"step_index":..,"request":..,"observation":..,"reflexion":..,"llm_calls":..,"tool_calls":..,"turns":[..]}
//! END<TAB>{"status":..,"wall_time":..,"steps":..,"llm_calls":..,"tool_calls":..,"dangling_turns":[..]}
//! ```
//!
//! One `HDR`, zero or more `STEP` (in order), one `END`. Each record is a
//! single line; JSON escaping keeps newlines inside strings off the wire.
//! Field order is fixed by the record structs below, so encoding is a pure
//! function of the trajectory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AgentMeta, LlmTurn, Query, StepRecord, TerminationStatus, Trajectory};

pub const LOG_VERSION: &str = "v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of trajectory log")]
    UnexpectedEnd,
    #[error("line {line}: expected {expected} record, found `{found}`")]
    UnexpectedTag {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unsupported log version `{0}`")]
    Version(String),
    #[error("line {line}: trailing data after END record")]
    TrailingData { line: usize },
    #[error("inconsistent trajectory: {0}")]
    Inconsistent(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: String,
    run_id: String,
    max_steps: u32,
    query: Query,
    meta: Option<AgentMeta>,
    meta_turns: Vec<LlmTurn>,
}

#[derive(Serialize, Deserialize)]
struct Footer {
    #[serde(flatten)]
    status: TerminationStatus,
    wall_time: f64,
    steps: usize,
    llm_calls: u32,
    tool_calls: u32,
    dangling_turns: Vec<LlmTurn>,
}

fn record<T: Serialize>(out: &mut String, tag: &str, value: &T) {
    out.push_str(tag);
    out.push('\t');
    // Serializing plain data structs to a String cannot fail.
    out.push_str(&serde_json::to_string(value).expect("trajectory records serialize"));
    out.push('\n');
}

/// Encodes a trajectory as a `v1` log.
pub fn encode_trajectory(t: &Trajectory) -> String {
    let mut out = String::new();
    record(
        &mut out,
        "HDR",
        &Header {
            version: LOG_VERSION.to_string(),
            run_id: t.run_id.clone(),
            max_steps: t.max_steps,
            query: t.query.clone(),
            meta: t.meta.clone(),
            meta_turns: t.meta_turns.clone(),
        },
    );
    for step in &t.steps {
        record(&mut out, "STEP", step);
    }
    record(
        &mut out,
        "END",
        &Footer {
            status: t.status,
            wall_time: t.wall_time,
            steps: t.steps.len(),
            llm_calls: t.llm_calls(),
            tool_calls: t.tool_calls(),
            dangling_turns: t.dangling_turns.clone(),
        },
    );
    out
}

fn split_record(line_no: usize, line: &str) -> Result<(&str, &str), DecodeError> {
    line.split_once('\t').ok_or_else(|| DecodeError::Malformed {
        line: line_no,
        reason: "missing tab after record tag".to_string(),
    })
}

fn parse_body<'a, T: Deserialize<'a>>(line_no: usize, body: &'a str) -> Result<T, DecodeError> {
    serde_json::from_str(body).map_err(|e| {
        if e.is_eof() {
            DecodeError::UnexpectedEnd
        } else {
            DecodeError::Malformed {
                line: line_no,
                reason: e.to_string(),
            }
        }
    })
}

/// Decodes a `v1` log produced by [`encode_trajectory`].
pub fn decode_trajectory(text: &str) -> Result<Trajectory, DecodeError> {
    let mut lines = text.split_inclusive('\n').enumerate().map(|(i, l)| (i + 1, l));

    let (line_no, first) = lines.next().ok_or(DecodeError::UnexpectedEnd)?;
    let first = first.strip_suffix('\n').ok_or(DecodeError::UnexpectedEnd)?;
    let (tag, body) = split_record(line_no, first)?;
    if tag != "HDR" {
        return Err(DecodeError::UnexpectedTag {
            line: line_no,
            expected: "HDR",
            found: tag.to_string(),
        });
    }
    let header: Header = parse_body(line_no, body)?;
    if header.version != LOG_VERSION {
        return Err(DecodeError::Version(header.version));
    }

    let mut steps = Vec::new();
    let footer: Footer = loop {
        let (line_no, raw) = lines.next().ok_or(DecodeError::UnexpectedEnd)?;
        // A record without its newline was cut off mid-write.
        let line = raw.strip_suffix('\n').ok_or(DecodeError::UnexpectedEnd)?;
        let (tag, body) = split_record(line_no, line)?;
        match tag {
            "STEP" => steps.push(parse_body::<StepRecord>(line_no, body)?),
            "END" => break parse_body(line_no, body)?,
            other => {
                return Err(DecodeError::UnexpectedTag {
                    line: line_no,
                    expected: "STEP or END",
                    found: other.to_string(),
                })
            }
        }
    };
    if let Some((line, _)) = lines.next() {
        return Err(DecodeError::TrailingData { line });
    }

    let t = Trajectory {
        run_id: header.run_id,
        max_steps: header.max_steps,
        query: header.query,
        meta: header.meta,
        meta_turns: header.meta_turns,
        steps,
        dangling_turns: footer.dangling_turns,
        status: footer.status,
        wall_time: footer.wall_time,
    };
    if footer.steps != t.steps.len() {
        return Err(DecodeError::Inconsistent(format!(
            "END declares {} steps, found {}",
            footer.steps,
            t.steps.len()
        )));
    }
    if footer.llm_calls != t.llm_calls() || footer.tool_calls != t.tool_calls() {
        return Err(DecodeError::Inconsistent(
            "END call counters disagree with step records".to_string(),
        ));
    }
    t.check_invariants().map_err(DecodeError::Inconsistent)?;
    Ok(t)
}

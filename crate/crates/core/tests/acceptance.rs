//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the output.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use finagent::catalog::{ingest_catalog, Catalog};
use finagent::eval::{compute_metrics, export_sft, split_dataset, HelpfulnessScore};
use finagent::fixture;
use finagent::llm::{parse_action, parse_agent_meta, parse_reflexion, ParseFailure, ScriptedBackend};
use finagent::model::log::{decode_trajectory, encode_trajectory};
use finagent::model::{
    ActionKind, ActionRequest, AgentMeta, InterruptCause, LlmTurn, Observation, OverallPlan, PlanStep, Profile,
    Query, ReflexionOutcome, StepRecord, TaskKind, TerminationStatus, Trajectory, Verdict,
};
use finagent::orchestrator::{Engine, FixedClock, OrchestratorConfig};
use finagent::sandbox::{execute, RuntimeCommand, SandboxConfig, SandboxLimits, TRUNCATION_SENTINEL};
use finagent::search::bench::{evaluate, parse_bench_queries, Method};
use finagent::search::{cosine_topk, index_catalog, HashEmbedder, VectorIndex};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn shipped(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

struct World {
    catalog: Catalog,
    index: VectorIndex,
    embedder: HashEmbedder,
}

fn world() -> World {
    let catalog = ingest_catalog(&shipped(fixture::CATALOG_FILE)).expect("shipped catalog ingests");
    let embedder = HashEmbedder::default();
    let index = index_catalog(&catalog, &embedder).expect("catalog indexes");
    World { catalog, index, embedder }
}

fn engine(w: &World, config: OrchestratorConfig) -> Engine<'_> {
    Engine::new(&w.catalog, &w.index, &w.embedder, config).with_clock(Arc::new(FixedClock(0.0)))
}

fn determinism() -> Outcome {
    let w = world();
    let transcript = shipped(fixture::TRANSCRIPT_FILE);
    let mut logs = Vec::new();
    let mut slowest = Duration::ZERO;
    for _ in 0..2 {
        let start = Instant::now();
        let out = fixture::run_golden(engine(&w, OrchestratorConfig::default()), &transcript).map_err(|e| e.to_string())?;
        ensure(out.trajectory.status.is_finished(), || format!("golden run ended {}", out.trajectory.status))?;
        logs.push(encode_trajectory(&out.trajectory));
        slowest = slowest.max(start.elapsed());
    }
    ensure(logs[0] == logs[1], || "two golden runs differ".into())?;
    ensure(logs[0] == shipped(fixture::GOLDEN_LOG_FILE), || "golden run differs from shipped golden.log".into())?;
    ensure(slowest < Duration::from_secs(5), || format!("a run took {slowest:?}"))?;
    Ok(format!("2 runs byte-identical to golden.log ({} bytes), slowest {slowest:.2?}", logs[0].len()))
}

fn meta_text() -> String {
    finagent::llm::meta_envelope(&fixture::golden_meta())
}

fn select_text() -> String {
    r#"{"kind":"api-select","category":"Stock","task":"NVIDIA price history"}"#.into()
}

fn proceed_text() -> String {
    r#"{"summary":"continuing","verdict":"proceed"}"#.into()
}

const GARBAGE: [&str; 5] = [
    r#"{"kind": "api-select", "category": "Stock""#,
    "I think we should look at the stock price next.",
    r#"{"kind": "api-call", "name": "stock_us_hist"}"#,
    r#"{"kind": "api-details"}"#,
    r#"{"summary": "ok", "verdict": "maybe"}"#,
];

struct Fault {
    label: String,
    expected: InterruptCause,
    config: OrchestratorConfig,
    responses: Vec<String>,
}

fn healthy_steps(n: u32) -> Vec<String> {
    (0..n).flat_map(|_| [select_text(), proceed_text()]).collect()
}

fn faults() -> Vec<Fault> {
    let mut out = Vec::new();
    for l in 1..=10u32 {
        let mut responses = vec![meta_text()];
        responses.extend(healthy_steps(l + 2));
        out.push(Fault {
            label: format!("never finishes, L={l}"),
            expected: InterruptCause::StepBudgetExceeded,
            config: OrchestratorConfig {
                max_steps: l,
                ..OrchestratorConfig::default()
            },
            responses,
        });
    }
    out.push(Fault {
        label: "garbage meta twice".into(),
        expected: InterruptCause::ParseFailure,
        config: OrchestratorConfig::default(),
        responses: vec![GARBAGE[0].into(), GARBAGE[1].into()],
    });
    for k in 1..=10u32 {
        let mut responses = vec![meta_text()];
        responses.extend(healthy_steps(k - 1));
        responses.push(GARBAGE[k as usize % 5].into());
        responses.push(GARBAGE[(k as usize + 1) % 5].into());
        out.push(Fault {
            label: format!("garbage action twice at step {k}"),
            expected: InterruptCause::ParseFailure,
            config: OrchestratorConfig::default(),
            responses,
        });
    }
    for k in 1..=9u32 {
        let mut responses = vec![meta_text()];
        responses.extend(healthy_steps(k - 1));
        responses.push(select_text());
        responses.push(GARBAGE[4].into());
        responses.push(GARBAGE[k as usize % 4].into());
        out.push(Fault {
            label: format!("garbage reflexion twice at step {k}"),
            expected: InterruptCause::ParseFailure,
            config: OrchestratorConfig::default(),
            responses,
        });
    }
    out.push(Fault {
        label: "context budget below the meta prompt".into(),
        expected: InterruptCause::PromptOverflow,
        config: OrchestratorConfig {
            llm: finagent::llm::LlmConfig {
                context_budget: 50,
                ..Default::default()
            },
            ..OrchestratorConfig::default()
        },
        responses: vec![meta_text()],
    });
    for k in 1..=10u32 {
        let mut responses = vec![meta_text()];
        responses.extend(healthy_steps(k - 1));
        responses.push(r#"{"kind":"code-exec","code":"print('x' * 100000)\n"}"#.into());
        responses.push(proceed_text());
        out.push(Fault {
            label: format!("oversized observation at step {k}"),
            expected: InterruptCause::PromptOverflow,
            config: OrchestratorConfig::default(),
            responses,
        });
    }
    out
}

fn interrupt_taxonomy() -> Outcome {
    let w = world();
    let faults = faults();
    let mut per_cause: BTreeMap<InterruptCause, usize> = BTreeMap::new();
    for f in &faults {
        let backend = ScriptedBackend::from_responses(f.responses.clone());
        let t = engine(&w, f.config.clone())
            .run(&fixture::golden_query(), &backend)
            .map_err(|e| format!("{}: {e}", f.label))?
            .trajectory;
        ensure(t.status.cause() == Some(f.expected), || {
            format!("{}: expected {}, got {}", f.label, f.expected, t.status)
        })?;
        ensure(t.steps.len() <= 10 && t.steps.len() <= f.config.max_steps as usize, || {
            format!("{}: {} steps", f.label, t.steps.len())
        })?;
        t.check_invariants().map_err(|e| format!("{}: {e}", f.label))?;
        *per_cause.entry(f.expected).or_default() += 1;
    }
    ensure(faults.len() >= 30, || format!("only {} fault runs", faults.len()))?;
    let detail: Vec<String> = per_cause.iter().map(|(c, n)| format!("{c}={n}")).collect();
    Ok(format!("{} fault runs, all matched ({})", faults.len(), detail.join(" ")))
}

fn oracle_cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
    let norm = |v: &[f32]| v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn retrieval_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dim = 64;
    let mut vectors: Vec<(String, Vec<f32>)> = Vec::new();
    for i in 0..900 {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        vectors.push((format!("tool_{:04}", (i * 7919) % 10007), v));
    }
    // exact duplicates under other names force ties
    for i in 0..100 {
        let v = vectors[i * 3].1.clone();
        vectors.push((format!("dup_{:03}_{}", 99 - i, i), v));
    }
    let mut index = VectorIndex::new(dim);
    for (name, v) in &vectors {
        index.push(name.clone(), "c", v.clone()).map_err(|e| e.to_string())?;
    }
    let mut queries: Vec<Vec<f32>> = (0..30).map(|i| vectors[i * 3].1.clone()).collect();
    queries.extend((0..30).map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect::<Vec<f32>>()));

    let mut elapsed = Duration::ZERO;
    let mut tied = 0;
    for (qi, q) in queries.iter().enumerate() {
        let mut all: Vec<(f64, &str)> = vectors.iter().map(|(n, v)| (oracle_cosine(v, q), n.as_str())).collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        for k in [5, 10] {
            let start = Instant::now();
            let got = cosine_topk(&index, q, k).map_err(|e| e.to_string())?;
            elapsed += start.elapsed();
            let want = &all[..k];
            ensure(got.len() == k, || format!("query {qi} k={k}: {} results", got.len()))?;
            for (g, (score, name)) in got.iter().zip(want) {
                ensure(g.name == *name && (g.similarity - score).abs() < 1e-12, || {
                    format!("query {qi} k={k}: got {} {}, want {name} {score}", g.name, g.similarity)
                })?;
            }
            tied += want.windows(2).filter(|p| p[0].0 == p[1].0).count();
        }
    }
    ensure(tied > 0, || "fixture produced no ties".into())?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} queries x k in {{5,10}} over 1000 vectors equal the full-sort oracle ({tied} tied pairs), {elapsed:.2?}",
        queries.len()
    ))
}

fn hybrid_dominance() -> Outcome {
    let w = world();
    ensure(w.catalog.specific_total() == 642, || format!("{} specific tools", w.catalog.specific_total()))?;
    let queries = parse_bench_queries(&shipped(fixture::QUERIES_FILE))?;
    let rows = evaluate(&w.catalog, &w.index, &w.embedder, &queries, &[5, 10]).map_err(|e| e.to_string())?;
    let get = |m: Method| rows.iter().find(|r| r.method == m).expect("every method scored");
    let (emb, hyb) = (get(Method::Embedding), get(Method::CategoryEmbedding));
    ensure(hyb.scores[0].all_right_rate > emb.scores[0].all_right_rate, || {
        format!(
            "category+embedding {:.2} not above embedding {:.2} at Top5",
            hyb.scores[0].all_right_rate, emb.scores[0].all_right_rate
        )
    })?;
    for r in &rows {
        let (t5, t10) = (&r.scores[0], &r.scores[1]);
        ensure(
            t10.all_right_rate >= t5.all_right_rate && t10.all_wrong_rate <= t5.all_wrong_rate,
            || format!("{} not monotone: {t5:?} vs {t10:?}", r.method),
        )?;
    }
    Ok(format!(
        "Top5 all_right {:.2} (category+embedding) > {:.2} (embedding) over {} queries; monotone on all methods",
        hyb.scores[0].all_right_rate,
        emb.scores[0].all_right_rate,
        queries.len()
    ))
}

fn synthetic_run(id: &str, status: TerminationStatus, llm: u32, tool: u32) -> Trajectory {
    let turn = LlmTurn {
        task: TaskKind::ActionTaking,
        prompt: "p".into(),
        response: "r".into(),
        adopted: true,
        error: None,
    };
    Trajectory {
        run_id: id.into(),
        max_steps: 10,
        query: Query::new(id, "q"),
        meta: None,
        meta_turns: vec![turn],
        steps: vec![StepRecord {
            step_index: 1,
            request: ActionRequest::Finish { answer: "a".into() },
            observation: Observation::success(ActionKind::Finish, ""),
            reflexion: None,
            llm_calls: llm - 1,
            tool_calls: tool,
            turns: Vec::new(),
        }],
        dangling_turns: Vec::new(),
        status,
        wall_time: 0.0,
    }
}

fn metric_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut runs = Vec::new();
    let mut scores = Vec::new();
    // ground truth kept alongside the generated runs
    let mut truth: Vec<(bool, Vec<u8>, u32, u32)> = Vec::new();
    let mut causes: BTreeMap<InterruptCause, usize> = BTreeMap::new();
    for i in 0..200 {
        let id = format!("run-{i:03}");
        let finished = rng.random_bool(0.7);
        let status = if finished {
            TerminationStatus::Finished
        } else {
            let cause = *InterruptCause::ALL.choose(&mut rng).expect("non-empty");
            *causes.entry(cause).or_default() += 1;
            TerminationStatus::Interrupted { cause }
        };
        let (llm, tool) = (rng.random_range(1..=25u32), rng.random_range(0..=12u32));
        let raters = rng.random_range(1..=3);
        let given: Vec<u8> = (0..raters).map(|_| rng.random_range(0..=3u8)).collect();
        if finished || rng.random_bool(0.5) {
            for (r, s) in given.iter().enumerate() {
                scores.push(HelpfulnessScore {
                    query_id: id.clone(),
                    rater_id: format!("r{r}"),
                    score: *s,
                });
            }
        }
        runs.push(synthetic_run(&id, status, llm, tool));
        truth.push((finished, given, llm, tool));
    }

    let report = compute_metrics(&runs, &scores).map_err(|e| e.to_string())?;
    let n = truth.len() as f64;
    let finished = truth.iter().filter(|t| t.0).count();
    let best = truth
        .iter()
        .filter(|(f, s, _, _)| *f && 2 * s.iter().map(|&v| u32::from(v)).sum::<u32>() >= 5 * s.len() as u32)
        .count();
    let helpful = truth
        .iter()
        .rev()
        .filter(|t| t.0)
        .map(|(_, s, _, _)| f64::from(s.iter().map(|&v| u32::from(v)).sum::<u32>()) / s.len() as f64)
        .fold(0.0, |acc, m| acc + m / n);
    let freq_llm = f64::from(truth.iter().map(|t| t.2).sum::<u32>()) / n;
    let freq_tool = f64::from(truth.iter().map(|t| t.3).sum::<u32>()) / n;
    let columns = [
        ("best", report.best_rate, 100.0 * best as f64 / n),
        ("helpful", report.helpful, helpful),
        ("robust", report.robust, 100.0 * finished as f64 / n),
        ("freq_tool", report.freq_tool, freq_tool),
        ("freq_llm", report.freq_llm, freq_llm),
    ];
    for (name, got, want) in columns {
        ensure((got - want).abs() <= 1e-9, || format!("{name}: got {got}, oracle {want}"))?;
    }
    for cause in InterruptCause::ALL {
        let want = causes.get(&cause).copied().unwrap_or(0);
        ensure(report.interrupt_breakdown.get(&cause) == Some(&want), || format!("breakdown {cause}"))?;
    }

    for (value, expect) in [(3u8, 3.0), (0u8, 0.0)] {
        let runs: Vec<_> = (0..10).map(|i| synthetic_run(&format!("e{i}"), TerminationStatus::Finished, 2, 1)).collect();
        let scores: Vec<_> = (0..10)
            .flat_map(|i| {
                (0..3).map(move |r| HelpfulnessScore {
                    query_id: format!("e{i}"),
                    rater_id: format!("r{r}"),
                    score: value,
                })
            })
            .collect();
        let r = compute_metrics(&runs, &scores).map_err(|e| e.to_string())?;
        ensure(r.helpful == expect, || format!("all-{value} rubric gives helpful {}", r.helpful))?;
    }
    Ok(format!(
        "200 runs match the recount on all five columns (robust {:.1}, helpful {:.4}); endpoints 3.0 and 0.0 exact",
        report.robust, report.helpful
    ))
}

// Envelope generation, independent of the library serializers.

#[derive(Debug, Clone, PartialEq)]
enum Envelope {
    Meta(AgentMeta),
    Action(ActionRequest),
    Reflexion(ReflexionOutcome),
}

impl Envelope {
    fn reparse(&self, text: &str) -> Result<Envelope, ParseFailure> {
        match self {
            Envelope::Meta(_) => parse_agent_meta(text).map(Envelope::Meta),
            Envelope::Action(_) => parse_action(text).map(Envelope::Action),
            Envelope::Reflexion(_) => parse_reflexion(text).map(Envelope::Reflexion),
        }
    }
}

const KINDS: [(ActionKind, &str); 5] = [
    (ActionKind::ApiSelect, "api-select"),
    (ActionKind::ApiDetails, "api-details"),
    (ActionKind::CodeExec, "code-exec"),
    (ActionKind::WebSearch, "web-search"),
    (ActionKind::Finish, "finish"),
];

fn text(rng: &mut ChaCha8Rng) -> String {
    const PIECES: [&str; 14] = [
        "price", "NVIDIA", "trend", "\"quoted\"", "back\\slash", "line\nbreak", "tab\there", "é", "→", "{brace}",
        "[list]", "50%", "::", "```",
    ];
    let n = rng.random_range(1..=5);
    let mut words = vec!["w".to_string()];
    words.extend((0..n).map(|_| PIECES.choose(rng).expect("non-empty").to_string()));
    words.join(" ")
}

fn gen_plan(rng: &mut ChaCha8Rng) -> (OverallPlan, Value) {
    let n = rng.random_range(1..=8u32);
    let mut steps = Vec::new();
    let mut values = Vec::new();
    for i in 1..=n {
        let (kind, name) = if i == n { KINDS[4] } else { KINDS[rng.random_range(0..5)] };
        let goal = text(rng);
        values.push(json!({"step": i, "action": name, "goal": goal}));
        steps.push(PlanStep {
            index: i,
            action: kind,
            goal,
        });
    }
    (OverallPlan { steps, revision: 0 }, Value::Array(values))
}

fn gen_envelope(rng: &mut ChaCha8Rng) -> (Envelope, Value) {
    match rng.random_range(0..3) {
        0 => {
            let (plan, plan_value) = gen_plan(rng);
            let abilities: Vec<String> = (0..rng.random_range(1..=4)).map(|_| text(rng)).collect();
            let profile = Profile {
                role_name: text(rng),
                description: text(rng),
                abilities,
            };
            let value = json!({
                "profile": {
                    "role_name": profile.role_name,
                    "description": profile.description,
                    "abilities": profile.abilities,
                },
                "plan": plan_value,
            });
            (Envelope::Meta(AgentMeta { profile, plan }), value)
        }
        1 => {
            let arg = text(rng);
            let (request, value) = match rng.random_range(0..5) {
                0 => {
                    let task = text(rng);
                    let v = json!({"kind": "api-select", "category": arg, "task": task});
                    (ActionRequest::ApiSelect { category: arg, task }, v)
                }
                1 => (ActionRequest::ApiDetails { name: arg.clone() }, json!({"kind": "api-details", "name": arg})),
                2 => (ActionRequest::CodeExec { code: arg.clone() }, json!({"kind": "code-exec", "code": arg})),
                3 => (ActionRequest::WebSearch { query: arg.clone() }, json!({"kind": "web-search", "query": arg})),
                _ => (ActionRequest::Finish { answer: arg.clone() }, json!({"kind": "finish", "answer": arg})),
            };
            (Envelope::Action(request), value)
        }
        _ => {
            let summary = text(rng);
            if rng.random_bool(0.5) {
                let value = json!({"summary": summary, "verdict": "proceed"});
                let outcome = ReflexionOutcome {
                    summary,
                    verdict: Verdict::Proceed,
                    revised_plan: None,
                };
                (Envelope::Reflexion(outcome), value)
            } else {
                let (plan, plan_value) = gen_plan(rng);
                let value = json!({"summary": summary, "verdict": "revise", "plan": plan_value});
                let outcome = ReflexionOutcome {
                    summary,
                    verdict: Verdict::Revise,
                    revised_plan: Some(plan),
                };
                (Envelope::Reflexion(outcome), value)
            }
        }
    }
}

fn render(rng: &mut ChaCha8Rng, value: &Value) -> String {
    let body = if rng.random_bool(0.5) {
        serde_json::to_string(value).expect("serializes")
    } else {
        serde_json::to_string_pretty(value).expect("serializes")
    };
    match rng.random_range(0..4) {
        0 => format!("```json\n{body}\n```"),
        1 => format!("```\n{body}\n```\n"),
        2 => format!("  \n{body}\n\n"),
        _ => body,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Punct(char),
    Str(String),
    Scalar(String),
}

impl Token {
    fn raw(&self) -> String {
        match self {
            Token::Punct(c) => c.to_string(),
            Token::Str(s) | Token::Scalar(s) => s.clone(),
        }
    }
}

/// JSON lexer over compact serde_json output.
fn lex(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if "{}[]:,".contains(c) {
            out.push(Token::Punct(c));
            i += 1;
        } else if c == '"' {
            let start = i;
            i += 1;
            while chars[i] != '"' {
                i += if chars[i] == '\\' { 2 } else { 1 };
            }
            i += 1;
            out.push(Token::Str(chars[start..i].iter().collect()));
        } else {
            let start = i;
            while i < chars.len() && !"{}[]:,".contains(chars[i]) {
                i += 1;
            }
            out.push(Token::Scalar(chars[start..i].iter().collect()));
        }
    }
    out
}

fn join(tokens: &[Token]) -> String {
    tokens.iter().map(Token::raw).collect()
}

fn is_key(tokens: &[Token], i: usize) -> bool {
    matches!(tokens[i], Token::Str(_)) && tokens.get(i + 1) == Some(&Token::Punct(':'))
}

fn key_of_value(tokens: &[Token], i: usize) -> Option<&str> {
    if i >= 2 && tokens[i - 1] == Token::Punct(':') {
        if let Token::Str(k) = &tokens[i - 2] {
            return Some(k.as_str());
        }
    }
    None
}

/// One token-level corruption; `None` when the kind does not apply.
/// The flag says whether the result is meant to parse to the same value.
fn mutate(rng: &mut ChaCha8Rng, tokens: &[Token]) -> Option<(String, String, bool)> {
    let n = tokens.len();
    let pick = |rng: &mut ChaCha8Rng, pred: &dyn Fn(usize) -> bool| -> Option<usize> {
        let idx: Vec<usize> = (0..n).filter(|&i| pred(i)).collect();
        idx.choose(rng).copied()
    };
    let value_strings = |i: usize| matches!(tokens[i], Token::Str(_)) && !is_key(tokens, i);
    let mut t = tokens.to_vec();
    let label = match rng.random_range(0..10) {
        0 => {
            let i = rng.random_range(0..n);
            t.remove(i);
            "delete token"
        }
        1 => {
            let i = rng.random_range(0..n);
            t.insert(i, tokens[i].clone());
            "duplicate token"
        }
        2 => {
            let i = pick(rng, &|i| is_key(tokens, i))?;
            t[i] = Token::Str("\"unexpected\"".into());
            "unknown key"
        }
        3 => {
            let i = pick(rng, &|i| {
                matches!(key_of_value(tokens, i), Some("\"kind\"" | "\"action\"" | "\"verdict\""))
            })?;
            t[i] = Token::Str("\"api-call\"".into());
            "invalid kind"
        }
        4 => {
            let i = pick(rng, &|i| key_of_value(tokens, i) == Some("\"step\""))?;
            let current: u32 = tokens[i].raw().parse().ok()?;
            let new = (current + rng.random_range(1..20)) % 21;
            t[i] = Token::Scalar(new.to_string());
            "renumber step"
        }
        5 => {
            let i = pick(rng, &value_strings)?;
            t[i] = Token::Str(["\"\"", "\"   \""].choose(rng).expect("non-empty").to_string());
            "empty string"
        }
        6 => {
            let i = pick(rng, &value_strings)?;
            t[i] = Token::Scalar(["7", "null", "true"].choose(rng).expect("non-empty").to_string());
            "wrong type"
        }
        7 => {
            t.truncate(rng.random_range(0..n));
            "truncate"
        }
        8 => {
            let i = pick(rng, &|i| {
                key_of_value(tokens, i).is_some()
                    && matches!(tokens[i], Token::Str(_) | Token::Scalar(_))
                    && matches!(tokens.get(i + 1), Some(Token::Punct(',' | '}')))
            })?;
            // drop `key : value` and one adjacent comma
            if tokens[i + 1] == Token::Punct(',') {
                t.drain(i - 2..=i + 1);
            } else if tokens[i - 3] == Token::Punct(',') {
                t.drain(i - 3..=i);
            } else {
                t.drain(i - 2..=i);
            }
            "drop field"
        }
        _ => {
            let spaced: Vec<String> = t
                .iter()
                .map(|tok| format!("{}{}", tok.raw(), [" ", "\n", "\t", "  \r\n", ""].choose(rng).expect("non-empty")))
                .collect();
            return Some(("whitespace".into(), spaced.concat(), true));
        }
    };
    Some((label.into(), join(&t), false))
}

fn parser_totality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut envelopes = Vec::new();
    for i in 0..1000 {
        let (expected, value) = gen_envelope(&mut rng);
        let raw = render(&mut rng, &value);
        match expected.reparse(&raw) {
            Ok(got) if got == expected => {}
            Ok(got) => return Err(format!("envelope {i} parsed to {got:?}, expected {expected:?}")),
            Err(e) => return Err(format!("envelope {i} rejected ({e}):\n{raw}")),
        }
        envelopes.push((expected, value));
    }

    let mut rejected = 0;
    let mut identical = 0;
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    let mut done = 0;
    while done < 1000 {
        let (expected, value) = envelopes.choose(&mut rng).expect("non-empty").clone();
        let tokens = lex(&serde_json::to_string(&value).expect("serializes"));
        let Some((label, corrupted, benign)) = mutate(&mut rng, &tokens) else {
            continue;
        };
        done += 1;
        *kinds.entry(label.clone()).or_default() += 1;
        let result = panic::catch_unwind(AssertUnwindSafe(|| expected.reparse(&corrupted)))
            .map_err(|_| format!("parser panicked on {label}: {corrupted}"))?;
        match result {
            Err(failure) if benign => return Err(format!("{label} was rejected ({failure}): {corrupted}")),
            Err(failure) => {
                ensure(!failure.reason.is_empty(), || format!("{label}: empty reason"))?;
                rejected += 1;
            }
            Ok(got) if got == expected => identical += 1,
            Ok(got) => return Err(format!("{label} produced a different parse: {got:?} from {corrupted}")),
        }
    }
    let kinds: Vec<String> = kinds.iter().map(|(k, n)| format!("{k}={n}")).collect();
    Ok(format!(
        "1000/1000 envelopes parse; 1000 mutations: {rejected} rejected, {identical} identical, 0 crashes ({})",
        kinds.join(", ")
    ))
}

fn sft_and_split() -> Outcome {
    let golden = decode_trajectory(&shipped(fixture::GOLDEN_LOG_FILE)).map_err(|e| e.to_string())?;
    let export = export_sft(&[golden]);
    let counts: Vec<usize> = TaskKind::ALL.iter().map(|t| export.count(*t)).collect();
    ensure(counts == [1, 3, 1, 3], || format!("SFT counts plan/action/code/summary = {counts:?}"))?;

    let queries: Vec<Query> = (0..14107).map(|i| Query::new(format!("id-{i}"), format!("question {i}"))).collect();
    let split = split_dataset(&queries, 42).map_err(|e| e.to_string())?;
    let sizes = (split.train.len(), split.eval.len(), split.test.len());
    ensure(sizes == (11285, 1410, 1412), || format!("split sizes {sizes:?}"))?;
    let ids: BTreeSet<&str> = [&split.train, &split.eval, &split.test]
        .into_iter()
        .flatten()
        .map(|q| q.id.as_str())
        .collect();
    ensure(ids.len() == 14107, || "split parts overlap or lose ids".into())?;
    Ok("SFT plan 1, action 3, code 1, summary 3; 14107 -> 11285/1410/1412".into())
}

fn sandbox_budgets() -> Outcome {
    let sh = |wall_time: f64, max_output: usize| SandboxConfig {
        runtime: RuntimeCommand {
            program: "sh".into(),
            args: vec!["{file}".into()],
        },
        script_name: "main.sh".into(),
        limits: SandboxLimits {
            wall_time,
            max_output,
            ..SandboxLimits::default()
        },
        ..SandboxConfig::default()
    };
    let start = Instant::now();
    let r = execute("while :; do :; done\n", &sh(1.0, 65536)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(r.timed_out && !r.exit_ok, || "infinite loop was not reported as timed out".into())?;
    ensure(elapsed < Duration::from_secs_f64(1.0 + 2.0), || format!("loop killed after {elapsed:?}"))?;

    let max_output = 65536;
    let r = execute("head -c 10485760 /dev/zero | tr '\\0' x\n", &sh(30.0, max_output)).map_err(|e| e.to_string())?;
    ensure(r.stdout.len() <= max_output, || format!("stdout kept {} bytes", r.stdout.len()))?;
    ensure(r.stdout.ends_with(TRUNCATION_SENTINEL), || "sentinel missing".into())?;
    ensure(r.stdout.trim_end_matches(TRUNCATION_SENTINEL).bytes().all(|b| b == b'x'), || "unexpected bytes".into())?;
    Ok(format!(
        "loop killed after {elapsed:.2?} (wall_time 1s); 10 MB stdout kept {} bytes with sentinel",
        r.stdout.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("determinism", determinism),
        ("interrupt-taxonomy", interrupt_taxonomy),
        ("retrieval-exactness", retrieval_exactness),
        ("hybrid-dominance", hybrid_dominance),
        ("metric-arithmetic", metric_arithmetic),
        ("parser-totality", parser_totality),
        ("sft-and-split", sft_and_split),
        ("sandbox-budgets", sandbox_budgets),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

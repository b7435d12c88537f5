use std::sync::Arc;

use finagent::catalog::Catalog;
use finagent::fixture;
use finagent::llm::{action_envelope, meta_envelope, parse_reflexion, ScriptedBackend};
use finagent::model::{
    ActionKind, ActionRequest, InterruptCause, Query, TaskKind, TerminationStatus, Verdict,
};
use finagent::orchestrator::{CannedSearch, Engine, FixedClock, OrchestratorConfig, RunOutput};
use finagent::search::{index_catalog, HashEmbedder, VectorIndex};

struct World {
    catalog: Catalog,
    index: VectorIndex,
    embedder: HashEmbedder,
}

fn world() -> World {
    let catalog = fixture::catalog();
    let embedder = HashEmbedder::default();
    let index = index_catalog(&catalog, &embedder).unwrap();
    World { catalog, index, embedder }
}

fn engine(w: &World, config: OrchestratorConfig) -> Engine<'_> {
    Engine::new(&w.catalog, &w.index, &w.embedder, config).with_clock(Arc::new(FixedClock(0.0)))
}

fn run(w: &World, config: OrchestratorConfig, responses: Vec<String>) -> RunOutput {
    let backend = ScriptedBackend::from_responses(responses);
    engine(w, config).run(&fixture::golden_query(), &backend).unwrap()
}

fn proceed(summary: &str) -> String {
    format!(r#"{{"summary": "{summary}", "verdict": "proceed"}}"#)
}

fn select() -> String {
    action_envelope(&ActionRequest::ApiSelect {
        category: "Stock".into(),
        task: "NVIDIA price history".into(),
    })
}

fn finish() -> String {
    action_envelope(&ActionRequest::Finish { answer: "done".into() })
}

fn meta() -> String {
    meta_envelope(&fixture::golden_meta())
}

#[test]
fn golden_run_finishes() {
    let w = world();
    let out = run(&w, OrchestratorConfig::default(), fixture::golden_responses());
    let t = &out.trajectory;
    assert_eq!(t.status, TerminationStatus::Finished);
    assert_eq!(t.steps.len(), 4);
    assert_eq!(t.llm_calls(), 8);
    assert_eq!(t.tool_calls(), 3);
    assert_eq!(out.accounting.llm_calls, t.llm_calls());
    assert_eq!(out.accounting.tool_calls, t.tool_calls());
    t.check_invariants().unwrap();

    let candidates: serde_json::Value = serde_json::from_str(&t.steps[0].observation.payload).unwrap();
    assert_eq!(candidates["path"], "embedding");
    assert!(candidates["candidates"].as_array().unwrap().iter().any(|c| c == "stock_us_hist"));
    assert_eq!(candidates["candidates"].as_array().unwrap().len(), 10);

    let exec: serde_json::Value = serde_json::from_str(&t.steps[2].observation.payload).unwrap();
    assert_eq!(exec["stdout"], "days=8 first=118.11 last=134.05 change=13.50%\nhigh=134.05 low=118.11\n");
    assert_eq!(t.steps[2].turns[0].task, TaskKind::CodeWriting);
    assert_eq!(t.steps[1].turns[0].task, TaskKind::ActionTaking);
    assert!(t.final_answer().unwrap().contains("13.50%"));
    assert_eq!(t.wall_time, 0.0);
}

#[test]
fn never_finishing_hits_step_budget() {
    let w = world();
    for l in [1u32, 3, 10] {
        let mut responses = vec![meta()];
        for _ in 0..l {
            responses.push(select());
            responses.push(proceed("more"));
        }
        let config = OrchestratorConfig {
            max_steps: l,
            ..OrchestratorConfig::default()
        };
        let t = run(&w, config, responses).trajectory;
        assert_eq!(
            t.status,
            TerminationStatus::Interrupted {
                cause: InterruptCause::StepBudgetExceeded
            }
        );
        assert_eq!(t.steps.len(), l as usize);
        t.check_invariants().unwrap();
    }
}

#[test]
fn two_malformed_envelopes_interrupt() {
    let w = world();
    let t = run(&w, OrchestratorConfig::default(), vec![meta(), "{\"kind\": ".into(), "not json".into()]).trajectory;
    assert_eq!(
        t.status,
        TerminationStatus::Interrupted {
            cause: InterruptCause::ParseFailure
        }
    );
    assert!(t.steps.is_empty());
    assert_eq!(t.dangling_turns.len(), 2);
    assert!(t.dangling_turns.iter().all(|turn| !turn.adopted));
    assert!(t.dangling_turns[1].prompt.contains("could not be parsed"));
}

#[test]
fn meta_retry_then_valid() {
    let w = world();
    let bad = meta().replace("\"finish\"", "\"web-search\"");
    let t = run(&w, OrchestratorConfig::default(), vec![bad, meta(), finish()]).trajectory;
    assert_eq!(t.status, TerminationStatus::Finished);
    assert_eq!(t.meta_turns.len(), 2);
    assert!(!t.meta_turns[0].adopted);
    assert!(t.meta_turns[1].adopted);
    assert_eq!(t.meta.as_ref().unwrap().plan.revision, 0);
    assert_eq!(t.llm_calls(), 3);
}

#[test]
fn meta_invalid_twice() {
    let w = world();
    let t = run(&w, OrchestratorConfig::default(), vec!["{}".into(), "[]".into()]).trajectory;
    assert_eq!(t.status.cause(), Some(InterruptCause::ParseFailure));
    assert!(t.meta.is_none());
    assert_eq!(t.meta_turns.len(), 2);
}

#[test]
fn unknown_api_is_a_failed_observation() {
    let w = world();
    let details = action_envelope(&ActionRequest::ApiDetails { name: "no_such_api".into() });
    let t = run(&w, OrchestratorConfig::default(), vec![meta(), details, proceed("missing"), finish()]).trajectory;
    assert_eq!(t.status, TerminationStatus::Finished);
    let obs = &t.steps[0].observation;
    assert!(!obs.ok);
    assert!(obs.error_detail.as_deref().unwrap().contains("not found"));
}

#[test]
fn direct_path_for_small_category() {
    let w = world();
    let fx = action_envelope(&ActionRequest::ApiSelect {
        category: "Foreign exchange".into(),
        task: "rates".into(),
    });
    let t = run(&w, OrchestratorConfig::default(), vec![meta(), fx, proceed("six"), finish()]).trajectory;
    let payload: serde_json::Value = serde_json::from_str(&t.steps[0].observation.payload).unwrap();
    assert_eq!(payload["path"], "direct");
    assert_eq!(payload["candidates"].as_array().unwrap().len(), 6);
}

#[test]
fn code_exec_echo() {
    let w = world();
    let code = action_envelope(&ActionRequest::CodeExec {
        code: "print('hello')\nprint(6 * 7)\n".into(),
    });
    let t = run(&w, OrchestratorConfig::default(), vec![meta(), code, proceed("ran"), finish()]).trajectory;
    let obs = &t.steps[0].observation;
    assert!(obs.ok);
    assert!(obs.payload.contains("hello\\n42\\n"));
}

#[test]
fn failing_code_is_observed_not_fatal() {
    let w = world();
    let code = action_envelope(&ActionRequest::CodeExec {
        code: "raise ValueError('boom')\n".into(),
    });
    let t = run(&w, OrchestratorConfig::default(), vec![meta(), code, proceed("failed"), finish()]).trajectory;
    let obs = &t.steps[0].observation;
    assert!(!obs.ok);
    assert_eq!(obs.error_detail.as_deref(), Some("exit code 1"));
    assert_eq!(t.status, TerminationStatus::Finished);
}

#[test]
fn artifacts_are_copied_per_step() {
    let w = world();
    let root = tempfile::tempdir().unwrap();
    let config = OrchestratorConfig {
        artifact_root: Some(root.path().to_path_buf()),
        ..OrchestratorConfig::default()
    };
    let code = action_envelope(&ActionRequest::CodeExec {
        code: "open('chart.png', 'wb').write(b'png')\n".into(),
    });
    let t = run(&w, config, vec![meta(), code, proceed("saved"), finish()]).trajectory;
    assert_eq!(t.steps[0].observation.artifacts[0].name, "chart.png");
    assert!(root.path().join("golden-nvda/1/chart.png").exists());
}

#[test]
fn web_search_with_and_without_provider() {
    let w = world();
    let search = action_envelope(&ActionRequest::WebSearch {
        query: "nvidia news".into(),
    });
    let responses = vec![meta(), search, proceed("searched"), finish()];
    let t = run(&w, OrchestratorConfig::default(), responses.clone()).trajectory;
    assert!(!t.steps[0].observation.ok);

    let canned = CannedSearch::from_json(
        r#"{"nvidia news": [{"title": "Chips", "url": "https://example.com", "snippet": "Demand is strong."}]}"#,
    )
    .unwrap();
    let backend = ScriptedBackend::from_responses(responses);
    let t = engine(&w, OrchestratorConfig::default())
        .with_web_search(&canned)
        .run(&fixture::golden_query(), &backend)
        .unwrap()
        .trajectory;
    assert!(t.steps[0].observation.ok);
    assert!(t.steps[0].observation.payload.contains("Demand is strong."));
}

#[test]
fn revise_replaces_remaining_steps() {
    let w = world();
    let revise = r#"{"summary": "need docs first", "verdict": "revise", "plan": [{"step": 1, "action": "web-search", "goal": "look for news"}, {"step": 2, "action": "finish", "goal": "answer"}]}"#;
    let t = run(&w, OrchestratorConfig::default(), vec![meta(), select(), revise.into(), finish()]).trajectory;
    let r = t.steps[0].reflexion.as_ref().unwrap();
    assert_eq!(r.verdict, Verdict::Revise);
    let plan = r.revised_plan.as_ref().unwrap();
    assert_eq!(plan.revision, 1);
    let kinds: Vec<_> = plan.steps.iter().map(|s| (s.index, s.action)).collect();
    assert_eq!(
        kinds,
        [(1, ActionKind::ApiSelect), (2, ActionKind::WebSearch), (3, ActionKind::Finish)]
    );
    assert_eq!(t.current_plan().unwrap(), plan);
    assert!(t.steps[1].turns[0].prompt.contains("(revision 1)"));
}

#[test]
fn revise_with_invalid_plan_twice() {
    let w = world();
    let bad = r#"{"summary": "s", "verdict": "revise", "plan": [{"step": 1, "action": "api-details", "goal": "g"}]}"#;
    assert!(parse_reflexion(bad).is_err());
    let t = run(&w, OrchestratorConfig::default(), vec![meta(), select(), bad.into(), bad.into()]).trajectory;
    assert_eq!(t.status.cause(), Some(InterruptCause::ParseFailure));
    assert_eq!(t.steps.len(), 1);
    assert!(t.steps[0].reflexion.is_none());
    assert_eq!(t.steps[0].llm_calls, 3);
    t.check_invariants().unwrap();
}

#[test]
fn oversized_prompt_overflows() {
    let w = world();
    let config = OrchestratorConfig {
        llm: finagent::llm::LlmConfig {
            context_budget: 50,
            ..Default::default()
        },
        ..OrchestratorConfig::default()
    };
    let t = run(&w, config, vec![meta()]).trajectory;
    assert_eq!(t.status.cause(), Some(InterruptCause::PromptOverflow));
    assert_eq!(t.llm_calls(), 0);
}

#[test]
fn large_observation_overflows_reflexion() {
    let w = world();
    let code = action_envelope(&ActionRequest::CodeExec {
        code: "print('x' * 100000)\n".into(),
    });
    let t = run(&w, OrchestratorConfig::default(), vec![meta(), code]).trajectory;
    assert_eq!(t.status.cause(), Some(InterruptCause::PromptOverflow));
    assert_eq!(t.steps.len(), 1);
    assert_eq!(t.steps[0].llm_calls, 1);
}

#[test]
fn later_prompts_hold_summaries_not_observations() {
    let w = world();
    let code = action_envelope(&ActionRequest::CodeExec {
        code: "print('RAW-OBSERVATION-MARKER')\n".into(),
    });
    let responses = vec![meta(), code, proceed("the script printed a marker"), select(), proceed("picked"), finish()];
    let t = run(&w, OrchestratorConfig::default(), responses).trajectory;
    assert!(t.steps[0].turns[1].prompt.contains("RAW-OBSERVATION-MARKER"));
    for step in &t.steps[1..] {
        for turn in &step.turns {
            assert!(!turn.prompt.contains("RAW-OBSERVATION-MARKER"));
            assert!(turn.prompt.contains("Step 1: the script printed a marker"));
            assert!(turn.prompt.contains("financial data analyst"));
        }
    }
    assert!(t.steps[2].turns[0].prompt.contains("Step 2: picked"));
}

#[test]
fn reflexion_can_be_disabled() {
    let w = world();
    let config = OrchestratorConfig {
        reflexion_enabled: false,
        ..OrchestratorConfig::default()
    };
    let t = run(&w, config, vec![meta(), select(), finish()]).trajectory;
    assert_eq!(t.status, TerminationStatus::Finished);
    assert!(t.steps[0].reflexion.is_none());
    assert_eq!(t.llm_calls(), 3);
}

#[test]
fn prompt_hash_drift_is_detected() {
    let w = world();
    let e = engine(&w, OrchestratorConfig::default());
    let records = fixture::record_transcript(&e, &fixture::golden_query(), &fixture::golden_responses()).unwrap();
    let text = finagent::llm::write_transcript(&records);
    let other = Query::new("golden-nvda", "Something else entirely");
    let backend = ScriptedBackend::from_jsonl(&text).unwrap().strict(true);
    let err = e.run(&other, &backend).unwrap_err();
    assert!(err.to_string().contains("prompt hash mismatch"), "{err}");
}

#[test]
fn meta_does_not_consume_the_step_budget() {
    let w = world();
    let config = OrchestratorConfig {
        max_steps: 1,
        ..OrchestratorConfig::default()
    };
    let t = run(&w, config, vec![meta(), finish()]).trajectory;
    assert_eq!(t.status, TerminationStatus::Finished);
    assert_eq!(t.steps.len(), 1);
}

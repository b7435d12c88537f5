//! `finagent` command line.
//!
//! Exit codes: 0 success or finished run, 1 runtime error, 2 usage or
//! configuration error, 3/4/5 run interrupted by step budget, parse failure
//! or prompt overflow.

mod config;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand, ValueEnum};
use finagent::catalog::{ingest_catalog, Catalog};
use finagent::eval::{
    compute_metrics, export_sft_logs, parse_labeled_outputs, parse_scores, render_accuracy, render_report,
    report_csv, score_task_accuracy, split_dataset,
};
use finagent::llm::{HttpBackend, LlmBackend, PromptSet, ScriptedBackend};
use finagent::model::log::{decode_trajectory, encode_trajectory};
use finagent::model::{InterruptCause, Query, TerminationStatus};
use finagent::orchestrator::{CannedSearch, Clock, Engine, FixedClock, SystemClock};
use finagent::search::bench::{evaluate, parse_bench_queries, render_grid};
use finagent::search::{index_catalog, HashEmbedder, VectorIndex};

use config::CliConfig;

#[derive(Parser)]
#[command(name = "finagent", version, about = "Agent orchestration engine")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Scripted,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a tool catalog and print per-category counts.
    Ingest {
        #[arg(long)]
        catalog: PathBuf,
    },
    /// Score retrieval methods against labeled queries.
    SearchEval {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,10")]
        top: Vec<usize>,
    },
    /// Run one query and write its trajectory log.
    Run {
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "q1")]
        id: String,
        /// Query metadata entry, repeatable.
        #[arg(long = "meta", value_name = "KEY=VALUE", value_parser = parse_meta)]
        metadata: Vec<(String, String)>,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, value_enum, default_value = "scripted")]
        backend: BackendKind,
        /// Response transcript for the scripted backend.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Reject transcript records whose prompt hash differs.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        max_steps: Option<u32>,
        /// Log destination; stdout when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Canned web-search results (JSON).
        #[arg(long)]
        web_results: Option<PathBuf>,
        /// Directory of prompt template overrides.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Directory receiving code-execution artifacts.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Run many queries concurrently, one log per query.
    BatchRun {
        /// JSON lines of `{"id", "text", "metadata"?}`.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, value_enum, default_value = "scripted")]
        backend: BackendKind,
        /// Directory holding `<id>.jsonl` transcripts.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        #[arg(long)]
        web_results: Option<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Compute run metrics from logs and helpfulness scores.
    Eval {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
    /// Export fine-tuning records from logs, one file per task.
    ExportSft {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deduplicate and split queries 8:1:1.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-task accuracy of labeled model outputs.
    TaskAccuracy {
        #[arg(long)]
        labels: PathBuf,
        /// Judge code records by executing them in the sandbox.
        #[arg(long)]
        run_code: bool,
    },
    /// Regenerate the shipped fixture files.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type CmdResult = Result<ExitCode, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn runtime(msg: impl ToString) -> Failure {
    Failure::Runtime(msg.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = CliConfig::load(cli.config.as_deref())
        .map_err(Failure::Usage)
        .and_then(|config| dispatch(cli.command, config));
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command, config: CliConfig) -> CmdResult {
    match command {
        Command::Ingest { catalog } => {
            let catalog = load_catalog(&catalog)?;
            print!("{}", catalog.count_report());
            Ok(ExitCode::SUCCESS)
        }
        Command::SearchEval { catalog, queries, top } => search_eval(&config, &catalog, &queries, &top),
        Command::Run {
            query,
            id,
            metadata,
            catalog,
            backend,
            transcript,
            strict,
            max_steps,
            log,
            web_results,
            templates,
            artifacts,
        } => {
            let setup = Setup::new(config, &catalog, max_steps, web_results, templates, artifacts)?;
            let backend = match backend {
                BackendKind::Scripted => {
                    let path = transcript.ok_or_else(|| usage("--transcript is required with --backend scripted"))?;
                    Backend::Scripted(load_transcript(&path, strict)?)
                }
                BackendKind::Http => Backend::Http(HttpBackend::new(setup.config.http.clone())),
            };
            let mut query = Query::new(id, query);
            query.metadata.extend(metadata);
            let out = setup.run(&query, &backend)?;
            let text = encode_trajectory(&out);
            match log {
                Some(path) => fs::write(&path, &text).map_err(|e| runtime(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            eprintln!(
                "{}: {} steps={} llm_calls={} tool_calls={}",
                out.run_id,
                out.status,
                out.steps.len(),
                out.llm_calls(),
                out.tool_calls()
            );
            Ok(status_code(out.status))
        }
        Command::BatchRun {
            queries,
            catalog,
            backend,
            transcripts,
            strict,
            logs,
            jobs,
            web_results,
            templates,
            artifacts,
        } => {
            let setup = Setup::new(config, &catalog, None, web_results, templates, artifacts)?;
            let queries = load_queries(&queries)?;
            if backend == BackendKind::Scripted && transcripts.is_none() {
                return Err(usage("--transcripts is required with --backend scripted"));
            }
            if jobs == 0 {
                return Err(usage("--jobs must be at least 1"));
            }
            fs::create_dir_all(&logs).map_err(|e| runtime(format!("{}: {e}", logs.display())))?;
            batch_run(&setup, &queries, backend, transcripts.as_deref(), strict, &logs, jobs)
        }
        Command::Eval {
            logs,
            scores,
            report,
            csv,
        } => {
            let runs = read_logs(&logs)?
                .into_iter()
                .map(|(name, text)| decode_trajectory(&text).map_err(|e| runtime(format!("{name}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let scores = parse_scores(&read(&scores)?).map_err(runtime)?;
            let metrics = compute_metrics(&runs, &scores).map_err(runtime)?;
            let text = if csv { report_csv(&metrics) } else { render_report(&metrics) };
            print!("{text}");
            if let Some(path) = report {
                fs::write(&path, &text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportSft { logs, out } => {
            let export = export_sft_logs(&read_logs(&logs)?);
            write_files(&out, &export.files())?;
            for (name, reason) in &export.skipped {
                eprintln!("skipped {name}: {reason}");
            }
            for (task, records) in &export.records {
                println!("{}: {}", task.short_name(), records.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Split { input, seed, out } => {
            let queries = load_queries(&input)?;
            let split = split_dataset(&queries, seed).map_err(runtime)?;
            println!(
                "train={} eval={} test={} duplicates_removed={}",
                split.train.len(),
                split.eval.len(),
                split.test.len(),
                split.duplicates_removed
            );
            if let Some(out) = out {
                let jsonl = |qs: &[Query]| -> String {
                    qs.iter()
                        .map(|q| serde_json::to_string(q).expect("queries serialize") + "\n")
                        .collect()
                };
                write_files(
                    &out,
                    &[
                        ("train.jsonl".into(), jsonl(&split.train)),
                        ("eval.jsonl".into(), jsonl(&split.eval)),
                        ("test.jsonl".into(), jsonl(&split.test)),
                    ],
                )?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::TaskAccuracy { labels, run_code } => {
            let records = parse_labeled_outputs(&read(&labels)?).map_err(runtime)?;
            let sandbox = run_code.then_some(&config.sandbox);
            let rows = score_task_accuracy(&records, sandbox).map_err(runtime)?;
            print!("{}", render_accuracy(&rows));
            Ok(ExitCode::SUCCESS)
        }
        Command::Fixtures { out } => {
            let files = finagent::fixture::fixture_files().map_err(runtime)?;
            write_files(&out, &files)?;
            for (name, _) in &files {
                println!("wrote {}", out.join(name).display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_meta(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

fn status_code(status: TerminationStatus) -> ExitCode {
    match status.cause() {
        None => ExitCode::SUCCESS,
        Some(InterruptCause::StepBudgetExceeded) => ExitCode::from(3),
        Some(InterruptCause::ParseFailure) => ExitCode::from(4),
        Some(InterruptCause::PromptOverflow) => ExitCode::from(5),
    }
}

/// Reads an input named on the command line; a missing file is a usage error.
fn read(path: &Path) -> Result<String, Failure> {
    if !path.exists() {
        return Err(usage(format!("{}: no such file", path.display())));
    }
    fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn load_catalog(path: &Path) -> Result<Catalog, Failure> {
    ingest_catalog(&read(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn load_queries(path: &Path) -> Result<Vec<Query>, Failure> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| runtime(format!("{}: line {}: {e}", path.display(), i + 1))))
        .collect()
}

fn load_transcript(path: &Path, strict: bool) -> Result<ScriptedBackend, Failure> {
    ScriptedBackend::from_jsonl(&read(path)?)
        .map(|b| b.strict(strict))
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

/// `(file name, contents)` of every `*.log` in `dir`, sorted by name.
fn read_logs(dir: &Path) -> Result<Vec<(String, String)>, Failure> {
    if !dir.is_dir() {
        return Err(usage(format!("{}: not a directory", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| runtime(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "log"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, read(&p)?))
        })
        .collect()
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn search_eval(config: &CliConfig, catalog: &Path, queries: &Path, top: &[usize]) -> CmdResult {
    if top.is_empty() || top.contains(&0) {
        return Err(usage("--top values must be positive"));
    }
    let catalog = load_catalog(catalog)?;
    let queries = parse_bench_queries(&read(queries)?).map_err(|e| runtime(format!("{}: {e}", queries.display())))?;
    let embedder = HashEmbedder::new(config.engine.embedding_dim);
    let index = index_catalog(&catalog, &embedder).map_err(runtime)?;
    let rows = evaluate(&catalog, &index, &embedder, &queries, top).map_err(runtime)?;
    print!("{}", render_grid(&rows));
    Ok(ExitCode::SUCCESS)
}

enum Backend {
    Scripted(ScriptedBackend),
    Http(HttpBackend),
}

impl Backend {
    fn as_dyn(&self) -> &dyn LlmBackend {
        match self {
            Backend::Scripted(b) => b,
            Backend::Http(b) => b,
        }
    }

    /// Scripted runs replay recorded time-free logs; live runs use wall time.
    fn clock(&self) -> Arc<dyn Clock> {
        match self {
            Backend::Scripted(_) => Arc::new(FixedClock(0.0)),
            Backend::Http(_) => Arc::new(SystemClock),
        }
    }
}

/// Everything shared by the runs of one invocation.
struct Setup {
    config: CliConfig,
    catalog: Catalog,
    index: VectorIndex,
    embedder: HashEmbedder,
    prompts: PromptSet,
    web: Option<CannedSearch>,
}

impl Setup {
    fn new(
        mut config: CliConfig,
        catalog: &Path,
        max_steps: Option<u32>,
        web_results: Option<PathBuf>,
        templates: Option<PathBuf>,
        artifacts: Option<PathBuf>,
    ) -> Result<Self, Failure> {
        if let Some(n) = max_steps {
            config.engine.max_steps = n;
        }
        if artifacts.is_some() {
            config.engine.artifact_root = artifacts;
        }
        config.orchestrator().validate().map_err(|e| usage(e.to_string()))?;
        if config.engine.embedding_dim == 0 {
            return Err(usage("engine.embedding_dim must be positive"));
        }
        let catalog = load_catalog(catalog)?;
        let embedder = HashEmbedder::new(config.engine.embedding_dim);
        let index = index_catalog(&catalog, &embedder).map_err(runtime)?;
        let prompts = match templates.or_else(|| config.prompts.dir.clone()) {
            Some(dir) if !dir.is_dir() => return Err(usage(format!("{}: not a directory", dir.display()))),
            Some(dir) => PromptSet::load_dir(&dir).map_err(|e| usage(e.to_string()))?,
            None => PromptSet::default(),
        };
        let web = match web_results.or_else(|| config.web_search.canned.clone()) {
            Some(path) => {
                Some(CannedSearch::from_json(&read(&path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?)
            }
            None => None,
        };
        Ok(Self {
            config,
            catalog,
            index,
            embedder,
            prompts,
            web,
        })
    }

    fn run(&self, query: &Query, backend: &Backend) -> Result<finagent::model::Trajectory, Failure> {
        let mut engine = Engine::new(&self.catalog, &self.index, &self.embedder, self.config.orchestrator())
            .with_prompts(self.prompts.clone())
            .with_clock(backend.clock());
        if let Some(web) = &self.web {
            engine = engine.with_web_search(web);
        }
        engine
            .run(query, backend.as_dyn())
            .map(|out| out.trajectory)
            .map_err(|e| runtime(format!("run `{}`: {e}", query.id)))
    }
}

fn batch_run(
    setup: &Setup,
    queries: &[Query],
    kind: BackendKind,
    transcripts: Option<&Path>,
    strict: bool,
    logs: &Path,
    jobs: usize,
) -> CmdResult {
    let mut seen = BTreeSet::new();
    if let Some(dup) = queries.iter().find(|q| !seen.insert(q.id.as_str())) {
        return Err(runtime(format!("duplicate query id `{}`", dup.id)));
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<TerminationStatus, String>)>> = Mutex::new(Vec::new());
    let one = |q: &Query| -> Result<TerminationStatus, Failure> {
        let backend = match kind {
            BackendKind::Scripted => {
                let dir = transcripts.expect("checked by caller");
                Backend::Scripted(load_transcript(&dir.join(format!("{}.jsonl", q.id)), strict)?)
            }
            BackendKind::Http => Backend::Http(HttpBackend::new(setup.config.http.clone())),
        };
        let t = setup.run(q, &backend)?;
        let path = logs.join(format!("{}.log", q.id));
        fs::write(&path, encode_trajectory(&t)).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        Ok(t.status)
    };
    std::thread::scope(|s| {
        for _ in 0..jobs.min(queries.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(q) = queries.get(i) else { break };
                let r = one(q).map_err(|f| match f {
                    Failure::Usage(m) | Failure::Runtime(m) => m,
                });
                results.lock().expect("results lock").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(i, _)| *i);
    let mut failed = 0;
    for (i, r) in &results {
        match r {
            Ok(status) => println!("{}\t{status}", queries[*i].id),
            Err(msg) => {
                failed += 1;
                println!("{}\terror", queries[*i].id);
                eprintln!("error: {msg}");
            }
        }
    }
    let finished = results.iter().filter(|(_, r)| matches!(r, Ok(s) if s.is_finished())).count();
    println!("runs={} finished={finished} errors={failed}", results.len());
    Ok(if failed > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

//! Deterministic fixtures: a 642-tool catalog with planted retrieval
//! ground truth, its benchmark queries, and the golden scripted run.
//!
//! Synthetic tool `i` of a category is named `{prefix}_{topic}_{qualifier}`
//! with `topic = TOPICS[i % 20]` and `qualifier = QUALIFIERS[(i / 20) % 13]`,
//! and described as `"{stem} {qualifier} {topic} records"`. Every category
//! reuses the same (topic, qualifier) grid, so each benchmark query has
//! same-worded distractors in other categories and a unique answer inside
//! its own.

use std::sync::Arc;

use crate::catalog::{write_catalog, Catalog, InputParam, OutputParam, ToolSpec};
use crate::llm::{
    action_envelope, meta_envelope, prompt_sha256, reflexion_envelope, write_transcript, ScriptedBackend,
    TranscriptRecord,
};
use crate::model::log::encode_trajectory;
use crate::model::{ActionKind, ActionRequest, AgentMeta, OverallPlan, Profile, Query, ReflexionOutcome, Verdict};
use crate::orchestrator::{Engine, EngineError, FixedClock, OrchestratorConfig, RunOutput};
use crate::search::bench::{write_bench_queries, BenchQuery};
use crate::search::{index_catalog, HashEmbedder};

pub const TOPICS: [&str; 20] = [
    "dividend",
    "turnover",
    "valuation",
    "margin",
    "holdings",
    "ranking",
    "announcement",
    "earnings",
    "volume",
    "spread",
    "settlement",
    "premium",
    "momentum",
    "liquidity",
    "forecast",
    "inventory",
    "flows",
    "sentiment",
    "exposure",
    "calendar",
];

pub const QUALIFIERS: [&str; 13] = [
    "daily",
    "weekly",
    "monthly",
    "quarterly",
    "annual",
    "intraday",
    "realtime",
    "historical",
    "summary",
    "detail",
    "regional",
    "sector",
    "consolidated",
];

struct Family {
    category: &'static str,
    size: usize,
    prefix: &'static str,
    stem: &'static str,
    key: &'static str,
}

const FAMILIES: [Family; 10] = [
    Family { category: "Stock", size: 243, prefix: "stock", stem: "equity shares listed", key: "symbol" },
    Family { category: "Fund", size: 46, prefix: "fund", stem: "mutual fund portfolio", key: "fund_code" },
    Family { category: "Futures", size: 35, prefix: "futures", stem: "futures contract exchange", key: "contract" },
    Family { category: "Foreign exchange", size: 6, prefix: "fx", stem: "foreign exchange pair", key: "pair" },
    Family { category: "Index", size: 59, prefix: "index", stem: "market index constituents", key: "symbol" },
    Family { category: "Interest Rate", size: 9, prefix: "rate", stem: "interest rate benchmark", key: "tenor" },
    Family { category: "Currency", size: 3, prefix: "currency", stem: "currency reserve issuance", key: "currency" },
    Family { category: "Macroeconomics", size: 186, prefix: "macro", stem: "macroeconomic national statistics", key: "region" },
    Family { category: "Option", size: 32, prefix: "option", stem: "option contract strike", key: "underlying" },
    Family { category: "Bond", size: 23, prefix: "bond", stem: "bond coupon yield", key: "bond_code" },
];

/// Golden query text.
pub const GOLDEN_QUERY: &str = "Analyze the recent stock price trend of NVIDIA";

fn input(name: &str, type_label: &str, required: bool, description: &str) -> InputParam {
    InputParam {
        name: name.into(),
        type_label: type_label.into(),
        required,
        description: description.into(),
    }
}

fn output(name: &str, type_label: &str, description: &str) -> OutputParam {
    OutputParam {
        name: name.into(),
        type_label: type_label.into(),
        description: description.into(),
    }
}

fn date_range() -> [InputParam; 2] {
    [
        input("start_date", "str", false, "First date, YYYY-MM-DD"),
        input("end_date", "str", false, "Last date, YYYY-MM-DD"),
    ]
}

fn ohlcv() -> Vec<OutputParam> {
    vec![
        output("date", "str", "Trading day"),
        output("open", "float", "Opening price"),
        output("high", "float", "Highest price"),
        output("low", "float", "Lowest price"),
        output("close", "float", "Closing price"),
        output("volume", "int", "Shares traded"),
    ]
}

fn general_tools() -> Vec<ToolSpec> {
    vec![
        ToolSpec {
            name: "web_search".into(),
            category: "Web Search".into(),
            description: "General web search returning titles, links and snippets.".into(),
            input_params: vec![input("query", "str", true, "Search text")],
            output_params: vec![output("results", "list", "Title, url and snippet per hit")],
            usage_example: String::new(),
        },
        ToolSpec {
            name: "code_interpreter".into(),
            category: "Code Interpreter".into(),
            description: "Runs a Python program in a sandbox and returns its output and files.".into(),
            input_params: vec![input("code", "str", true, "Complete Python program")],
            output_params: vec![
                output("stdout", "str", "Captured standard output"),
                output("artifacts", "list", "Files written to the working directory"),
            ],
            usage_example: String::new(),
        },
        ToolSpec {
            name: "finish".into(),
            category: "Finish".into(),
            description: "Ends the task with the final answer.".into(),
            input_params: vec![input("answer", "str", true, "Final answer text")],
            output_params: Vec::new(),
            usage_example: String::new(),
        },
    ]
}

/// Handwritten tools replacing synthetic slots, by (category, index).
fn handwritten(category: &str, index: usize) -> Option<ToolSpec> {
    let spec = match (category, index) {
        ("Stock", 240) => ToolSpec {
            name: "stock_us_hist".into(),
            category: "Stock".into(),
            description: "US equity daily price history OHLCV for a ticker such as NVIDIA AAPL or MSFT".into(),
            input_params: [vec![input("symbol", "str", true, "Ticker, e.g. NVDA")], date_range().to_vec()].concat(),
            output_params: ohlcv(),
            usage_example: "import mockfin as sdk\ndf = sdk.stock_us_hist(symbol=\"NVDA\", start_date=\"2024-01-02\", end_date=\"2024-01-31\")\nprint(df.head())".into(),
        },
        ("Stock", 241) => ToolSpec {
            name: "stock_us_spot".into(),
            category: "Stock".into(),
            description: "US equity realtime quote snapshot last trade bid ask".into(),
            input_params: vec![input("symbol", "str", true, "Ticker, e.g. NVDA")],
            output_params: vec![output("price", "float", "Last trade"), output("change_pct", "float", "Change since previous close")],
            usage_example: "import mockfin as sdk\ndf = sdk.stock_us_spot(symbol=\"NVDA\")\nprint(df)".into(),
        },
        ("Stock", 242) => ToolSpec {
            name: "stock_individual_info".into(),
            category: "Stock".into(),
            description: "Company profile for one listed equity industry market capitalisation share count".into(),
            input_params: vec![input("symbol", "str", true, "Ticker, e.g. NVDA")],
            output_params: vec![output("item", "str", "Field name"), output("value", "str", "Field value")],
            usage_example: "import mockfin as sdk\ndf = sdk.stock_individual_info(symbol=\"NVDA\")\nprint(df)".into(),
        },
        ("Index", 58) => ToolSpec {
            name: "index_us_hist".into(),
            category: "Index".into(),
            description: "US stock index daily price history OHLCV for NASDAQ or S&P 500".into(),
            input_params: [vec![input("symbol", "str", true, "Index code, e.g. .NDX")], date_range().to_vec()].concat(),
            output_params: ohlcv(),
            usage_example: "import mockfin as sdk\ndf = sdk.index_us_hist(symbol=\".NDX\", start_date=\"2024-01-02\", end_date=\"2024-01-31\")\nprint(df.head())".into(),
        },
        _ => return None,
    };
    Some(spec)
}

fn synthetic_name(f: &Family, i: usize) -> (String, &'static str, &'static str) {
    let topic = TOPICS[i % TOPICS.len()];
    let qualifier = QUALIFIERS[(i / TOPICS.len()) % QUALIFIERS.len()];
    (format!("{}_{topic}_{qualifier}", f.prefix), topic, qualifier)
}

fn synthetic(f: &Family, i: usize) -> ToolSpec {
    let (name, topic, qualifier) = synthetic_name(f, i);
    ToolSpec {
        usage_example: format!("import mockfin as sdk\ndf = sdk.{name}({}=\"...\")\nprint(df.head())", f.key),
        name,
        category: f.category.into(),
        description: format!("{} {qualifier} {topic} records", f.stem),
        input_params: [vec![input(f.key, "str", true, "Instrument or series key")], date_range().to_vec()].concat(),
        output_params: vec![output("date", "str", "Observation date"), output("value", "float", "Reported figure")],
    }
}

/// Specs in file order: general tools, then each specific family.
pub fn catalog_specs() -> Vec<ToolSpec> {
    let mut specs = general_tools();
    for f in &FAMILIES {
        for i in 0..f.size {
            specs.push(handwritten(f.category, i).unwrap_or_else(|| synthetic(f, i)));
        }
    }
    specs
}

pub fn catalog() -> Catalog {
    Catalog::from_specs(catalog_specs()).expect("fixture catalog is valid")
}

/// Benchmark queries: for each family a spread of synthetic slots, each
/// asking for its own "{qualifier} {topic}", plus the NVIDIA history query.
pub fn bench_queries() -> Vec<BenchQuery> {
    let mut out = Vec::new();
    for f in &FAMILIES {
        let n = f.size;
        let mut picks = vec![0, 1, 2, n / 3, n / 2, 2 * n / 3, n - 1];
        picks.retain(|&i| i < n);
        picks.sort_unstable();
        picks.dedup();
        for i in picks {
            if handwritten(f.category, i).is_some() {
                continue;
            }
            let (name, topic, qualifier) = synthetic_name(f, i);
            out.push(BenchQuery {
                id: format!("{}-{i:03}", f.prefix),
                category: f.category.into(),
                task: format!("{qualifier} {topic}"),
                gold: vec![name],
            });
        }
    }
    out.push(BenchQuery {
        id: "stock-nvidia".into(),
        category: "Stock".into(),
        task: "NVIDIA price history".into(),
        gold: vec!["stock_us_hist".into()],
    });
    out
}

pub fn golden_query() -> Query {
    let mut q = Query::new("golden-nvda", GOLDEN_QUERY);
    q.metadata.insert("source".into(), "fixture".into());
    q
}

/// Program run by the golden code-exec step. Self-contained, no SDK.
pub const GOLDEN_CODE: &str = "closes = [118.11, 121.79, 120.91, 124.58, 128.44, 131.26, 129.87, 134.05]
first, last = closes[0], closes[-1]
change = 100 * (last - first) / first
print(f\"days={len(closes)} first={first:.2f} last={last:.2f} change={change:.2f}%\")
print(f\"high={max(closes):.2f} low={min(closes):.2f}\")
";

pub fn golden_meta() -> AgentMeta {
    AgentMeta {
        profile: Profile {
            role_name: "financial data analyst".into(),
            description: "Retrieves market data through financial APIs and analyses price trends.".into(),
            abilities: vec!["API selection".into(), "Python data analysis".into(), "trend reporting".into()],
        },
        plan: OverallPlan::from_actions([
            (ActionKind::ApiSelect, "find a Stock API that returns NVIDIA price history"),
            (ActionKind::ApiDetails, "read the documentation of the chosen API"),
            (ActionKind::CodeExec, "compute the change, high and low of recent closing prices"),
            (ActionKind::Finish, "summarize the trend for the user"),
        ]),
    }
}

fn proceed(summary: &str) -> String {
    reflexion_envelope(&ReflexionOutcome {
        summary: summary.into(),
        verdict: Verdict::Proceed,
        revised_plan: None,
    })
}

/// Model responses of the golden run, in call order.
pub fn golden_responses() -> Vec<String> {
    vec![
        meta_envelope(&golden_meta()),
        action_envelope(&ActionRequest::ApiSelect {
            category: "Stock".into(),
            task: "NVIDIA price history".into(),
        }),
        proceed("Embedding recall over Stock returned stock_us_hist, which serves daily OHLCV history for US tickers."),
        action_envelope(&ActionRequest::ApiDetails {
            name: "stock_us_hist".into(),
        }),
        proceed("stock_us_hist takes symbol, start_date and end_date and returns date, open, high, low, close and volume."),
        action_envelope(&ActionRequest::CodeExec {
            code: GOLDEN_CODE.into(),
        }),
        proceed("Over 8 sessions the close rose from 118.11 to 134.05 (+13.50%), high 134.05, low 118.11."),
        action_envelope(&ActionRequest::Finish {
            answer: "NVIDIA has trended upward recently: over the last 8 sessions the close rose from 118.11 to 134.05, a gain of 13.50%, with a low of 118.11 and a high of 134.05 at the latest close.".into(),
        }),
    ]
}

/// Runs `responses` through `engine` and returns them as a transcript with
/// the hash of every prompt they answered.
pub fn record_transcript(engine: &Engine<'_>, query: &Query, responses: &[String]) -> Result<Vec<TranscriptRecord>, EngineError> {
    let backend = ScriptedBackend::from_responses(responses.iter().cloned());
    let out = engine.run(query, &backend)?;
    Ok(out
        .trajectory
        .turns()
        .map(|(_, turn)| TranscriptRecord {
            response: turn.response.clone(),
            prompt_sha256: Some(prompt_sha256(&turn.prompt)),
        })
        .collect())
}

/// Runs the golden transcript against the fixture catalog with a fixed
/// clock and strict prompt checking.
pub fn run_golden(engine: Engine<'_>, transcript: &str) -> Result<RunOutput, EngineError> {
    let backend = ScriptedBackend::from_jsonl(transcript)
        .map_err(|e| EngineError::Config(e.to_string()))?
        .strict(true);
    engine.with_clock(Arc::new(FixedClock(0.0))).run(&golden_query(), &backend)
}

/// Shipped fixture files as `(file name, contents)`, regenerated from the
/// functions above. The golden log comes from actually running the golden
/// transcript, so this needs the default sandbox runtime.
pub fn fixture_files() -> Result<Vec<(String, String)>, EngineError> {
    let catalog = catalog();
    let embedder = HashEmbedder::default();
    let index = index_catalog(&catalog, &embedder).map_err(|e| EngineError::Config(e.to_string()))?;
    let engine = || {
        Engine::new(&catalog, &index, &embedder, OrchestratorConfig::default()).with_clock(Arc::new(FixedClock(0.0)))
    };
    let transcript = write_transcript(&record_transcript(&engine(), &golden_query(), &golden_responses())?);
    let log = encode_trajectory(&run_golden(engine(), &transcript)?.trajectory);
    Ok(vec![
        (CATALOG_FILE.into(), write_catalog(&catalog)),
        (QUERIES_FILE.into(), write_bench_queries(&bench_queries())),
        (TRANSCRIPT_FILE.into(), transcript),
        (GOLDEN_LOG_FILE.into(), log),
    ])
}

pub const CATALOG_FILE: &str = "tools.cat";
pub const QUERIES_FILE: &str = "search_queries.jsonl";
pub const TRANSCRIPT_FILE: &str = "golden_transcript.jsonl";
pub const GOLDEN_LOG_FILE: &str = "golden.log";

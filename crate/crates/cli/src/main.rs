//! `rrpipe`: data ingestion, indexing, single-query debugging, sweeps, and
//! reports for the retrieval pipeline toolkit.
//!
//! Machine-readable output goes to stdout; diagnostics go to stderr. Exit
//! codes: 0 success, 1 validation error, 2 runtime failure.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use rrpipe_core::analysis::AnalyzerOptions;
use rrpipe_core::corpus::{self, Qrels, Query, QuerySet};
use rrpipe_core::gateway::{
    Gateway, IdentityProvider, OracleRerankProvider, PriceTable, Provider, ReplayProvider,
    ScriptedProvider,
};
use rrpipe_core::orchestrator::{
    emit_report, run_sweep, Clock, PipelineConfig, ReportShape, RunStore, SweepGrid, SweepOptions,
};
use rrpipe_core::stages::{expand_query, rerank_listwise, CandidateDoc, ExpansionMode,
    RerankParams, Templates};
use rrpipe_core::{Bm25Index, Bm25Params};

#[derive(Parser)]
#[command(
    name = "rrpipe",
    version,
    about = "Retrieval pipeline toolkit: expansion, BM25, listwise re-ranking, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate corpus, query, and qrels files and print counts.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// Restrict counts to one subset tag.
        #[arg(long)]
        subset: Option<String>,
    },
    /// Build a BM25 index snapshot from a corpus file.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
        /// Keep stopwords instead of removing them.
        #[arg(long)]
        keep_stopwords: bool,
        /// Apply English stemming.
        #[arg(long)]
        stem: bool,
    },
    /// Search an index snapshot with a raw query.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query_text: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Run the expansion stage for one query.
    Expand {
        #[arg(long)]
        query_text: String,
        #[arg(long, default_value = "cli")]
        query_id: String,
        #[arg(long)]
        variant: String,
        #[arg(long, default_value = "concat")]
        mode: ExpansionMode,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, default_value = "mock:identity")]
        provider: String,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Re-rank a candidate file for one query and print the permutation.
    Rerank {
        #[arg(long)]
        query_text: String,
        #[arg(long, default_value = "cli")]
        query_id: String,
        /// Candidate file: one JSON record per line with doc_id and text.
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        variant: String,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, default_value = "mock:identity")]
        provider: String,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Qrels file, required by mock:oracle.
        #[arg(long)]
        qrels: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        window: usize,
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
    /// Execute one pipeline config over a dataset.
    Run {
        /// Pipeline config JSON file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, default_value = "mock:identity")]
        provider: String,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Run store directory to write the run record into.
        #[arg(long)]
        out: PathBuf,
        /// Also write per-query results to this file, one JSON per line.
        #[arg(long)]
        per_query: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// system, or fixed:<epoch-secs>. Mock providers default to fixed:0.
        #[arg(long)]
        clock: Option<String>,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
    },
    /// Run a config grid, resumable by config hash.
    Sweep {
        /// Grid JSON file; axis lists expand to their cross product.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, default_value = "mock:identity")]
        provider: String,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
        /// Skip configs whose run records already exist and verify.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        clock: Option<String>,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
    },
    /// Render report tables from a run store.
    Report {
        #[arg(long)]
        store: PathBuf,
        /// qe_table, rr_table, or depth_curve.
        #[arg(long)]
        shape: String,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn validation(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
            std::process::exit(code);
        }
    };

    let code = match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            corpus,
            queries,
            qrels,
            subset,
        } => cmd_ingest(&corpus, queries.as_deref(), qrels.as_deref(), subset.as_deref()),
        Command::Index {
            corpus,
            out,
            k1,
            b,
            keep_stopwords,
            stem,
        } => cmd_index(&corpus, &out, k1, b, keep_stopwords, stem),
        Command::Search {
            index,
            query_text,
            n,
        } => cmd_search(&index, &query_text, n),
        Command::Expand {
            query_text,
            query_id,
            variant,
            mode,
            prices,
            provider,
            script,
            transcript,
        } => cmd_expand(
            &query_text,
            &query_id,
            &variant,
            mode,
            &prices,
            &provider,
            script.as_deref(),
            transcript.as_deref(),
        ),
        Command::Rerank {
            query_text,
            query_id,
            candidates,
            variant,
            prices,
            provider,
            script,
            transcript,
            qrels,
            window,
            stride,
        } => cmd_rerank(
            &query_text,
            &query_id,
            &candidates,
            &variant,
            &prices,
            &provider,
            script.as_deref(),
            transcript.as_deref(),
            qrels.as_deref(),
            window,
            stride,
        ),
        Command::Run {
            config,
            corpus,
            queries,
            qrels,
            prices,
            provider,
            script,
            transcript,
            out,
            per_query,
            seed,
            clock,
            concurrency,
        } => cmd_run(RunArgs {
            config,
            corpus,
            queries,
            qrels,
            prices,
            provider,
            script,
            transcript,
            out,
            per_query,
            seed,
            clock,
            concurrency,
        }),
        Command::Sweep {
            grid,
            corpus,
            queries,
            qrels,
            prices,
            provider,
            script,
            transcript,
            store,
            resume,
            seed,
            clock,
            concurrency,
        } => cmd_sweep(SweepArgs {
            grid,
            corpus,
            queries,
            qrels,
            prices,
            provider,
            script,
            transcript,
            store,
            resume,
            seed,
            clock,
            concurrency,
        }),
        Command::Report { store, shape, out } => cmd_report(&store, &shape, &out),
    }
}

fn load_dataset(
    corpus_path: &Path,
    queries_path: &Path,
    qrels_path: &Path,
) -> Result<(rrpipe_core::Corpus, QuerySet, Qrels), CliError> {
    let corpus = corpus::load_corpus(corpus_path).map_err(CliError::validation)?;
    let queries = corpus::load_queries(queries_path).map_err(CliError::validation)?;
    let (qrels, warnings) = corpus::load_qrels(qrels_path, &queries).map_err(CliError::validation)?;
    for w in &warnings {
        log::warn!("qrels: {w}");
    }
    Ok((corpus, queries, qrels))
}

/// Register the selected mock under every provider id the table names.
fn build_gateway(
    prices: &Path,
    provider_spec: &str,
    script: Option<&Path>,
    transcript: Option<&Path>,
    qrels: Option<&Qrels>,
) -> Result<Gateway, CliError> {
    let table = PriceTable::load(prices).map_err(CliError::validation)?;
    let provider_ids: BTreeSet<String> = table
        .variants()
        .iter()
        .map(|v| v.provider_id.clone())
        .collect();
    let mut gateway = Gateway::new(table);
    for id in provider_ids {
        let provider: Arc<dyn Provider> = match provider_spec {
            "mock:identity" => Arc::new(IdentityProvider::new(&id)),
            "mock:scripted" => {
                let path = script.ok_or_else(|| {
                    CliError::Validation("mock:scripted requires --script".into())
                })?;
                Arc::new(ScriptedProvider::from_file(&id, path).map_err(CliError::validation)?)
            }
            "mock:replay" => {
                let path = transcript.ok_or_else(|| {
                    CliError::Validation("mock:replay requires --transcript".into())
                })?;
                Arc::new(ReplayProvider::from_file(&id, path).map_err(CliError::validation)?)
            }
            "mock:oracle" => {
                let qrels = qrels.ok_or_else(|| {
                    CliError::Validation("mock:oracle requires relevance judgments".into())
                })?;
                Arc::new(OracleRerankProvider::new(&id, qrels.clone()))
            }
            other => {
                return Err(CliError::Validation(format!(
                    "unknown provider {other:?}; expected mock:identity, mock:scripted, \
                     mock:replay, or mock:oracle"
                )))
            }
        };
        gateway = gateway.with_provider(provider);
    }
    Ok(gateway)
}

fn parse_clock(spec: Option<&str>, provider_spec: &str) -> Result<Clock, CliError> {
    match spec {
        None => {
            // mock providers default to a fixed clock so reruns are
            // byte-identical
            if provider_spec.starts_with("mock:") {
                Ok(Clock::Fixed(0))
            } else {
                Ok(Clock::System)
            }
        }
        Some("system") => Ok(Clock::System),
        Some(s) => {
            let secs = s
                .strip_prefix("fixed:")
                .and_then(|v| v.parse::<u64>().ok())
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "bad clock {s:?}; expected system or fixed:<epoch-secs>"
                    ))
                })?;
            Ok(Clock::Fixed(secs))
        }
    }
}

fn cmd_ingest(
    corpus_path: &Path,
    queries_path: Option<&Path>,
    qrels_path: Option<&Path>,
    subset: Option<&str>,
) -> Result<(), CliError> {
    let corpus = corpus::load_corpus(corpus_path).map_err(CliError::validation)?;
    let mut summary = serde_json::json!({ "documents": corpus.len() });
    if let Some(subset) = subset {
        summary["subset_documents"] = corpus.filter_subset(subset).len().into();
    }
    if let Some(qpath) = queries_path {
        let queries = corpus::load_queries(qpath).map_err(CliError::validation)?;
        summary["queries"] = queries.len().into();
        if let Some(subset) = subset {
            summary["subset_queries"] = queries.filter_subset(subset).len().into();
        }
        if let Some(rpath) = qrels_path {
            let (qrels, warnings) =
                corpus::load_qrels(rpath, &queries).map_err(CliError::validation)?;
            for w in &warnings {
                log::warn!("qrels: {w}");
            }
            summary["judged_queries"] = qrels.judgments.len().into();
            summary["qrels_warnings"] = warnings.len().into();
        }
    } else if qrels_path.is_some() {
        return Err(CliError::Validation(
            "--qrels requires --queries for validation".into(),
        ));
    }
    println!("{summary}");
    Ok(())
}

fn cmd_index(
    corpus_path: &Path,
    out: &Path,
    k1: f64,
    b: f64,
    keep_stopwords: bool,
    stem: bool,
) -> Result<(), CliError> {
    let corpus = corpus::load_corpus(corpus_path).map_err(CliError::validation)?;
    let analyzer = AnalyzerOptions {
        remove_stopwords: !keep_stopwords,
        stem,
    };
    if !(k1 >= 0.0) || !(0.0..=1.0).contains(&b) {
        return Err(CliError::Validation(format!(
            "bad bm25 params k1={k1} b={b}; need k1 >= 0 and b in [0,1]"
        )));
    }
    let index =
        Bm25Index::build(&corpus, Bm25Params::new(k1, b), analyzer).map_err(CliError::validation)?;
    index.save(out).map_err(CliError::runtime)?;
    println!(
        "{}",
        serde_json::json!({
            "documents": index.doc_count(),
            "terms": index.term_count(),
            "out": out.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_search(index_path: &Path, query_text: &str, n: usize) -> Result<(), CliError> {
    let index = Bm25Index::load(index_path).map_err(CliError::validation)?;
    let terms = rrpipe_core::analysis::tokenize_with(query_text, index.analyzer());
    let result = index.search("cli", &terms, n);
    let mut stdout = std::io::stdout().lock();
    for (doc_id, score) in &result.entries {
        writeln!(stdout, "{doc_id}\t{score:.6}").map_err(CliError::runtime)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_expand(
    query_text: &str,
    query_id: &str,
    variant: &str,
    mode: ExpansionMode,
    prices: &Path,
    provider: &str,
    script: Option<&Path>,
    transcript: Option<&Path>,
) -> Result<(), CliError> {
    let gateway = build_gateway(prices, provider, script, transcript, None)?;
    let query = Query {
        query_id: query_id.to_string(),
        subset: String::new(),
        text: query_text.to_string(),
    };
    let expanded = expand_query(&gateway, &query, variant, mode, &Templates::builtin())
        .map_err(CliError::runtime)?;
    println!(
        "{}",
        serde_json::to_string(&expanded).map_err(CliError::runtime)?
    );
    Ok(())
}

fn load_candidates(path: &Path) -> Result<Vec<CandidateDoc>, CliError> {
    let file = File::open(path).map_err(|e| {
        CliError::Validation(format!("cannot open candidates {}: {e}", path.display()))
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::runtime)?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CandidateDoc = serde_json::from_str(&line).map_err(|e| {
            CliError::Validation(format!("candidates line {}: {e}", i + 1))
        })?;
        out.push(doc);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_rerank(
    query_text: &str,
    query_id: &str,
    candidates_path: &Path,
    variant: &str,
    prices: &Path,
    provider: &str,
    script: Option<&Path>,
    transcript: Option<&Path>,
    qrels_path: Option<&Path>,
    window: usize,
    stride: usize,
) -> Result<(), CliError> {
    let qrels = match qrels_path {
        Some(path) => {
            let queries = QuerySet::from_queries(vec![Query {
                query_id: query_id.to_string(),
                subset: String::new(),
                text: query_text.to_string(),
            }])
            .map_err(CliError::validation)?;
            let (qrels, warnings) =
                corpus::load_qrels(path, &queries).map_err(CliError::validation)?;
            for w in &warnings {
                log::debug!("qrels: {w}");
            }
            Some(qrels)
        }
        None => None,
    };
    let gateway = build_gateway(prices, provider, script, transcript, qrels.as_ref())?;
    let candidates = load_candidates(candidates_path)?;
    if candidates.is_empty() {
        return Err(CliError::Validation("candidate file is empty".into()));
    }
    let query = Query {
        query_id: query_id.to_string(),
        subset: String::new(),
        text: query_text.to_string(),
    };
    let mut params = RerankParams::new(variant);
    params.window = window;
    params.stride = stride;
    let outcome = rerank_listwise(&gateway, &query, &candidates, &params, &Templates::builtin())
        .map_err(CliError::runtime)?;
    let reordered: Vec<&str> = outcome
        .permutation
        .order
        .iter()
        .map(|&i| candidates[i].doc_id.as_str())
        .collect();
    println!(
        "{}",
        serde_json::json!({
            "order": outcome.permutation.order,
            "repaired": outcome.permutation.repaired,
            "degraded": outcome.degraded,
            "doc_ids": reordered,
            "llm_calls": outcome.usage.len(),
        })
    );
    Ok(())
}

struct RunArgs {
    config: PathBuf,
    corpus: PathBuf,
    queries: PathBuf,
    qrels: PathBuf,
    prices: PathBuf,
    provider: String,
    script: Option<PathBuf>,
    transcript: Option<PathBuf>,
    out: PathBuf,
    per_query: Option<PathBuf>,
    seed: Option<u64>,
    clock: Option<String>,
    concurrency: usize,
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (corpus, queries, qrels) = load_dataset(&args.corpus, &args.queries, &args.qrels)?;
    let gateway = build_gateway(
        &args.prices,
        &args.provider,
        args.script.as_deref(),
        args.transcript.as_deref(),
        Some(&qrels),
    )?;
    let templates = Templates::builtin();

    let body = std::fs::read_to_string(&args.config).map_err(CliError::validation)?;
    let mut config: PipelineConfig = serde_json::from_str(&body).map_err(CliError::validation)?;
    config.template_hashes = templates.hashes();
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(CliError::validation)?;

    let store = RunStore::open(&args.out).map_err(CliError::runtime)?;
    let opts = SweepOptions {
        concurrency: args.concurrency,
        clock: parse_clock(args.clock.as_deref(), &args.provider)?,
        resume: false,
    };
    let outcome = run_sweep(
        std::slice::from_ref(&config),
        &queries,
        &corpus,
        &qrels,
        &gateway,
        &templates,
        Some(&store),
        &opts,
    )
    .map_err(CliError::runtime)?;
    if let Some(failure) = outcome.failures.first() {
        return Err(CliError::Runtime(format!(
            "config {} failed: {}",
            failure.config_hash, failure.error
        )));
    }
    let record = &outcome.records[0];

    if let Some(path) = &args.per_query {
        let mut f = File::create(path).map_err(CliError::runtime)?;
        for result in &record.per_query {
            let line = serde_json::to_string(result).map_err(CliError::runtime)?;
            writeln!(f, "{line}").map_err(CliError::runtime)?;
        }
    }

    println!(
        "{}",
        serde_json::json!({
            "config_hash": record.config_hash,
            "aggregate": record.aggregate,
            "store": args.out.display().to_string(),
        })
    );
    Ok(())
}

struct SweepArgs {
    grid: PathBuf,
    corpus: PathBuf,
    queries: PathBuf,
    qrels: PathBuf,
    prices: PathBuf,
    provider: String,
    script: Option<PathBuf>,
    transcript: Option<PathBuf>,
    store: PathBuf,
    resume: bool,
    seed: Option<u64>,
    clock: Option<String>,
    concurrency: usize,
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let (corpus, queries, qrels) = load_dataset(&args.corpus, &args.queries, &args.qrels)?;
    let gateway = build_gateway(
        &args.prices,
        &args.provider,
        args.script.as_deref(),
        args.transcript.as_deref(),
        Some(&qrels),
    )?;
    let templates = Templates::builtin();

    let mut grid = SweepGrid::load(&args.grid).map_err(CliError::validation)?;
    if let Some(seed) = args.seed {
        grid.seed = seed;
    }
    let configs = grid.expand(&templates);
    if configs.is_empty() {
        return Err(CliError::Validation("grid expands to zero configs".into()));
    }

    let store = RunStore::open(&args.store).map_err(CliError::runtime)?;
    let opts = SweepOptions {
        concurrency: args.concurrency,
        clock: parse_clock(args.clock.as_deref(), &args.provider)?,
        resume: args.resume,
    };
    let outcome = run_sweep(
        &configs,
        &queries,
        &corpus,
        &qrels,
        &gateway,
        &templates,
        Some(&store),
        &opts,
    )
    .map_err(CliError::runtime)?;

    for failure in &outcome.failures {
        log::error!("config {} failed: {}", failure.config_hash, failure.error);
    }
    println!(
        "{}",
        serde_json::json!({
            "configs": configs.len(),
            "completed": outcome.records.len(),
            "resumed": outcome.resumed,
            "failed": outcome.failures.len(),
            "store": args.store.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_report(store_path: &Path, shape: &str, out: &Path) -> Result<(), CliError> {
    let shape: ReportShape = shape.parse().map_err(CliError::Validation)?;
    let store = RunStore::open(store_path).map_err(CliError::runtime)?;
    let records = store.load_all().map_err(CliError::runtime)?;
    let report = emit_report(&records, shape, Some(out)).map_err(|e| match e {
        rrpipe_core::orchestrator::ReportError::MissingAxis(m) => CliError::Validation(m),
        other => CliError::Runtime(other.to_string()),
    })?;
    println!(
        "{}",
        serde_json::json!({
            "shape": shape.to_string(),
            "rows": records.len(),
            "csv": report.csv_path.unwrap().display().to_string(),
            "md": report.md_path.unwrap().display().to_string(),
        })
    );
    Ok(())
}

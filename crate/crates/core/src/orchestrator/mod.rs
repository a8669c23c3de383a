//! End-to-end pipeline execution: one query, one config, or a whole
//! ablation grid.

mod report;
mod sweep;

pub use report::{emit_report, Report, ReportError, ReportShape};
pub use sweep::{run_sweep, RunStore, StoreError, SweepGrid, SweepOptions, SweepOutcome};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::AnalyzerOptions;
use crate::corpus::{Corpus, Qrels, Query};
use crate::gateway::{cost_of_all, Gateway, MicroDollars};
use crate::metrics::{aggregate, ndcg_at_k, recall_at_k, AggregateRow, Gain, QueryResult};
use crate::stages::{
    expand_query, rerank_listwise, CandidateDoc, ExpansionMode, RerankParams, StageError,
    TemplateHashes, Templates,
};
use crate::Bm25Index;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Variant name that disables a stage.
pub const VARIANT_OFF: &str = "off";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Money(#[from] crate::gateway::MoneyError),
    #[error(transparent)]
    Index(#[from] crate::bm25::Bm25Error),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

/// BM25 free parameters as stored in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Settings {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Settings {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

fn default_initial_n() -> usize {
    100
}

fn default_window() -> usize {
    20
}

fn default_stride() -> usize {
    10
}

fn default_doc_token_budget() -> usize {
    300
}

fn default_doc_cap() -> usize {
    100
}

/// One cell of the ablation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Expansion model name, or "off".
    pub qe_variant: String,
    pub qe_mode: ExpansionMode,
    /// Re-ranking model name, or "off".
    pub rr_variant: String,
    /// Re-ranking depth: candidates exposed to the reranker.
    pub k: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub bm25: Bm25Settings,
    /// BM25 candidates fetched before truncating to `k`.
    #[serde(default = "default_initial_n")]
    pub initial_n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub analyzer: AnalyzerOptions,
    #[serde(default)]
    pub gain: Gain,
    #[serde(default = "default_doc_token_budget")]
    pub doc_token_budget: usize,
    #[serde(default = "default_doc_cap")]
    pub doc_cap: usize,
    /// Hashes of the prompt templates in effect; filled before hashing.
    #[serde(default)]
    pub template_hashes: TemplateHashes,
}

impl PipelineConfig {
    /// A pure BM25 baseline with both LLM stages disabled.
    pub fn bm25_only(k: usize, templates: &Templates) -> Self {
        Self {
            qe_variant: VARIANT_OFF.into(),
            qe_mode: ExpansionMode::Off,
            rr_variant: VARIANT_OFF.into(),
            k,
            window: default_window(),
            stride: default_stride(),
            bm25: Bm25Settings::default(),
            initial_n: default_initial_n().max(k),
            seed: 0,
            analyzer: AnalyzerOptions::default(),
            gain: Gain::default(),
            doc_token_budget: default_doc_token_budget(),
            doc_cap: default_doc_cap(),
            template_hashes: templates.hashes(),
        }
    }

    pub fn qe_enabled(&self) -> bool {
        self.qe_variant != VARIANT_OFF && self.qe_mode != ExpansionMode::Off
    }

    pub fn rr_enabled(&self) -> bool {
        self.rr_variant != VARIANT_OFF
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.k == 0 {
            return Err(OrchestratorError::InvalidConfig("k must be positive".into()));
        }
        if self.k > self.initial_n {
            return Err(OrchestratorError::InvalidConfig(format!(
                "k {} exceeds initial_n {}",
                self.k, self.initial_n
            )));
        }
        if self.stride == 0 || self.window == 0 {
            return Err(OrchestratorError::InvalidConfig(
                "window and stride must be positive".into(),
            ));
        }
        if self.stride > self.window {
            return Err(OrchestratorError::InvalidConfig(format!(
                "stride {} exceeds window {}",
                self.stride, self.window
            )));
        }
        if self.window > self.doc_cap {
            return Err(OrchestratorError::InvalidConfig(format!(
                "window {} exceeds doc cap {}",
                self.window, self.doc_cap
            )));
        }
        if !(self.bm25.k1 >= 0.0 && self.bm25.k1.is_finite()) {
            return Err(OrchestratorError::InvalidConfig("k1 must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.bm25.b) {
            return Err(OrchestratorError::InvalidConfig("b must be in [0,1]".into()));
        }
        Ok(())
    }

    /// Stable hash of the canonical config plus the toolkit version.
    ///
    /// Keyed storage under this hash means template edits and version bumps
    /// invalidate resume caches.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        h.update([0]);
        h.update(TOOLKIT_VERSION.as_bytes());
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Wall-clock source for run records; fixed clocks make stores
/// byte-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(u64),
}

impl Clock {
    pub fn now_epoch_secs(&self) -> u64 {
        match self {
            Clock::System => std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            Clock::Fixed(t) => *t,
        }
    }
}

/// Persisted unit behind every report row: one config, fully evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub config: PipelineConfig,
    pub per_query: Vec<QueryResult>,
    pub aggregate: AggregateRow,
    pub started_at: u64,
    pub finished_at: u64,
    pub toolkit_version: String,
}

/// Everything a single-query run needs, shared read-only.
pub struct PipelineContext<'a> {
    pub config: &'a PipelineConfig,
    pub index: &'a Bm25Index,
    pub corpus: &'a Corpus,
    pub qrels: &'a Qrels,
    pub gateway: &'a Gateway,
    pub templates: &'a Templates,
}

/// Run the full pipeline for one query and evaluate the top 10.
///
/// Stage-level provider failures degrade per the stage contracts and set
/// the `degraded` flag; only configuration errors propagate.
pub fn run_query(ctx: &PipelineContext<'_>, query: &Query) -> Result<QueryResult, OrchestratorError> {
    let config = ctx.config;
    let qe_mode = if config.qe_enabled() {
        config.qe_mode
    } else {
        ExpansionMode::Off
    };
    let expanded = expand_query(ctx.gateway, query, &config.qe_variant, qe_mode, ctx.templates)?;

    let terms = crate::analysis::tokenize_with(&expanded.retrieval_text, ctx.index.analyzer());
    let initial = ctx.index.search(&query.query_id, &terms, config.initial_n);
    let pool = initial.truncated(config.k);

    let mut usages: Vec<crate::gateway::UsageRecord> = Vec::new();
    let mut degraded = expanded.degraded;
    if let Some(u) = &expanded.usage {
        usages.push(u.clone());
    }

    let final_list = if config.rr_enabled() && !pool.is_empty() {
        let candidates: Vec<CandidateDoc> = pool
            .doc_ids()
            .map(|id| CandidateDoc {
                doc_id: id.to_string(),
                text: ctx
                    .corpus
                    .get(id)
                    .map(|d| d.text.clone())
                    .unwrap_or_default(),
            })
            .collect();
        let params = RerankParams {
            variant: config.rr_variant.clone(),
            window: config.window,
            stride: config.stride,
            doc_token_budget: config.doc_token_budget,
            doc_cap: config.doc_cap,
        };
        let outcome = rerank_listwise(ctx.gateway, query, &candidates, &params, ctx.templates)?;
        usages.extend(outcome.usage.iter().cloned());
        degraded |= outcome.degraded;
        pool.permuted(&outcome.permutation)
    } else {
        pool
    };

    let cost: MicroDollars = cost_of_all(usages.iter(), ctx.gateway.price_table())?;
    let latency_secs: f64 = usages.iter().map(|u| u.latency_secs).sum();

    let empty = std::collections::HashMap::new();
    let judgments = ctx.qrels.grades_for(&query.query_id).unwrap_or(&empty);
    let no_relevant = !judgments.values().any(|&g| g > 0);
    let (ndcg, recall) = if no_relevant {
        (0.0, 0.0)
    } else {
        let ndcg = ndcg_at_k(&final_list, judgments, 10, config.gain);
        let recall = recall_at_k(&final_list, judgments, 10)?;
        (ndcg, recall)
    };

    Ok(QueryResult {
        query_id: query.query_id.clone(),
        ndcg_at_10: ndcg,
        recall_at_10: recall,
        cost_usd_micros: cost,
        latency_secs,
        degraded,
        no_relevant,
    })
}

/// Evaluate one config across a query set, sequentially.
pub fn run_config(
    config: &PipelineConfig,
    queries: &crate::corpus::QuerySet,
    index: &Bm25Index,
    corpus: &Corpus,
    qrels: &Qrels,
    gateway: &Gateway,
    templates: &Templates,
    clock: Clock,
) -> Result<RunRecord, OrchestratorError> {
    config.validate()?;
    let started_at = clock.now_epoch_secs();
    let ctx = PipelineContext {
        config,
        index,
        corpus,
        qrels,
        gateway,
        templates,
    };
    let mut per_query = Vec::with_capacity(queries.len());
    for query in queries.iter() {
        per_query.push(run_query(&ctx, query)?);
    }
    let agg = aggregate(&per_query)?;
    Ok(RunRecord {
        config_hash: config.config_hash(),
        config: config.clone(),
        per_query,
        aggregate: agg,
        started_at,
        finished_at: clock.now_epoch_secs(),
        toolkit_version: TOOLKIT_VERSION.to_string(),
    })
}

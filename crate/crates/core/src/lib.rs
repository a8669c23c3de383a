//! Retrieval pipeline toolkit: LLM query expansion, BM25 initial
//! retrieval, listwise LLM re-ranking, trec-style evaluation, and an
//! ablation sweep harness with per-call cost and latency accounting.
//!
//! Scoring and metric math is generic over the scalar type through
//! [`scalar::Real`]; the aliases below pin the default `f64`
//! instantiations used across the toolkit. Money never floats: costs are
//! integer micro-dollars end to end.

pub mod analysis;
pub mod bm25;
pub mod corpus;
pub mod gateway;
pub mod metrics;
pub mod orchestrator;
pub mod ranking;
pub mod scalar;
pub mod stages;
pub mod synth;

/// Scalar used by the default instantiations.
pub type Score = f64;

/// BM25 index over [`Score`].
pub type Bm25Index = bm25::Bm25Index<Score>;

/// BM25 parameters over [`Score`].
pub type Bm25Params = bm25::Bm25Params<Score>;

/// Ranked list over [`Score`].
pub type RankedList = ranking::RankedList<Score>;

pub use corpus::{Corpus, Document, Qrels, Query, QuerySet};
pub use gateway::{Gateway, MicroDollars, PriceTable, UsageRecord};
pub use metrics::{AggregateRow, QueryResult};
pub use orchestrator::{PipelineConfig, RunRecord};
pub use ranking::Permutation;

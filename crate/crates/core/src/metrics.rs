//! Ranking metrics and per-query result aggregation.
//!
//! NDCG uses linear gain (`grade / log2(rank + 1)`) by default, matching
//! trec_eval; exponential gain is available behind a flag. Queries with no
//! relevant documents are excluded from metric means and counted.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::MicroDollars;
use crate::ranking::RankedList;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    /// The query has no document with a positive grade; it is excluded
    /// from aggregates rather than failing the run.
    #[error("query has no relevant documents")]
    NoRelevantDocs,
    #[error("cannot aggregate an empty result list")]
    EmptyResults,
}

/// Gain function for DCG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gain {
    #[default]
    Linear,
    /// `2^grade - 1`
    Exponential,
}

fn gain_value<R: Real>(grade: u32, gain: Gain) -> R {
    match gain {
        Gain::Linear => R::from_u32(grade).unwrap(),
        Gain::Exponential => R::from_f64((grade as f64).exp2() - 1.0).unwrap(),
    }
}

fn dcg<R: Real, I: IntoIterator<Item = u32>>(grades: I, k: usize, gain: Gain) -> R {
    let two = R::from_f64(2.0).unwrap();
    let mut total = R::zero();
    for (i, grade) in grades.into_iter().take(k).enumerate() {
        let discount = (R::from_count(i) + two).log2();
        total = total + gain_value::<R>(grade, gain) / discount;
    }
    total
}

/// NDCG@k of a ranking against graded judgments.
///
/// The ideal gain comes from all judged grades sorted descending. Returns
/// zero when the query has no positive grade.
pub fn ndcg_at_k<R: Real>(
    ranked: &RankedList<R>,
    judgments: &HashMap<String, u32>,
    k: usize,
    gain: Gain,
) -> R {
    let ranked_grades = ranked
        .doc_ids()
        .map(|id| judgments.get(id).copied().unwrap_or(0));
    let actual: R = dcg(ranked_grades, k, gain);

    let mut ideal_grades: Vec<u32> = judgments.values().copied().collect();
    ideal_grades.sort_unstable_by(|a, b| b.cmp(a));
    let ideal: R = dcg(ideal_grades, k, gain);

    if ideal == R::zero() {
        R::zero()
    } else {
        actual / ideal
    }
}

/// Recall@k: fraction of all relevant documents found in the top k.
///
/// Relevant means grade > 0. Errors with [`MetricsError::NoRelevantDocs`]
/// when the query has nothing relevant, signalling exclusion.
pub fn recall_at_k<R: Real>(
    ranked: &RankedList<R>,
    judgments: &HashMap<String, u32>,
    k: usize,
) -> Result<R, MetricsError> {
    let relevant_total = judgments.values().filter(|&&g| g > 0).count();
    if relevant_total == 0 {
        return Err(MetricsError::NoRelevantDocs);
    }
    let hits = ranked
        .doc_ids()
        .take(k)
        .filter(|id| judgments.get(*id).copied().unwrap_or(0) > 0)
        .count();
    Ok(R::from_count(hits) / R::from_count(relevant_total))
}

/// Evaluation of one query under one pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_id: String,
    pub ndcg_at_10: f64,
    pub recall_at_10: f64,
    pub cost_usd_micros: MicroDollars,
    pub latency_secs: f64,
    /// A stage fell back after provider failure.
    pub degraded: bool,
    /// No relevant documents; excluded from metric means.
    pub no_relevant: bool,
}

/// Cross-query means. Metrics are scaled to 0..100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub mean_ndcg_at_10_x100: f64,
    pub mean_recall_at_10_x100: f64,
    pub mean_cost_dollars: f64,
    pub mean_latency_secs: f64,
    pub count: usize,
    pub degraded_count: usize,
    pub excluded_count: usize,
}

/// Mean the per-query results into one row.
///
/// Metric means skip excluded queries; cost and latency average over every
/// query since the work was done regardless of judgments.
pub fn aggregate(results: &[QueryResult]) -> Result<AggregateRow, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyResults);
    }
    let included: Vec<&QueryResult> = results.iter().filter(|r| !r.no_relevant).collect();
    let metric_mean = |f: fn(&QueryResult) -> f64| -> f64 {
        if included.is_empty() {
            0.0
        } else {
            included.iter().map(|r| f(r)).sum::<f64>() / included.len() as f64
        }
    };
    let total_cost: MicroDollars = results.iter().map(|r| r.cost_usd_micros).sum();
    Ok(AggregateRow {
        mean_ndcg_at_10_x100: metric_mean(|r| r.ndcg_at_10) * 100.0,
        mean_recall_at_10_x100: metric_mean(|r| r.recall_at_10) * 100.0,
        mean_cost_dollars: total_cost.as_dollars_f64() / results.len() as f64,
        mean_latency_secs: results.iter().map(|r| r.latency_secs).sum::<f64>()
            / results.len() as f64,
        count: results.len(),
        degraded_count: results.iter().filter(|r| r.degraded).count(),
        excluded_count: results.len() - included.len(),
    })
}

impl AggregateRow {
    /// True when this row matches a re-aggregation of `results`.
    pub fn consistent_with(&self, results: &[QueryResult]) -> bool {
        match aggregate(results) {
            Ok(recomputed) => {
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
                close(self.mean_ndcg_at_10_x100, recomputed.mean_ndcg_at_10_x100)
                    && close(self.mean_recall_at_10_x100, recomputed.mean_recall_at_10_x100)
                    && close(self.mean_cost_dollars, recomputed.mean_cost_dollars)
                    && close(self.mean_latency_secs, recomputed.mean_latency_secs)
                    && self.count == recomputed.count
                    && self.degraded_count == recomputed.degraded_count
                    && self.excluded_count == recomputed.excluded_count
            }
            Err(_) => false,
        }
    }
}

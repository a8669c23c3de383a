//! The two LLM stages: query expansion and listwise re-ranking.
//!
//! Candidate pools deeper than one prompt window are ranked with
//! back-to-front sliding windows: the tail window is ranked first, then the
//! window slides toward the head by `stride`, carrying winners forward,
//! until the head window has been ranked.

mod parse;
mod prompt;

pub use parse::parse_permutation;
pub use prompt::{Templates, TemplateHashes, QE_TEMPLATE_ID, RR_TEMPLATE_ID};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Query;
use crate::gateway::{Gateway, GatewayError, Stage, UsageRecord};
use crate::ranking::Permutation;

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("invalid stage parameters: {0}")]
    InvalidParams(String),
}

/// How expansion text feeds into retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionMode {
    /// Original query text plus the expansion, space separated.
    Concat,
    /// Expansion text only.
    Replace,
    /// No expansion call at all.
    Off,
}

impl std::str::FromStr for ExpansionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concat" => Ok(Self::Concat),
            "replace" => Ok(Self::Replace),
            "off" => Ok(Self::Off),
            other => Err(format!(
                "unknown expansion mode {other:?} (expected concat, replace, or off)"
            )),
        }
    }
}

/// A query after the expansion stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandedQuery {
    pub query_id: String,
    pub original_text: String,
    pub expansion_text: String,
    /// The text actually handed to retrieval.
    pub retrieval_text: String,
    pub usage: Option<UsageRecord>,
    /// Set when the provider failed and the stage fell back to the
    /// original query.
    pub degraded: bool,
}

/// Expand one query, or pass it through when mode is `Off`.
///
/// A provider that stays unavailable after retries degrades the stage to
/// pass-through rather than failing the query.
pub fn expand_query(
    gateway: &Gateway,
    query: &Query,
    variant_name: &str,
    mode: ExpansionMode,
    templates: &Templates,
) -> Result<ExpandedQuery, StageError> {
    let passthrough = |degraded: bool| ExpandedQuery {
        query_id: query.query_id.clone(),
        original_text: query.text.clone(),
        expansion_text: String::new(),
        retrieval_text: query.text.clone(),
        usage: None,
        degraded,
    };

    if mode == ExpansionMode::Off {
        return Ok(passthrough(false));
    }

    let prompt = templates.render_qe(&query.text);
    match gateway.generate(variant_name, &prompt, Stage::Qe, &query.query_id, &[]) {
        Ok((completion, usage)) => {
            let expansion_text = completion.trim().to_string();
            let retrieval_text = match mode {
                ExpansionMode::Concat => format!("{} {}", query.text, expansion_text),
                ExpansionMode::Replace => expansion_text.clone(),
                ExpansionMode::Off => unreachable!(),
            };
            Ok(ExpandedQuery {
                query_id: query.query_id.clone(),
                original_text: query.text.clone(),
                expansion_text,
                retrieval_text,
                usage: Some(usage),
                degraded: false,
            })
        }
        Err(GatewayError::ProviderUnavailable(msg)) => {
            log::warn!(
                "expansion provider unavailable for {}: {msg}; using raw query",
                query.query_id
            );
            Ok(passthrough(true))
        }
        Err(e) => Err(e.into()),
    }
}

/// One re-ranking candidate: the document id and the text shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDoc {
    pub doc_id: String,
    pub text: String,
}

/// Knobs for the re-ranking stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankParams {
    pub variant: String,
    pub window: usize,
    pub stride: usize,
    /// Per-document budget in estimated tokens before truncation.
    pub doc_token_budget: usize,
    /// Hard cap on documents per LLM call.
    pub doc_cap: usize,
}

impl RerankParams {
    pub fn new(variant: impl Into<String>) -> Self {
        Self {
            variant: variant.into(),
            window: 20,
            stride: 10,
            doc_token_budget: 300,
            doc_cap: 100,
        }
    }

    fn validate(&self) -> Result<(), StageError> {
        if self.window == 0 || self.stride == 0 {
            return Err(StageError::InvalidParams(
                "window and stride must be positive".into(),
            ));
        }
        if self.stride > self.window {
            return Err(StageError::InvalidParams(format!(
                "stride {} exceeds window {}",
                self.stride, self.window
            )));
        }
        if self.window > self.doc_cap {
            return Err(StageError::InvalidParams(format!(
                "window {} exceeds per-call document cap {}",
                self.window, self.doc_cap
            )));
        }
        Ok(())
    }
}

/// Result of re-ranking one candidate pool.
#[derive(Debug, Clone)]
pub struct RerankOutcome {
    pub permutation: Permutation,
    pub usage: Vec<UsageRecord>,
    /// True when a provider failure forced the identity fallback.
    pub degraded: bool,
    /// Number of candidate texts cut to the token budget.
    pub truncated_docs: usize,
}

/// Start offsets of the sliding windows over `k` candidates, tail first.
///
/// For `k <= window` there is a single window. Otherwise the count is
/// `ceil((k - window) / stride) + 1`: starts walk from `k - window` down by
/// `stride`, clamping the final start to 0 so the head window is always
/// ranked last.
pub fn window_plan(k: usize, window: usize, stride: usize) -> Vec<(usize, usize)> {
    if k <= window {
        return vec![(0, k)];
    }
    let mut plan = Vec::new();
    let mut start = k - window;
    loop {
        plan.push((start, start + window));
        if start == 0 {
            break;
        }
        start = start.saturating_sub(stride);
    }
    plan
}

/// Rank a candidate pool with one listwise call per window.
///
/// Re-ranking permutes the pool and never adds or removes candidates. A
/// single-candidate pool short-circuits without any call. Provider failure
/// mid-pool yields the identity permutation flagged as repaired.
pub fn rerank_listwise(
    gateway: &Gateway,
    query: &Query,
    candidates: &[CandidateDoc],
    params: &RerankParams,
    templates: &Templates,
) -> Result<RerankOutcome, StageError> {
    params.validate()?;
    let k = candidates.len();
    if k <= 1 {
        return Ok(RerankOutcome {
            permutation: Permutation::identity(k),
            usage: Vec::new(),
            degraded: false,
            truncated_docs: 0,
        });
    }

    let mut truncated_docs = 0;
    let prepared: Vec<String> = candidates
        .iter()
        .map(|c| {
            let flat = flatten_whitespace(&c.text);
            let (text, cut) = truncate_to_tokens(&flat, params.doc_token_budget);
            if cut {
                truncated_docs += 1;
            }
            text
        })
        .collect();

    let mut working: Vec<usize> = (0..k).collect();
    let mut usage = Vec::new();
    let mut any_repaired = false;

    for (start, end) in window_plan(k, params.window, params.stride) {
        let slice: Vec<usize> = working[start..end].to_vec();
        let passages: Vec<String> = slice.iter().map(|&i| prepared[i].clone()).collect();
        let doc_ids: Vec<String> = slice
            .iter()
            .map(|&i| candidates[i].doc_id.clone())
            .collect();
        let prompt = templates.render_rr(&query.text, &passages);

        match gateway.generate(
            &params.variant,
            &prompt,
            Stage::Rr,
            &query.query_id,
            &doc_ids,
        ) {
            Ok((completion, call_usage)) => {
                usage.push(call_usage);
                let perm = parse_permutation(&completion, slice.len());
                any_repaired |= perm.repaired;
                for (offset, &src) in perm.order.iter().enumerate() {
                    working[start + offset] = slice[src];
                }
            }
            Err(GatewayError::ProviderUnavailable(msg)) => {
                log::warn!(
                    "rerank provider unavailable for {}: {msg}; keeping initial order",
                    query.query_id
                );
                return Ok(RerankOutcome {
                    permutation: Permutation {
                        order: (0..k).collect(),
                        repaired: true,
                    },
                    usage,
                    degraded: true,
                    truncated_docs,
                });
            }
            Err(e) => return Err(e.into()),
        }
    }

    if truncated_docs > 0 {
        log::debug!(
            "rerank for {}: {truncated_docs} candidate texts truncated to {} tokens",
            query.query_id,
            params.doc_token_budget
        );
    }

    Ok(RerankOutcome {
        permutation: Permutation {
            order: working,
            repaired: any_repaired,
        },
        usage,
        degraded: false,
        truncated_docs,
    })
}

fn flatten_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Cut text to roughly `budget` tokens under the byte estimator.
fn truncate_to_tokens(text: &str, budget: usize) -> (String, bool) {
    let max_bytes = budget * 4;
    if text.len() <= max_bytes {
        return (text.to_string(), false);
    }
    let mut cut = max_bytes;
    while cut > 0 && !text.is_char_boundary(cut) {
        cut -= 1;
    }
    (text[..cut].to_string(), true)
}

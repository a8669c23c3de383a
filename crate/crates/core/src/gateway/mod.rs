//! Uniform interface to text-generation providers with usage accounting,
//! retry, and an in-flight cap per provider.

mod money;
mod providers;

pub use money::{cost_of, cost_of_all, estimate_tokens, MicroDollars, ModelVariant, MoneyError,
    PriceTable, Thinking};
pub use providers::{prompt_hash, IdentityProvider, OracleRerankProvider, Provider, ProviderError,
    ProviderReply, ProviderRequest, ReplayProvider, ScriptedProvider, TranscriptRecord};

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which pipeline stage issued a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Qe,
    Rr,
}

/// Token and latency accounting for one generation call.
///
/// Thinking tokens, when a provider reports them, are folded into
/// `output_tokens`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub variant_name: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_secs: f64,
    pub stage: Stage,
    pub query_id: String,
    /// True when token counts came from the byte estimator rather than
    /// the provider.
    pub estimated: bool,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("prompt of ~{prompt_tokens} tokens exceeds context window of {max}")]
    ContextOverflow { prompt_tokens: u64, max: u64 },
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("no provider registered for id {0:?}")]
    UnknownProvider(String),
}

/// Retry schedule for transient transport failures.
///
/// Deterministic providers are never retried.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    /// Three retries with 1s/2s/4s backoff.
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay: Duration::ZERO,
        }
    }

    fn delay(&self, retry_index: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry_index)
    }
}

/// Counting semaphore bounding concurrent calls into one provider.
struct InFlight {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            permits: Mutex::new(limit),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Gateway to registered providers.
///
/// Safe to share across threads; usage records land in an append-only
/// collector that concurrent callers may write to.
pub struct Gateway {
    table: PriceTable,
    providers: HashMap<String, Arc<dyn Provider>>,
    limiters: HashMap<String, Arc<InFlight>>,
    retry: RetryPolicy,
    max_in_flight: usize,
    collector: Mutex<Vec<UsageRecord>>,
}

impl Gateway {
    pub fn new(table: PriceTable) -> Self {
        Self {
            table,
            providers: HashMap::new(),
            limiters: HashMap::new(),
            retry: RetryPolicy::default(),
            max_in_flight: 8,
            collector: Mutex::new(Vec::new()),
        }
    }

    pub fn with_provider(mut self, provider: Arc<dyn Provider>) -> Self {
        let id = provider.id().to_string();
        self.limiters
            .insert(id.clone(), Arc::new(InFlight::new(self.max_in_flight)));
        self.providers.insert(id, provider);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Maximum concurrent calls per provider. Applies to providers
    /// registered after this call.
    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        assert!(limit > 0);
        self.max_in_flight = limit;
        self
    }

    pub fn price_table(&self) -> &PriceTable {
        &self.table
    }

    /// Run one generation call against the variant's provider.
    ///
    /// The prompt is checked against the context window before any
    /// provider call. Missing token counts are filled from the byte
    /// estimator and flagged.
    pub fn generate(
        &self,
        variant_name: &str,
        prompt: &str,
        stage: Stage,
        query_id: &str,
        candidate_doc_ids: &[String],
    ) -> Result<(String, UsageRecord), GatewayError> {
        let variant = self
            .table
            .get(variant_name)
            .ok_or_else(|| GatewayError::UnknownVariant(variant_name.to_string()))?;
        let prompt_tokens = estimate_tokens(prompt);
        if prompt_tokens > variant.max_context_tokens {
            return Err(GatewayError::ContextOverflow {
                prompt_tokens,
                max: variant.max_context_tokens,
            });
        }
        let provider = self
            .providers
            .get(&variant.provider_id)
            .ok_or_else(|| GatewayError::UnknownProvider(variant.provider_id.clone()))?;
        let _guard = self.limiters[&variant.provider_id].acquire();

        let request = ProviderRequest {
            variant,
            prompt,
            stage,
            query_id,
            candidate_doc_ids,
        };

        let mut attempt = 0u32;
        let reply = loop {
            match provider.complete(&request) {
                Ok(reply) => break reply,
                Err(ProviderError::Auth(msg)) => return Err(GatewayError::AuthError(msg)),
                Err(ProviderError::Fatal(msg)) => {
                    return Err(GatewayError::ProviderUnavailable(msg))
                }
                Err(ProviderError::Transient(msg)) => {
                    if provider.deterministic() || attempt >= self.retry.max_retries {
                        return Err(GatewayError::ProviderUnavailable(msg));
                    }
                    let delay = self.retry.delay(attempt);
                    log::warn!(
                        "transient failure from {} (attempt {}): {msg}; retrying in {delay:?}",
                        provider.id(),
                        attempt + 1
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
            }
        };

        let estimated = reply.input_tokens.is_none() || reply.output_tokens.is_none();
        let usage = UsageRecord {
            variant_name: variant.name.clone(),
            input_tokens: reply.input_tokens.unwrap_or(prompt_tokens),
            output_tokens: reply
                .output_tokens
                .unwrap_or_else(|| estimate_tokens(&reply.completion)),
            latency_secs: reply.latency_secs,
            stage,
            query_id: query_id.to_string(),
            estimated,
        };
        self.collector.lock().unwrap().push(usage.clone());
        Ok((reply.completion, usage))
    }

    /// Snapshot of every usage record collected so far.
    pub fn usage_log(&self) -> Vec<UsageRecord> {
        self.collector.lock().unwrap().clone()
    }
}

/// Resolve a provider's API key from `RRPIPE_API_KEY_<PROVIDER_ID>`.
///
/// Non-alphanumeric characters in the id map to underscores. Keys are only
/// ever read from the environment.
pub fn resolve_api_key(provider_id: &str) -> Option<String> {
    let suffix: String = provider_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_uppercase()
            } else {
                '_'
            }
        })
        .collect();
    std::env::var(format!("RRPIPE_API_KEY_{suffix}")).ok()
}

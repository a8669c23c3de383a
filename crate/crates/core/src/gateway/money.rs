//! Fixed-point money, model price tables, and token accounting.
//!
//! All cost arithmetic happens in integer micro-dollars. Prices are read
//! from a config file in decimal dollars per million tokens and converted
//! once at load time.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::UsageRecord;

#[derive(Debug, Error)]
pub enum MoneyError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("malformed price record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate variant name {0:?}")]
    DuplicateVariant(String),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Non-negative dollar amount in millionths.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct MicroDollars(pub u64);

impl MicroDollars {
    pub const ZERO: MicroDollars = MicroDollars(0);

    /// Convert a decimal dollar amount, rounding half up to the micro-dollar.
    ///
    /// Intended for config values; amounts must be finite and non-negative.
    pub fn from_dollars(d: f64) -> Option<Self> {
        if !d.is_finite() || d < 0.0 {
            return None;
        }
        let micros = (d * 1e6).round();
        if micros > u64::MAX as f64 {
            return None;
        }
        Some(Self(micros as u64))
    }

    pub fn as_dollars_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl Add for MicroDollars {
    type Output = MicroDollars;
    fn add(self, rhs: Self) -> Self {
        MicroDollars(self.0 + rhs.0)
    }
}

impl AddAssign for MicroDollars {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sum for MicroDollars {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}

impl std::fmt::Display for MicroDollars {
    /// Renders as decimal dollars with six fractional digits, e.g. `0.100000`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// Whether the provider's extended-reasoning mode is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thinking {
    Off,
    Dynamic,
}

/// A named model configuration with its unit prices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelVariant {
    pub name: String,
    pub provider_id: String,
    pub thinking: Thinking,
    /// Price per one million input tokens.
    pub price_in: MicroDollars,
    /// Price per one million output tokens (thinking tokens included).
    pub price_out: MicroDollars,
    pub max_context_tokens: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PriceRecord {
    name: String,
    provider_id: String,
    thinking: Thinking,
    /// Dollars per million input tokens.
    price_in: f64,
    /// Dollars per million output tokens.
    price_out: f64,
    max_context_tokens: u64,
}

/// Lookup table of model variants, unique by name.
#[derive(Debug, Clone, Default)]
pub struct PriceTable {
    variants: Vec<ModelVariant>,
    by_name: HashMap<String, usize>,
}

impl PriceTable {
    pub fn from_variants(variants: Vec<ModelVariant>) -> Result<Self, MoneyError> {
        let mut by_name = HashMap::with_capacity(variants.len());
        for (i, v) in variants.iter().enumerate() {
            if v.max_context_tokens == 0 {
                return Err(MoneyError::MalformedRecord {
                    line: 0,
                    reason: format!("variant {:?} has max_context_tokens 0", v.name),
                });
            }
            if by_name.insert(v.name.clone(), i).is_some() {
                return Err(MoneyError::DuplicateVariant(v.name.clone()));
            }
        }
        Ok(Self { variants, by_name })
    }

    /// Load a price table file: one JSON record per line with fields
    /// `name, provider_id, thinking, price_in, price_out, max_context_tokens`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MoneyError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(MoneyError::MissingFile(path.display().to_string()));
        }
        let reader = BufReader::new(File::open(path)?);
        let mut variants = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PriceRecord =
                serde_json::from_str(&line).map_err(|e| MoneyError::MalformedRecord {
                    line: lineno,
                    reason: e.to_string(),
                })?;
            let price_in =
                MicroDollars::from_dollars(rec.price_in).ok_or(MoneyError::MalformedRecord {
                    line: lineno,
                    reason: format!("bad price_in {}", rec.price_in),
                })?;
            let price_out =
                MicroDollars::from_dollars(rec.price_out).ok_or(MoneyError::MalformedRecord {
                    line: lineno,
                    reason: format!("bad price_out {}", rec.price_out),
                })?;
            variants.push(ModelVariant {
                name: rec.name,
                provider_id: rec.provider_id,
                thinking: rec.thinking,
                price_in,
                price_out,
                max_context_tokens: rec.max_context_tokens,
            });
        }
        Self::from_variants(variants)
    }

    pub fn get(&self, name: &str) -> Option<&ModelVariant> {
        self.by_name.get(name).map(|&i| &self.variants[i])
    }

    pub fn variants(&self) -> &[ModelVariant] {
        &self.variants
    }
}

/// Fallback token estimate: ceil(byte_length / 4).
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64 + 3) / 4
}

/// Cost of one call in micro-dollars, rounded half up.
///
/// Exact integer arithmetic: `tokens * price` has a fixed denominator of
/// one million, so a single division rounds the final value.
pub fn cost_of(usage: &UsageRecord, table: &PriceTable) -> Result<MicroDollars, MoneyError> {
    let variant = table
        .get(&usage.variant_name)
        .ok_or_else(|| MoneyError::UnknownVariant(usage.variant_name.clone()))?;
    let num = usage.input_tokens as u128 * variant.price_in.0 as u128
        + usage.output_tokens as u128 * variant.price_out.0 as u128;
    let micros = (num + 500_000) / 1_000_000;
    Ok(MicroDollars(micros as u64))
}

/// Total cost of a batch, defined as the sum of per-record costs.
pub fn cost_of_all<'a, I>(usages: I, table: &PriceTable) -> Result<MicroDollars, MoneyError>
where
    I: IntoIterator<Item = &'a UsageRecord>,
{
    let mut total = MicroDollars::ZERO;
    for u in usages {
        total += cost_of(u, table)?;
    }
    Ok(total)
}

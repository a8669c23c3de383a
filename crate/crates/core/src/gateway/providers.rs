//! Text-generation providers, including the deterministic built-ins used
//! for offline runs and CI: `scripted`, `replay`, `identity`, and
//! `oracle-rerank`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{ModelVariant, Stage};
use crate::corpus::Qrels;

/// Hash used to key scripted completions and replay transcripts.
pub fn prompt_hash(prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    hex_lower(&h.finalize())
}

fn hex_lower(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Error)]
pub enum ProviderError {
    /// Worth retrying: timeouts, rate limits, transport hiccups.
    #[error("transient provider failure: {0}")]
    Transient(String),
    /// Not worth retrying.
    #[error("provider failure: {0}")]
    Fatal(String),
    #[error("authentication failed: {0}")]
    Auth(String),
}

/// One generation call as seen by a provider.
pub struct ProviderRequest<'a> {
    pub variant: &'a ModelVariant,
    pub prompt: &'a str,
    pub stage: Stage,
    pub query_id: &'a str,
    /// Doc ids of the candidates behind a re-ranking prompt, in prompt
    /// order. Empty for expansion calls. Real providers ignore this; the
    /// oracle mock needs it.
    pub candidate_doc_ids: &'a [String],
}

/// What a provider returns. Token counts are optional; the gateway falls
/// back to the byte estimator and flags the record as estimated.
#[derive(Debug, Clone)]
pub struct ProviderReply {
    pub completion: String,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
    pub latency_secs: f64,
}

impl ProviderReply {
    fn instant(completion: String) -> Self {
        Self {
            completion,
            input_tokens: None,
            output_tokens: None,
            latency_secs: 0.0,
        }
    }
}

pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    /// Deterministic providers are never retried and never touch the network.
    fn deterministic(&self) -> bool;
    fn complete(&self, req: &ProviderRequest<'_>) -> Result<ProviderReply, ProviderError>;
}

fn identity_ranking(k: usize) -> String {
    let mut out = String::new();
    for i in 1..=k {
        if i > 1 {
            out.push_str(" > ");
        }
        out.push_str(&format!("[{i}]"));
    }
    out
}

/// Replays a fixed map from prompt hash to completion.
///
/// Unscripted prompts still complete deterministically: expansion calls get
/// a short hash-derived phrase, re-ranking calls get the identity ranking.
pub struct ScriptedProvider {
    id: String,
    script: HashMap<String, String>,
}

impl ScriptedProvider {
    pub fn new(id: impl Into<String>, script: HashMap<String, String>) -> Self {
        Self {
            id: id.into(),
            script,
        }
    }

    /// Convenience: key the script by plaintext prompts.
    pub fn from_plaintext<I, S1, S2>(id: impl Into<String>, entries: I) -> Self
    where
        I: IntoIterator<Item = (S1, S2)>,
        S1: AsRef<str>,
        S2: Into<String>,
    {
        let script = entries
            .into_iter()
            .map(|(p, c)| (prompt_hash(p.as_ref()), c.into()))
            .collect();
        Self::new(id, script)
    }

    /// Load a script file: JSON records of `prompt_hash`, `completion`.
    pub fn from_file(id: impl Into<String>, path: impl AsRef<Path>) -> std::io::Result<Self> {
        #[derive(Deserialize)]
        struct Entry {
            prompt_hash: String,
            completion: String,
        }
        let reader = BufReader::new(File::open(path)?);
        let mut script = HashMap::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: Entry = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            script.insert(e.prompt_hash, e.completion);
        }
        Ok(Self::new(id, script))
    }
}

impl Provider for ScriptedProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn complete(&self, req: &ProviderRequest<'_>) -> Result<ProviderReply, ProviderError> {
        let hash = prompt_hash(req.prompt);
        if let Some(completion) = self.script.get(&hash) {
            return Ok(ProviderReply::instant(completion.clone()));
        }
        let completion = match req.stage {
            Stage::Qe => format!("expansion {}", &hash[..8]),
            Stage::Rr => identity_ranking(req.candidate_doc_ids.len()),
        };
        Ok(ProviderReply::instant(completion))
    }
}

/// One line of a replay transcript.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub prompt_hash: String,
    pub completion: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency: f64,
}

/// Replays recorded completions and usage byte-for-byte.
pub struct ReplayProvider {
    id: String,
    transcript: HashMap<String, TranscriptRecord>,
}

impl ReplayProvider {
    pub fn from_records(id: impl Into<String>, records: Vec<TranscriptRecord>) -> Self {
        Self {
            id: id.into(),
            transcript: records
                .into_iter()
                .map(|r| (r.prompt_hash.clone(), r))
                .collect(),
        }
    }

    pub fn from_file(id: impl Into<String>, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut records = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: TranscriptRecord = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            records.push(r);
        }
        Ok(Self::from_records(id, records))
    }
}

impl Provider for ReplayProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn complete(&self, req: &ProviderRequest<'_>) -> Result<ProviderReply, ProviderError> {
        let hash = prompt_hash(req.prompt);
        let rec = self
            .transcript
            .get(&hash)
            .ok_or_else(|| ProviderError::Fatal(format!("transcript has no entry for {hash}")))?;
        Ok(ProviderReply {
            completion: rec.completion.clone(),
            input_tokens: Some(rec.input_tokens),
            output_tokens: Some(rec.output_tokens),
            latency_secs: rec.latency,
        })
    }
}

/// No-op provider: empty expansions, identity rankings.
pub struct IdentityProvider {
    id: String,
}

impl IdentityProvider {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into() }
    }
}

impl Provider for IdentityProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn complete(&self, req: &ProviderRequest<'_>) -> Result<ProviderReply, ProviderError> {
        let completion = match req.stage {
            Stage::Qe => String::new(),
            Stage::Rr => identity_ranking(req.candidate_doc_ids.len()),
        };
        Ok(ProviderReply::instant(completion))
    }
}

/// Test-only reranker that emits the qrels-ideal ordering of the window.
///
/// Candidates are sorted by relevance grade descending, original position
/// ascending on ties, so the output is stable and deterministic.
pub struct OracleRerankProvider {
    id: String,
    qrels: Qrels,
}

impl OracleRerankProvider {
    pub fn new(id: impl Into<String>, qrels: Qrels) -> Self {
        Self {
            id: id.into(),
            qrels,
        }
    }
}

impl Provider for OracleRerankProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn complete(&self, req: &ProviderRequest<'_>) -> Result<ProviderReply, ProviderError> {
        if req.stage == Stage::Qe {
            return Ok(ProviderReply::instant(String::new()));
        }
        let grades = self.qrels.grades_for(req.query_id);
        let mut positions: Vec<usize> = (0..req.candidate_doc_ids.len()).collect();
        positions.sort_by_key(|&i| {
            let grade = grades
                .and_then(|g| g.get(&req.candidate_doc_ids[i]))
                .copied()
                .unwrap_or(0);
            (std::cmp::Reverse(grade), i)
        });
        let ranking = positions
            .iter()
            .map(|&i| format!("[{}]", i + 1))
            .collect::<Vec<_>>()
            .join(" > ");
        Ok(ProviderReply::instant(ranking))
    }
}

//! Text analysis: lowercasing, alphanumeric splitting, stopword removal.
//!
//! The default analyzer lowercases Unicode text, splits on any
//! non-alphanumeric character, and drops tokens from a fixed built-in
//! English stopword list. No stemming is applied by default; an optional
//! Snowball stemmer can be enabled for ablations.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Version tag of the built-in stopword resource.
pub const STOPWORDS_VERSION: &str = "en-v1";

const STOPWORDS_RAW: &str = include_str!("../resources/stopwords-en-v1.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_RAW.lines().filter(|w| !w.is_empty()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerOptions {
    pub remove_stopwords: bool,
    pub stem: bool,
}

impl Default for AnalyzerOptions {
    fn default() -> Self {
        Self {
            remove_stopwords: true,
            stem: false,
        }
    }
}

/// Tokenize with the default options.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, AnalyzerOptions::default())
}

pub fn tokenize_with(text: &str, opts: AnalyzerOptions) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut out = Vec::new();
    for raw in lowered.split(|c: char| !c.is_alphanumeric()) {
        if raw.is_empty() {
            continue;
        }
        if opts.remove_stopwords && stopwords().contains(raw) {
            continue;
        }
        if opts.stem {
            out.push(stem(raw));
        } else {
            out.push(raw.to_string());
        }
    }
    out
}

fn stem(token: &str) -> String {
    use rust_stemmers::{Algorithm, Stemmer};
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER
        .get_or_init(|| Stemmer::create(Algorithm::English))
        .stem(token)
        .into_owned()
}

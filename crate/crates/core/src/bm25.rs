//! From-scratch BM25 inverted index.
//!
//! Scores follow the non-negative Robertson/Lucene form:
//!
//! ```text
//! score(d, q) = sum over t in q of idf(t) * tf*(k1+1) / (tf + k1*(1 - b + b*len/avg_len))
//! idf(t)      = ln((N - df + 0.5) / (df + 0.5) + 1)
//! ```
//!
//! The index is immutable after build and safe for concurrent searches.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::analysis::AnalyzerOptions;
use crate::corpus::Corpus;
use crate::ranking::{Provenance, RankedList};
use crate::scalar::Real;

/// Magic bytes at the start of every index snapshot.
pub const SNAPSHOT_MAGIC: &[u8; 10] = b"RRPIPE-IDX";
/// Current snapshot format version.
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum Bm25Error {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an index snapshot (bad magic bytes)")]
    BadMagic,
    #[error("snapshot format version {found} unsupported (expected {SNAPSHOT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

/// BM25 free parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params<R> {
    pub k1: R,
    pub b: R,
}

impl<R: Real> Bm25Params<R> {
    /// Robertson defaults: k1 = 1.2, b = 0.75.
    pub fn standard() -> Self {
        Self {
            k1: R::from_f64(1.2).unwrap(),
            b: R::from_f64(0.75).unwrap(),
        }
    }

    pub fn new(k1: R, b: R) -> Self {
        Self { k1, b }
    }
}

/// Inverted index over a corpus, parameterized by the score scalar.
#[derive(Debug, Clone)]
pub struct Bm25Index<R> {
    /// term -> (doc ordinal, term frequency), ordinals strictly increasing.
    postings: HashMap<String, Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: R,
    doc_ids: Vec<String>,
    params: Bm25Params<R>,
    analyzer: AnalyzerOptions,
}

impl<R: Real> Bm25Index<R> {
    /// Build an index from tokenized documents.
    ///
    /// Documents that tokenize to nothing are retained with length 0.
    pub fn build(
        corpus: &Corpus,
        params: Bm25Params<R>,
        analyzer: AnalyzerOptions,
    ) -> Result<Self, Bm25Error> {
        if corpus.is_empty() {
            return Err(Bm25Error::EmptyCorpus);
        }
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        let mut doc_ids = Vec::with_capacity(corpus.len());

        for (ord, doc) in corpus.iter().enumerate() {
            let ord = ord as u32;
            let tokens = crate::analysis::tokenize_with(&doc.text, analyzer);
            doc_lengths.push(tokens.len() as u32);
            doc_ids.push(doc.doc_id.clone());
            let mut tfs: HashMap<&str, u32> = HashMap::new();
            for t in &tokens {
                *tfs.entry(t.as_str()).or_insert(0) += 1;
            }
            for (term, tf) in tfs {
                // build iterates docs in order, so lists stay sorted by ordinal
                postings.entry(term.to_string()).or_default().push((ord, tf));
            }
        }

        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_length = R::from_u64(total).unwrap() / R::from_count(doc_lengths.len());

        Ok(Self {
            postings,
            doc_lengths,
            avg_doc_length,
            doc_ids,
            params,
            analyzer,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_length(&self) -> R {
        self.avg_doc_length
    }

    pub fn params(&self) -> Bm25Params<R> {
        self.params
    }

    pub fn analyzer(&self) -> AnalyzerOptions {
        self.analyzer
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn postings(&self, term: &str) -> Option<&[(u32, u32)]> {
        self.postings.get(term).map(|v| v.as_slice())
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    /// Inverse document frequency for a document frequency.
    pub fn idf(&self, df: usize) -> R {
        let half = R::from_f64(0.5).unwrap();
        let n = R::from_count(self.doc_count());
        let df = R::from_count(df);
        ((n - df + half) / (df + half) + R::one()).ln()
    }

    /// Score all documents against the query terms and return the top `n`.
    ///
    /// Repeated query terms contribute once per occurrence. Documents with
    /// no term overlap are excluded. Ties are broken by doc_id ascending.
    pub fn search<T: AsRef<str>>(&self, query_id: &str, terms: &[T], n: usize) -> RankedList<R> {
        let doc_count = self.doc_count();
        let mut scores: Vec<R> = vec![R::zero(); doc_count];
        let mut touched = vec![false; doc_count];
        let one = R::one();
        let Bm25Params { k1, b } = self.params;

        for term in terms {
            let Some(posting) = self.postings.get(term.as_ref()) else {
                continue;
            };
            let idf = self.idf(posting.len());
            for &(ord, tf) in posting {
                let ord = ord as usize;
                let len = R::from_u32(self.doc_lengths[ord]).unwrap();
                let tf = R::from_u32(tf).unwrap();
                let norm = one - b + b * (len / self.avg_doc_length);
                let contrib = idf * (tf * (k1 + one)) / (tf + k1 * norm);
                scores[ord] = scores[ord] + contrib;
                touched[ord] = true;
            }
        }

        let mut hits: Vec<(usize, R)> = touched
            .iter()
            .enumerate()
            .filter(|&(_, &t)| t)
            .map(|(ord, _)| (ord, scores[ord]))
            .collect();
        hits.sort_unstable_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("bm25 scores are finite")
                .then_with(|| self.doc_ids[a.0].cmp(&self.doc_ids[b.0]))
        });
        hits.truncate(n);

        RankedList {
            query_id: query_id.to_string(),
            entries: hits
                .into_iter()
                .map(|(ord, s)| (self.doc_ids[ord].clone(), s))
                .collect(),
            provenance: Provenance::InitialRetrieval,
        }
    }

    /// Check the structural invariants; used by tests and the snapshot loader.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.doc_count();
        if n == 0 {
            return Err("empty index".into());
        }
        if self.doc_lengths.len() != n {
            return Err("doc_lengths length mismatch".into());
        }
        for (term, list) in &self.postings {
            let mut prev: Option<u32> = None;
            for &(ord, tf) in list {
                if ord as usize >= n {
                    return Err(format!("posting for {term:?} has ordinal {ord} >= {n}"));
                }
                if tf == 0 {
                    return Err(format!("posting for {term:?} has zero tf"));
                }
                if let Some(p) = prev {
                    if ord <= p {
                        return Err(format!("postings for {term:?} not strictly increasing"));
                    }
                }
                prev = Some(ord);
            }
        }
        let total: u64 = self.doc_lengths.iter().map(|&l| l as u64).sum();
        let mean = total as f64 / n as f64;
        let stored = self.avg_doc_length.to_f64().unwrap();
        if (stored - mean).abs() > 1e-9 {
            return Err(format!("avg_doc_length {stored} != mean {mean}"));
        }
        Ok(())
    }

    /// Write a versioned binary snapshot.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&[
            self.analyzer.remove_stopwords as u8,
            self.analyzer.stem as u8,
        ])?;
        put_f64(&mut w, self.params.k1.to_f64().unwrap())?;
        put_f64(&mut w, self.params.b.to_f64().unwrap())?;
        put_f64(&mut w, self.avg_doc_length.to_f64().unwrap())?;
        put_u64(&mut w, self.doc_ids.len() as u64)?;
        for id in &self.doc_ids {
            put_str(&mut w, id)?;
        }
        for &len in &self.doc_lengths {
            w.write_all(&len.to_le_bytes())?;
        }
        // sorted term order keeps snapshots byte-reproducible
        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort();
        put_u64(&mut w, terms.len() as u64)?;
        for term in terms {
            put_str(&mut w, term)?;
            let list = &self.postings[term];
            put_u64(&mut w, list.len() as u64)?;
            for &(ord, tf) in list {
                w.write_all(&ord.to_le_bytes())?;
                w.write_all(&tf.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Load a snapshot, rejecting unknown formats and versions.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SnapshotError> {
        let mut r = BufReader::new(File::open(path.as_ref())?);
        let mut magic = [0u8; 10];
        r.read_exact(&mut magic)
            .map_err(|_| SnapshotError::BadMagic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = get_u32(&mut r)?;
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::VersionMismatch { found: version });
        }
        let mut flags = [0u8; 2];
        r.read_exact(&mut flags)?;
        let analyzer = AnalyzerOptions {
            remove_stopwords: flags[0] != 0,
            stem: flags[1] != 0,
        };
        let k1 = get_f64(&mut r)?;
        let b = get_f64(&mut r)?;
        let avg = get_f64(&mut r)?;
        let doc_count = get_u64(&mut r)? as usize;
        let mut doc_ids = Vec::with_capacity(doc_count);
        for _ in 0..doc_count {
            doc_ids.push(get_str(&mut r)?);
        }
        let mut doc_lengths = Vec::with_capacity(doc_count);
        for _ in 0..doc_count {
            doc_lengths.push(get_u32(&mut r)?);
        }
        let term_count = get_u64(&mut r)? as usize;
        let mut postings = HashMap::with_capacity(term_count);
        for _ in 0..term_count {
            let term = get_str(&mut r)?;
            let len = get_u64(&mut r)? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let ord = get_u32(&mut r)?;
                let tf = get_u32(&mut r)?;
                list.push((ord, tf));
            }
            postings.insert(term, list);
        }
        let index = Self {
            postings,
            doc_lengths,
            avg_doc_length: R::from_f64(avg)
                .ok_or_else(|| SnapshotError::Corrupt("avg_doc_length".into()))?,
            doc_ids,
            params: Bm25Params {
                k1: R::from_f64(k1).ok_or_else(|| SnapshotError::Corrupt("k1".into()))?,
                b: R::from_f64(b).ok_or_else(|| SnapshotError::Corrupt("b".into()))?,
            },
            analyzer,
        };
        index.validate().map_err(SnapshotError::Corrupt)?;
        Ok(index)
    }
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32, SnapshotError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64, SnapshotError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64, SnapshotError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn get_str<R: Read>(r: &mut R) -> Result<String, SnapshotError> {
    let len = get_u32(r)? as usize;
    if len > 1 << 30 {
        return Err(SnapshotError::Corrupt("string length".into()));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| SnapshotError::Corrupt("non-utf8 string".into()))
}

//! Documents, queries, relevance judgments, and their on-disk formats.
//!
//! Corpus and query files are line-delimited JSON, one record per line.
//! Qrels are whitespace-separated `query_id doc_id grade` triples. Loaded
//! collections are immutable and safe to share across threads.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("duplicate query_id {0:?}")]
    DuplicateQueryId(String),
    #[error("negative relevance grade at line {line}")]
    NegativeGrade { line: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One corpus entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    /// Domain or topic tag, used as a runtime filter.
    pub subset: String,
    pub text: String,
}

/// One evaluation query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub subset: String,
    pub text: String,
}

/// Immutable document collection, iteration order equals file order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_documents(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if by_id.insert(d.doc_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateDocId(d.doc_id.clone()));
            }
        }
        Ok(Self { docs, by_id })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.docs.iter()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    /// Keep only documents from the given subset.
    pub fn filter_subset(&self, subset: &str) -> Corpus {
        let docs = self
            .docs
            .iter()
            .filter(|d| d.subset == subset)
            .cloned()
            .collect();
        Corpus::from_documents(docs).expect("ids unique in source corpus")
    }
}

/// Immutable query collection, iteration order equals file order.
#[derive(Debug, Clone, Default)]
pub struct QuerySet {
    queries: Vec<Query>,
    by_id: HashMap<String, usize>,
}

impl QuerySet {
    pub fn from_queries(queries: Vec<Query>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(queries.len());
        for (i, q) in queries.iter().enumerate() {
            if by_id.insert(q.query_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateQueryId(q.query_id.clone()));
            }
        }
        Ok(Self { queries, by_id })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Query> {
        self.queries.iter()
    }

    pub fn get(&self, query_id: &str) -> Option<&Query> {
        self.by_id.get(query_id).map(|&i| &self.queries[i])
    }

    pub fn contains(&self, query_id: &str) -> bool {
        self.by_id.contains_key(query_id)
    }

    pub fn filter_subset(&self, subset: &str) -> QuerySet {
        let queries = self
            .queries
            .iter()
            .filter(|q| q.subset == subset)
            .cloned()
            .collect();
        QuerySet::from_queries(queries).expect("ids unique in source set")
    }
}

/// Graded relevance judgments keyed by query, then document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Qrels {
    pub judgments: HashMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn grades_for(&self, query_id: &str) -> Option<&HashMap<String, u32>> {
        self.judgments.get(query_id)
    }

    /// True when the query has at least one document with grade > 0.
    pub fn has_relevant(&self, query_id: &str) -> bool {
        self.judgments
            .get(query_id)
            .map(|m| m.values().any(|&g| g > 0))
            .unwrap_or(false)
    }
}

/// Non-fatal problems found while loading qrels. Records are skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QrelsWarning {
    UnknownQueryId { line: usize, query_id: String },
}

impl std::fmt::Display for QrelsWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QrelsWarning::UnknownQueryId { line, query_id } => {
                write!(f, "line {line}: unknown query_id {query_id:?}, record skipped")
            }
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    if !path.exists() {
        return Err(CorpusError::MissingFile(path.display().to_string()));
    }
    Ok(BufReader::new(File::open(path)?))
}

/// Load a corpus file: one JSON document record per line.
///
/// Rejects duplicate ids, empty ids, and text that is empty after trimming.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let reader = open(path.as_ref())?;
    let mut docs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                line: lineno,
                reason: e.to_string(),
            })?;
        if doc.doc_id.is_empty() {
            return Err(CorpusError::MalformedRecord {
                line: lineno,
                reason: "empty doc_id".into(),
            });
        }
        if doc.text.trim().is_empty() {
            return Err(CorpusError::MalformedRecord {
                line: lineno,
                reason: "empty text".into(),
            });
        }
        if seen.insert(doc.doc_id.clone(), lineno).is_some() {
            return Err(CorpusError::DuplicateDocId(doc.doc_id));
        }
        docs.push(doc);
    }
    Corpus::from_documents(docs)
}

/// Load a query file: one JSON query record per line.
pub fn load_queries(path: impl AsRef<Path>) -> Result<QuerySet, CorpusError> {
    let reader = open(path.as_ref())?;
    let mut queries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let q: Query = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
        if q.query_id.is_empty() {
            return Err(CorpusError::MalformedRecord {
                line: lineno,
                reason: "empty query_id".into(),
            });
        }
        queries.push(q);
    }
    QuerySet::from_queries(queries)
}

/// Load trec-style qrels: `query_id doc_id grade` per line.
///
/// Records naming a query_id that is not in `queries` are skipped and
/// returned as warnings. Negative grades are a hard error.
pub fn load_qrels(
    path: impl AsRef<Path>,
    queries: &QuerySet,
) -> Result<(Qrels, Vec<QrelsWarning>), CorpusError> {
    let reader = open(path.as_ref())?;
    let mut qrels = Qrels::default();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(CorpusError::MalformedRecord {
                line: lineno,
                reason: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let grade: i64 = fields[2].parse().map_err(|_| CorpusError::MalformedRecord {
            line: lineno,
            reason: format!("unparseable grade {:?}", fields[2]),
        })?;
        if grade < 0 {
            return Err(CorpusError::NegativeGrade { line: lineno });
        }
        let query_id = fields[0];
        if !queries.contains(query_id) {
            warnings.push(QrelsWarning::UnknownQueryId {
                line: lineno,
                query_id: query_id.to_string(),
            });
            continue;
        }
        qrels
            .judgments
            .entry(query_id.to_string())
            .or_default()
            .insert(fields[1].to_string(), grade as u32);
    }
    Ok((qrels, warnings))
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for doc in corpus.iter() {
        serde_json::to_writer(&mut w, doc).map_err(|e| CorpusError::MalformedRecord {
            line: 0,
            reason: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_queries(queries: &QuerySet, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for q in queries.iter() {
        serde_json::to_writer(&mut w, q).map_err(|e| CorpusError::MalformedRecord {
            line: 0,
            reason: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_qrels(qrels: &Qrels, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    // stable output order
    let mut qids: Vec<&String> = qrels.judgments.keys().collect();
    qids.sort();
    for qid in qids {
        let grades = &qrels.judgments[qid];
        let mut dids: Vec<&String> = grades.keys().collect();
        dids.sort();
        for did in dids {
            writeln!(w, "{} {} {}", qid, did, grades[did])?;
        }
    }
    w.flush()?;
    Ok(())
}

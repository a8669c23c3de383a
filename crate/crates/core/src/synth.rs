//! Deterministic synthetic datasets for tests and offline demos.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document, Qrels, Query, QuerySet};

/// A self-contained corpus + queries + qrels bundle.
pub struct SynthDataset {
    pub corpus: Corpus,
    pub queries: QuerySet,
    pub qrels: Qrels,
}

/// Desk-scale dataset: 50 documents, 10 queries, graded judgments.
///
/// Each query `topic{i} common` has three relevant documents:
/// two strong ones (grade 2) that mention the topic term and rank at the
/// top of BM25, and one weak one (grade 1) that shares only the low-idf
/// term `common`. Fifteen blocker documents carry `common` twice, so every
/// weak relevant document lands below BM25 rank 17. Deepening the
/// candidate pool past 10 is therefore required before a reranker can see
/// the weak documents at all.
///
/// The seed only shuffles corpus file order; contents are fixed.
pub fn desk_dataset(seed: u64) -> SynthDataset {
    let mut docs = Vec::with_capacity(50);
    let mut queries = Vec::with_capacity(10);
    let mut qrels = Qrels::default();

    for i in 0..10 {
        let strong_a = format!("s{i}a");
        let strong_b = format!("s{i}b");
        let weak = format!("w{i}");

        docs.push(Document {
            doc_id: strong_a.clone(),
            subset: "desk".into(),
            text: format!("topic{i} topic{i} study notes alpha{i}"),
        });
        docs.push(Document {
            doc_id: strong_b.clone(),
            subset: "desk".into(),
            text: format!("topic{i} topic{i} study notes beta{i}"),
        });
        docs.push(Document {
            doc_id: weak.clone(),
            subset: "desk".into(),
            text: "common theme background reading overview material extensive archive".into(),
        });

        queries.push(Query {
            query_id: format!("q{i}"),
            subset: "desk".into(),
            text: format!("topic{i} common"),
        });
        let grades = qrels.judgments.entry(format!("q{i}")).or_default();
        grades.insert(strong_a, 2);
        grades.insert(strong_b, 2);
        grades.insert(weak, 1);
    }

    for j in 0..15 {
        docs.push(Document {
            doc_id: format!("b{j:02}"),
            subset: "desk".into(),
            text: "common common quick note".into(),
        });
    }
    for j in 0..5 {
        docs.push(Document {
            doc_id: format!("n{j}"),
            subset: "desk".into(),
            text: format!("unrelated miscellaneous scribbles item{j}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    docs.shuffle(&mut rng);

    SynthDataset {
        corpus: Corpus::from_documents(docs).expect("synthetic ids are unique"),
        queries: QuerySet::from_queries(queries).expect("synthetic ids are unique"),
        qrels,
    }
}

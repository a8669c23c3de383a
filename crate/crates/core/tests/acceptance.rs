//! Acceptance gate: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines; the test names mirror the criteria so the default
//! harness output doubles as the pass/fail report.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rrpipe_core::analysis::AnalyzerOptions;
use rrpipe_core::corpus::{Corpus, Document, Qrels, Query};
use rrpipe_core::gateway::{
    cost_of, cost_of_all, IdentityProvider, MicroDollars, ModelVariant, OracleRerankProvider,
    PriceTable, Provider, ProviderError, ProviderReply, ProviderRequest, ScriptedProvider, Stage,
    Thinking, UsageRecord,
};
use rrpipe_core::metrics::{aggregate, ndcg_at_k, recall_at_k, Gain, QueryResult};
use rrpipe_core::orchestrator::{
    emit_report, run_config, run_sweep, Clock, PipelineConfig, ReportShape, RunRecord, RunStore,
    SweepOptions, TOOLKIT_VERSION,
};
use rrpipe_core::ranking::{Provenance, RankedList};
use rrpipe_core::stages::{parse_permutation, rerank_listwise, CandidateDoc, ExpansionMode,
    RerankParams, Templates};
use rrpipe_core::synth::desk_dataset;
use rrpipe_core::{Bm25Index, Bm25Params, Gateway};

fn pass(criterion: u32, name: &str, started: Instant) {
    println!(
        "ACCEPTANCE {criterion:02} {name}: PASS ({:.2}s)",
        started.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// shared test providers and fixtures

/// Emits a seeded random ranking, sometimes malformed, so repair and set
/// preservation get exercised together.
struct ShuffleProvider {
    seed: u64,
    calls: AtomicUsize,
}

impl ShuffleProvider {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            calls: AtomicUsize::new(0),
        }
    }
}

impl Provider for ShuffleProvider {
    fn id(&self) -> &str {
        "shuffle"
    }
    fn deterministic(&self) -> bool {
        true
    }
    fn complete(&self, req: &ProviderRequest<'_>) -> Result<ProviderReply, ProviderError> {
        if req.stage == Stage::Qe {
            return Ok(ProviderReply {
                completion: String::new(),
                input_tokens: None,
                output_tokens: None,
                latency_secs: 0.0,
            });
        }
        let n = req.candidate_doc_ids.len();
        let call = self.calls.fetch_add(1, Ordering::SeqCst) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(31).wrapping_add(call));
        let mut ids: Vec<usize> = (1..=n).collect();
        for i in (1..ids.len()).rev() {
            ids.swap(i, rng.gen_range(0..=i));
        }
        match rng.gen_range(0..4) {
            0 => ids.truncate(n.saturating_sub(n / 3)), // omissions
            1 => {
                if n > 0 {
                    ids.push(ids[0]); // duplicate
                    ids.push(n + 7); // out of range
                }
            }
            _ => {}
        }
        let completion = ids
            .iter()
            .map(|i| format!("[{i}]"))
            .collect::<Vec<_>>()
            .join(" > ");
        Ok(ProviderReply {
            completion,
            input_tokens: None,
            output_tokens: None,
            latency_secs: 0.0,
        })
    }
}

fn variant(name: &str, provider: &str, price_in: f64, price_out: f64) -> ModelVariant {
    ModelVariant {
        name: name.into(),
        provider_id: provider.into(),
        thinking: Thinking::Off,
        price_in: MicroDollars::from_dollars(price_in).unwrap(),
        price_out: MicroDollars::from_dollars(price_out).unwrap(),
        max_context_tokens: 1_000_000,
    }
}

fn desk_gateway(qrels: &Qrels) -> Gateway {
    let table = PriceTable::from_variants(vec![
        variant("rr-identity", "identity", 0.30, 2.50),
        variant("rr-oracle", "oracle", 0.30, 2.50),
        variant("rr-shuffle", "shuffle", 0.30, 2.50),
    ])
    .unwrap();
    Gateway::new(table)
        .with_provider(Arc::new(IdentityProvider::new("identity")))
        .with_provider(Arc::new(OracleRerankProvider::new("oracle", qrels.clone())))
        .with_provider(Arc::new(ShuffleProvider::new(99)))
}

fn desk_config(rr_variant: &str, k: usize, templates: &Templates) -> PipelineConfig {
    let mut config = PipelineConfig::bm25_only(k, templates);
    config.rr_variant = rr_variant.to_string();
    config
}

// ---------------------------------------------------------------------------
// criterion 1

fn oracle_ndcg(ranked_ids: &[String], judgments: &HashMap<String, u32>, k: usize) -> f64 {
    let dcg = |grades: &[u32]| -> f64 {
        grades
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
            .sum()
    };
    let actual: Vec<u32> = ranked_ids
        .iter()
        .map(|id| judgments.get(id).copied().unwrap_or(0))
        .collect();

    // ideal gain by exhaustive permutation of the judged grades
    let mut grades: Vec<u32> = judgments.values().copied().collect();
    let mut best = 0.0f64;
    permute(&mut grades, 0, &mut |perm| {
        let v = dcg(perm);
        if v > best {
            best = v;
        }
    });
    if best == 0.0 {
        0.0
    } else {
        dcg(&actual) / best
    }
}

fn permute<T, F: FnMut(&[T])>(items: &mut Vec<T>, start: usize, visit: &mut F) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

fn oracle_recall(
    ranked_ids: &[String],
    judgments: &HashMap<String, u32>,
    k: usize,
) -> Option<f64> {
    let relevant: HashSet<&String> = judgments
        .iter()
        .filter(|(_, &g)| g > 0)
        .map(|(id, _)| id)
        .collect();
    if relevant.is_empty() {
        return None;
    }
    let top: HashSet<&String> = ranked_ids.iter().take(k).collect();
    Some(top.intersection(&relevant).count() as f64 / relevant.len() as f64)
}

#[test]
fn acceptance_01_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    for trial in 0..1_200 {
        let n = rng.gen_range(1..=8);
        let ids: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        let judgments: HashMap<String, u32> = ids
            .iter()
            .map(|id| (id.clone(), rng.gen_range(0..=3)))
            .collect();
        let mut order = ids.clone();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let k = rng.gen_range(1..=10);

        let list = RankedList {
            query_id: "q".into(),
            entries: order
                .iter()
                .enumerate()
                .map(|(i, id)| (id.clone(), (n - i) as f64))
                .collect(),
            provenance: Provenance::InitialRetrieval,
        };

        let got_ndcg: f64 = ndcg_at_k(&list, &judgments, k, Gain::Linear);
        let want_ndcg = oracle_ndcg(&order, &judgments, k);
        assert!(
            (got_ndcg - want_ndcg).abs() <= 1e-9,
            "trial {trial}: ndcg {got_ndcg} vs oracle {want_ndcg}"
        );

        let got_recall = recall_at_k::<f64>(&list, &judgments, k);
        match oracle_recall(&order, &judgments, k) {
            Some(want) => {
                let got = got_recall.expect("relevant docs exist");
                assert!(
                    (got - want).abs() <= 1e-9,
                    "trial {trial}: recall {got} vs oracle {want}"
                );
            }
            None => assert!(got_recall.is_err(), "trial {trial}: exclusion must match"),
        }
    }
    assert!(started.elapsed().as_secs_f64() < 10.0, "runtime budget");
    pass(1, "metric oracle equivalence", started);
}

// ---------------------------------------------------------------------------
// criterion 2

struct BruteCorpus {
    ids: Vec<String>,
    tokens: Vec<Vec<String>>,
}

/// Scores each document independently from its token list, no index.
fn brute_force_ranking(
    corpus: &BruteCorpus,
    query: &[String],
    k1: f64,
    b: f64,
    n_results: usize,
) -> Vec<(String, f64)> {
    let n = corpus.tokens.len();
    let total: u64 = corpus.tokens.iter().map(|t| t.len() as u64).sum();
    let avg = total as f64 / n as f64;
    let df = |term: &str| corpus.tokens.iter().filter(|t| t.iter().any(|x| x == term)).count();

    let mut hits: Vec<(String, f64)> = Vec::new();
    for (i, doc) in corpus.tokens.iter().enumerate() {
        let len = doc.len() as f64;
        let mut score = 0.0f64;
        let mut overlap = false;
        for term in query {
            let tf = doc.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            overlap = true;
            let d = df(term) as f64;
            let idf = ((n as f64 - d + 0.5) / (d + 0.5) + 1.0).ln();
            let norm = 1.0 - b + b * (len / avg);
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * norm);
        }
        if overlap {
            hits.push((corpus.ids[i].clone(), score));
        }
    }
    hits.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| a.0.cmp(&b.0))
    });
    hits.truncate(n_results);
    hits
}

#[test]
fn acceptance_02_bm25_fixture_and_rank_equivalence() {
    let started = Instant::now();

    // frozen hand-computed fixture
    let corpus = Corpus::from_documents(vec![
        Document {
            doc_id: "d1".into(),
            subset: "s".into(),
            text: "cat sat mat".into(),
        },
        Document {
            doc_id: "d2".into(),
            subset: "s".into(),
            text: "cat cat dog".into(),
        },
        Document {
            doc_id: "d3".into(),
            subset: "s".into(),
            text: "bird song".into(),
        },
    ])
    .unwrap();
    let index = Bm25Index::build(&corpus, Bm25Params::standard(), AnalyzerOptions::default())
        .unwrap();
    let result = index.search("q", &["cat"], 10);
    let ids: Vec<&str> = result.doc_ids().collect();
    assert_eq!(ids, ["d2", "d1"]);
    assert!((result.entries[0].1 - 0.6243067075264112).abs() < 1e-6);
    assert!((result.entries[1].1 - 0.44713858782297017).abs() < 1e-6);

    // randomized rank equivalence against the per-document brute force
    let mut rng = ChaCha8Rng::seed_from_u64(0xB2525);
    let vocab: Vec<String> = (0..30).map(|i| format!("t{i:02}")).collect();
    for trial in 0..600 {
        let n = rng.gen_range(1..=20);
        let mut docs = Vec::with_capacity(n);
        let mut tokens = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        for d in 0..n {
            let len = rng.gen_range(1..=12);
            let toks: Vec<String> = (0..len)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
                .collect();
            let id = format!("doc{d:02}");
            docs.push(Document {
                doc_id: id.clone(),
                subset: "s".into(),
                text: toks.join(" "),
            });
            tokens.push(toks);
            ids.push(id);
        }
        let corpus = Corpus::from_documents(docs).unwrap();
        let k1 = rng.gen_range(0.2..2.5);
        let b = rng.gen_range(0.0..=1.0);
        let index = Bm25Index::build(
            &corpus,
            Bm25Params::new(k1, b),
            AnalyzerOptions::default(),
        )
        .unwrap();

        let qlen = rng.gen_range(1..=6);
        let query: Vec<String> = (0..qlen)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
            .collect();
        let n_results = rng.gen_range(1..=n + 3);

        let got = index.search("q", &query, n_results);
        let want = brute_force_ranking(&BruteCorpus { ids, tokens }, &query, k1, b, n_results);

        let got_ids: Vec<&str> = got.doc_ids().collect();
        let want_ids: Vec<&str> = want.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(got_ids, want_ids, "trial {trial}: ordering mismatch");
        for ((_, gs), (_, ws)) in got.entries.iter().zip(&want) {
            assert_eq!(gs.to_bits(), ws.to_bits(), "trial {trial}: score drift");
        }
    }
    assert!(started.elapsed().as_secs_f64() < 5.0, "runtime budget");
    pass(2, "bm25 fixture and rank equivalence", started);
}

// ---------------------------------------------------------------------------
// criterion 3

#[test]
fn acceptance_03_permutation_totality() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let charset: Vec<char> = "[]()0123456789 >,.;:x\nabc!-".chars().collect();
    for trial in 0..12_000 {
        let k = rng.gen_range(1..=100);
        let style = rng.gen_range(0..3);
        let response: String = match style {
            // pure noise
            0 => {
                let len = rng.gen_range(0..300);
                (0..len)
                    .map(|_| charset[rng.gen_range(0..charset.len())])
                    .collect()
            }
            // plausible but corrupted rankings
            1 => {
                let m = rng.gen_range(0..2 * k);
                (0..m)
                    .map(|_| format!("[{}]", rng.gen_range(0..k * 2 + 2)))
                    .collect::<Vec<_>>()
                    .join(" > ")
            }
            // arbitrary unicode
            _ => {
                let len = rng.gen_range(0..60);
                (0..len)
                    .map(|_| char::from_u32(rng.gen_range(1..0xD7FF)).unwrap_or('?'))
                    .collect()
            }
        };
        let p = parse_permutation(&response, k);
        assert_eq!(p.order.len(), k, "trial {trial}");
        assert!(p.is_valid(), "trial {trial}: k={k} input={response:?}");
    }
    assert!(started.elapsed().as_secs_f64() < 10.0, "runtime budget");
    pass(3, "permutation totality under fuzzing", started);
}

// ---------------------------------------------------------------------------
// criterion 4

#[test]
fn acceptance_04_rerank_set_preservation() {
    let started = Instant::now();
    let templates = Templates::builtin();
    let table = PriceTable::from_variants(vec![variant("m", "shuffle", 0.1, 0.4)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E7);
    for trial in 0..500u64 {
        let gateway =
            Gateway::new(table.clone()).with_provider(Arc::new(ShuffleProvider::new(trial)));
        let k = rng.gen_range(1..=60);
        let candidates: Vec<CandidateDoc> = (0..k)
            .map(|i| CandidateDoc {
                doc_id: format!("doc-{trial}-{i}"),
                text: format!("body {i}"),
            })
            .collect();
        let mut params = RerankParams::new("m");
        params.window = rng.gen_range(1..=k.min(30));
        params.stride = rng.gen_range(1..=params.window);
        let query = Query {
            query_id: format!("q{trial}"),
            subset: "s".into(),
            text: "anything".into(),
        };
        let outcome =
            rerank_listwise(&gateway, &query, &candidates, &params, &templates).unwrap();
        let mut got: Vec<&str> = outcome
            .permutation
            .order
            .iter()
            .map(|&i| candidates[i].doc_id.as_str())
            .collect();
        let mut want: Vec<&str> = candidates.iter().map(|c| c.doc_id.as_str()).collect();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want, "trial {trial}: candidate set changed");
    }
    pass(4, "rerank set preservation", started);
}

// ---------------------------------------------------------------------------
// criterion 5

#[test]
fn acceptance_05_identity_rerank_equivalence() {
    let started = Instant::now();
    let data = desk_dataset(42);
    let index = Bm25Index::build(
        &data.corpus,
        Bm25Params::standard(),
        AnalyzerOptions::default(),
    )
    .unwrap();
    let gateway = desk_gateway(&data.qrels);
    let templates = Templates::builtin();

    for k in [10, 20, 50, 100] {
        let run = |rr: &str| -> RunRecord {
            run_config(
                &desk_config(rr, k, &templates),
                &data.queries,
                &index,
                &data.corpus,
                &data.qrels,
                &gateway,
                &templates,
                Clock::Fixed(0),
            )
            .unwrap()
        };
        let plain = run("off");
        let ident = run("rr-identity");
        assert_eq!(plain.per_query.len(), 10);
        for (a, b) in plain.per_query.iter().zip(ident.per_query.iter()) {
            assert_eq!(a.query_id, b.query_id);
            assert_eq!(
                a.ndcg_at_10.to_bits(),
                b.ndcg_at_10.to_bits(),
                "ndcg differs for {} at k={k}",
                a.query_id
            );
            assert_eq!(
                a.recall_at_10.to_bits(),
                b.recall_at_10.to_bits(),
                "recall differs for {} at k={k}",
                a.query_id
            );
        }
    }
    pass(5, "identity rerank equals bm25-only", started);
}

// ---------------------------------------------------------------------------
// criterion 6

#[test]
fn acceptance_06_oracle_depth_monotonicity() {
    let started = Instant::now();
    let data = desk_dataset(42);
    let index = Bm25Index::build(
        &data.corpus,
        Bm25Params::standard(),
        AnalyzerOptions::default(),
    )
    .unwrap();

    // dataset precondition: some relevant docs live at BM25 ranks 11..100
    let mut deep_relevant = 0;
    for q in data.queries.iter() {
        let terms = rrpipe_core::analysis::tokenize(&q.text);
        let ranked = index.search(&q.query_id, &terms, 100);
        let grades = data.qrels.grades_for(&q.query_id).unwrap();
        for (rank, id) in ranked.doc_ids().enumerate() {
            if rank >= 10 && grades.get(id).copied().unwrap_or(0) > 0 {
                deep_relevant += 1;
            }
        }
    }
    assert!(deep_relevant > 0, "dataset must bury relevant docs past rank 10");

    let gateway = desk_gateway(&data.qrels);
    let templates = Templates::builtin();
    let mut curve = Vec::new();
    for k in [10, 20, 50, 100] {
        let record = run_config(
            &desk_config("rr-oracle", k, &templates),
            &data.queries,
            &index,
            &data.corpus,
            &data.qrels,
            &gateway,
            &templates,
            Clock::Fixed(0),
        )
        .unwrap();
        curve.push(record.aggregate.mean_ndcg_at_10_x100);
    }
    let mut strict_step = false;
    for w in curve.windows(2) {
        assert!(
            w[1] >= w[0],
            "ndcg must not decrease with depth: {curve:?}"
        );
        if w[1] > w[0] {
            strict_step = true;
        }
    }
    assert!(strict_step, "at least one depth step must strictly improve: {curve:?}");
    pass(6, "oracle depth monotonicity", started);
}

// ---------------------------------------------------------------------------
// criterion 7

#[test]
fn acceptance_07_recall_invariance_at_k10() {
    let started = Instant::now();
    let data = desk_dataset(42);
    let index = Bm25Index::build(
        &data.corpus,
        Bm25Params::standard(),
        AnalyzerOptions::default(),
    )
    .unwrap();
    let gateway = desk_gateway(&data.qrels);
    let templates = Templates::builtin();

    let run = |rr: &str| -> RunRecord {
        run_config(
            &desk_config(rr, 10, &templates),
            &data.queries,
            &index,
            &data.corpus,
            &data.qrels,
            &gateway,
            &templates,
            Clock::Fixed(0),
        )
        .unwrap()
    };
    let baseline = run("off");
    for rr in ["rr-identity", "rr-oracle", "rr-shuffle"] {
        let reranked = run(rr);
        for (a, b) in baseline.per_query.iter().zip(reranked.per_query.iter()) {
            assert_eq!(
                a.recall_at_10.to_bits(),
                b.recall_at_10.to_bits(),
                "recall@10 changed under {rr} for {}",
                a.query_id
            );
        }
    }
    pass(7, "recall invariance when reranking the top-10 pool", started);
}

// ---------------------------------------------------------------------------
// criterion 8

#[test]
fn acceptance_08_cost_ledger_exactness() {
    use num::bigint::BigInt;
    use num::rational::Ratio;
    use num::ToPrimitive;

    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC057);
    let mut variants = Vec::new();
    for i in 0..8 {
        variants.push(variant(
            &format!("v{i}"),
            "scripted",
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..20.0),
        ));
    }
    let table = PriceTable::from_variants(variants.clone()).unwrap();

    // rational oracle, rounding half up at the micro-dollar
    let oracle = |usage: &UsageRecord| -> u64 {
        let v = variants.iter().find(|v| v.name == usage.variant_name).unwrap();
        let num = BigInt::from(usage.input_tokens) * BigInt::from(v.price_in.0)
            + BigInt::from(usage.output_tokens) * BigInt::from(v.price_out.0);
        let exact = Ratio::new(num, BigInt::from(1_000_000u64));
        let half = Ratio::new(BigInt::from(1), BigInt::from(2));
        (exact + half).floor().to_integer().to_u64().unwrap()
    };

    let mut usages = Vec::new();
    for i in 0..1_000 {
        let usage = UsageRecord {
            variant_name: format!("v{}", rng.gen_range(0..8)),
            input_tokens: rng.gen_range(0..5_000_000),
            output_tokens: rng.gen_range(0..2_000_000),
            latency_secs: 0.0,
            stage: Stage::Rr,
            query_id: format!("q{i}"),
            estimated: false,
        };
        let got = cost_of(&usage, &table).unwrap();
        assert_eq!(got.0, oracle(&usage), "record {i} disagrees with oracle");
        usages.push(usage);
    }

    // additivity is exact in micro-dollars
    let total = cost_of_all(usages.iter(), &table).unwrap();
    let summed: MicroDollars = usages.iter().map(|u| cost_of(u, &table).unwrap()).sum();
    assert_eq!(total, summed);

    // token linearity: identical window prompts mean input tokens are an
    // exact multiple of the per-window count
    let templates = Templates::builtin();
    let gw_table = PriceTable::from_variants(vec![variant("m", "scripted", 1.0, 2.0)]).unwrap();
    let query = Query {
        query_id: "q".into(),
        subset: "s".into(),
        text: "fixed query text".into(),
    };
    let mut per_window_tokens = None;
    for k in [20usize, 40, 60, 100, 140] {
        let gateway = Gateway::new(gw_table.clone())
            .with_provider(Arc::new(ScriptedProvider::new("scripted", HashMap::new())));
        let candidates: Vec<CandidateDoc> = (0..k)
            .map(|i| CandidateDoc {
                doc_id: format!("d{i:03}"),
                text: format!("{:040}", i), // constant 40-byte body
            })
            .collect();
        let mut params = RerankParams::new("m");
        params.window = 20;
        params.stride = 10;
        let outcome = rerank_listwise(&gateway, &query, &candidates, &params, &templates).unwrap();
        let windows = if k <= 20 { 1 } else { (k - 20).div_ceil(10) + 1 };
        assert_eq!(outcome.usage.len(), windows);
        let first = outcome.usage[0].input_tokens;
        let t = *per_window_tokens.get_or_insert(first);
        assert_eq!(first, t, "window prompts must not drift across k");
        let total_in: u64 = outcome.usage.iter().map(|u| u.input_tokens).sum();
        assert_eq!(
            total_in,
            t * windows as u64,
            "k={k}: input tokens must be exactly windows * per-window"
        );
    }
    pass(8, "cost ledger exactness and token linearity", started);
}

// ---------------------------------------------------------------------------
// criterion 9

fn fixture_record(
    qe: &str,
    qe_on: bool,
    rr: &str,
    k: usize,
    ndcg: f64,
    recall: f64,
    cost_micros: u64,
    latency: f64,
) -> RunRecord {
    let templates = Templates::builtin();
    let mut config = PipelineConfig::bm25_only(k, &templates);
    if qe_on {
        config.qe_variant = qe.to_string();
        config.qe_mode = ExpansionMode::Concat;
    }
    config.rr_variant = rr.to_string();
    let mk = |i: usize| QueryResult {
        query_id: format!("q{i}"),
        ndcg_at_10: ndcg,
        recall_at_10: recall,
        cost_usd_micros: MicroDollars(cost_micros),
        latency_secs: latency,
        degraded: false,
        no_relevant: false,
    };
    let per_query = vec![mk(1), mk(2)];
    let agg = aggregate(&per_query).unwrap();
    RunRecord {
        config_hash: config.config_hash(),
        config,
        per_query,
        aggregate: agg,
        started_at: 0,
        finished_at: 0,
        toolkit_version: TOOLKIT_VERSION.to_string(),
    }
}

#[test]
fn acceptance_09_report_regression_against_published_tables() {
    let started = Instant::now();

    let table1 = vec![
        fixture_record("off", false, "off", 10, 0.1452, 0.3376, 0, 0.0),
        fixture_record("Flash-Lite", true, "off", 10, 0.2887, 0.5719, 1_800, 0.0),
        fixture_record("Flash (No-Think)", true, "off", 10, 0.2963, 0.5856, 9_300, 0.0),
        fixture_record("Flash (Think)", true, "off", 10, 0.3023, 0.5773, 14_100, 0.0),
        fixture_record("Pro", true, "off", 10, 0.3001, 0.5801, 48_900, 0.0),
    ];
    let report = emit_report(&table1, ReportShape::QeTable, None).unwrap();
    for row in [
        "| No Enhancement (BM25 only) | 14.52 | 33.76 | 0.000 |",
        "| Flash-Lite | 28.87 | 57.19 | 0.0018 |",
        "| Flash (No-Think) | 29.63 | 58.56 | 0.0093 |",
        "| Flash (Think) | 30.23 | 57.73 | 0.0141 |",
        "| Pro | 30.01 | 58.01 | 0.0489 |",
    ] {
        assert!(
            report.markdown.contains(row),
            "table 1 row missing: {row}\n{}",
            report.markdown
        );
    }

    let table2 = vec![
        fixture_record("Flash", true, "Flash-Lite", 100, 0.3654, 0.3876, 21_000, 20.25),
        fixture_record("Flash", true, "Flash-no-think", 100, 0.3936, 0.4111, 45_000, 45.31),
        fixture_record("Flash", true, "Flash-Think", 100, 0.3992, 0.4203, 54_000, 63.28),
        fixture_record("Flash", true, "Pro", 100, 0.4119, 0.4357, 170_000, 79.25),
    ];
    let report = emit_report(&table2, ReportShape::RrTable, None).unwrap();
    for row in [
        "| QE (Flash) + RR (Flash-Lite) | 36.54 | 38.76 | 0.021 | 20.25 |",
        "| QE (Flash) + RR (Flash-no-think) | 39.36 | 41.11 | 0.045 | 45.31 |",
        "| QE (Flash) + RR (Flash-Think) | 39.92 | 42.03 | 0.054 | 63.28 |",
        "| QE (Flash) + RR (Pro) | 41.19 | 43.57 | 0.17 | 79.25 |",
    ] {
        assert!(
            report.markdown.contains(row),
            "table 2 row missing: {row}\n{}",
            report.markdown
        );
    }
    pass(9, "report regression against published tables", started);
}

// ---------------------------------------------------------------------------
// criterion 10

fn sweep_grid_16(templates: &Templates) -> Vec<PipelineConfig> {
    let mut configs = Vec::new();
    for qe in ["mock-lite", "mock-flash", "mock-think", "mock-pro"] {
        for k in [10usize, 20, 50, 100] {
            let mut config = PipelineConfig::bm25_only(k, templates);
            config.qe_variant = qe.to_string();
            config.qe_mode = ExpansionMode::Concat;
            config.rr_variant = "mock-rr".to_string();
            config.seed = 7;
            configs.push(config);
        }
    }
    configs
}

fn mock_sweep_gateway() -> Gateway {
    let table = PriceTable::from_variants(vec![
        variant("mock-lite", "scripted", 0.02, 0.08),
        variant("mock-flash", "scripted", 0.10, 0.40),
        variant("mock-think", "scripted", 0.10, 0.60),
        variant("mock-pro", "scripted", 0.50, 2.00),
        variant("mock-rr", "identity", 0.30, 2.50),
    ])
    .unwrap();
    Gateway::new(table)
        .with_provider(Arc::new(ScriptedProvider::new("scripted", HashMap::new())))
        .with_provider(Arc::new(IdentityProvider::new("identity")))
}

fn dir_snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn acceptance_10_sweep_determinism_and_resume() {
    let started = Instant::now();
    let data = desk_dataset(7);
    let templates = Templates::builtin();
    let configs = sweep_grid_16(&templates);
    assert_eq!(configs.len(), 16);
    let opts = SweepOptions {
        concurrency: 4,
        clock: Clock::Fixed(1_726_000_000),
        resume: false,
    };

    let sweep_into = |dir: &std::path::Path, grid: &[PipelineConfig], resume: bool| {
        let gateway = mock_sweep_gateway();
        let store = RunStore::open(dir).unwrap();
        let opts = SweepOptions {
            resume,
            ..opts.clone()
        };
        run_sweep(
            grid,
            &data.queries,
            &data.corpus,
            &data.qrels,
            &gateway,
            &templates,
            Some(&store),
            &opts,
        )
        .unwrap()
    };

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let out_a = sweep_into(dir_a.path(), &configs, false);
    let out_b = sweep_into(dir_b.path(), &configs, false);
    assert_eq!(out_a.records.len(), 16);
    assert!(out_a.failures.is_empty());
    assert_eq!(
        dir_snapshot(dir_a.path()),
        dir_snapshot(dir_b.path()),
        "two sweeps must produce byte-identical run stores"
    );

    // reports over both stores match byte for byte
    let reports_a = tempfile::tempdir().unwrap();
    let reports_b = tempfile::tempdir().unwrap();
    for shape in [ReportShape::QeTable, ReportShape::RrTable, ReportShape::DepthCurve] {
        emit_report(&out_a.records, shape, Some(reports_a.path())).unwrap();
        emit_report(&out_b.records, shape, Some(reports_b.path())).unwrap();
    }
    assert_eq!(dir_snapshot(reports_a.path()), dir_snapshot(reports_b.path()));

    // interrupt after 7 configs, then resume the full grid
    let dir_c = tempfile::tempdir().unwrap();
    let partial = sweep_into(dir_c.path(), &configs[..7], false);
    assert_eq!(partial.records.len(), 7);
    let resumed = sweep_into(dir_c.path(), &configs, true);
    assert_eq!(resumed.resumed, 7);
    assert_eq!(resumed.records.len(), 16);
    assert_eq!(
        dir_snapshot(dir_a.path()),
        dir_snapshot(dir_c.path()),
        "interrupted-then-resumed store must match the uninterrupted one"
    );
    assert_eq!(resumed.records, out_a.records);

    assert!(started.elapsed().as_secs_f64() < 60.0, "runtime budget");
    pass(10, "sweep determinism and resume", started);
}

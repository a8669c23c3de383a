//! Ablation sweeps over config grids, with an on-disk run store keyed by
//! config hash so interrupted sweeps resume where they stopped.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{run_query, Bm25Settings, Clock, OrchestratorError, PipelineConfig, PipelineContext,
    RunRecord, TOOLKIT_VERSION};
use crate::analysis::AnalyzerOptions;
use crate::bm25::Bm25Params;
use crate::corpus::{Corpus, Qrels, QuerySet};
use crate::gateway::Gateway;
use crate::metrics::{aggregate, Gain, QueryResult};
use crate::stages::{ExpansionMode, Templates};
use crate::Bm25Index;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("no run record for config hash {0}")]
    Missing(String),
    #[error("corrupt run record {path}: {reason}")]
    Corrupt { path: String, reason: String },
}

/// Directory of run records plus a manifest, one file per config hash.
pub struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record_path(&self, config_hash: &str) -> PathBuf {
        self.dir.join(format!("run_{config_hash}.json"))
    }

    pub fn contains(&self, config_hash: &str) -> bool {
        self.record_path(config_hash).exists()
    }

    pub fn save(&self, record: &RunRecord) -> Result<(), StoreError> {
        let path = self.record_path(&record.config_hash);
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_string(record).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut f = File::create(&tmp)?;
        f.write_all(body.as_bytes())?;
        f.write_all(b"\n")?;
        f.flush()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Load and verify one record: the stored hash must match a recompute
    /// of its config, and the aggregate must match its per-query rows.
    pub fn load(&self, config_hash: &str) -> Result<RunRecord, StoreError> {
        let path = self.record_path(config_hash);
        if !path.exists() {
            return Err(StoreError::Missing(config_hash.to_string()));
        }
        let body = fs::read_to_string(&path)?;
        let record: RunRecord = serde_json::from_str(&body).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if record.config.config_hash() != record.config_hash
            || record.config_hash != config_hash
        {
            return Err(StoreError::Corrupt {
                path: path.display().to_string(),
                reason: "config hash mismatch".into(),
            });
        }
        if !record.aggregate.consistent_with(&record.per_query) {
            return Err(StoreError::Corrupt {
                path: path.display().to_string(),
                reason: "aggregate does not match per-query results".into(),
            });
        }
        Ok(record)
    }

    pub fn load_all(&self) -> Result<Vec<RunRecord>, StoreError> {
        let mut hashes = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(hash) = name
                .strip_prefix("run_")
                .and_then(|n| n.strip_suffix(".json"))
            {
                hashes.push(hash.to_string());
            }
        }
        hashes.sort();
        hashes.iter().map(|h| self.load(h)).collect()
    }

    fn write_manifest(&self, entries: &[ManifestEntry]) -> Result<(), StoreError> {
        let path = self.dir.join("manifest.jsonl");
        let tmp = path.with_extension("jsonl.tmp");
        let mut f = File::create(&tmp)?;
        for e in entries {
            let line = serde_json::to_string(e).map_err(|err| StoreError::Corrupt {
                path: path.display().to_string(),
                reason: err.to_string(),
            })?;
            f.write_all(line.as_bytes())?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    config_hash: String,
    file: String,
    qe_variant: String,
    rr_variant: String,
    k: usize,
    status: String,
    toolkit_version: String,
}

/// Grid file: axis lists expanded to their cross product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub qe_variants: Vec<String>,
    #[serde(default = "default_qe_mode")]
    pub qe_mode: ExpansionMode,
    pub rr_variants: Vec<String>,
    pub depths: Vec<usize>,
    #[serde(default = "super::default_window")]
    pub window: usize,
    #[serde(default = "super::default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub bm25: Bm25Settings,
    /// Defaults to `max(100, k)` per cell when absent.
    #[serde(default)]
    pub initial_n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub analyzer: AnalyzerOptions,
    #[serde(default)]
    pub gain: Gain,
    #[serde(default = "super::default_doc_token_budget")]
    pub doc_token_budget: usize,
    #[serde(default = "super::default_doc_cap")]
    pub doc_cap: usize,
}

fn default_qe_mode() -> ExpansionMode {
    ExpansionMode::Concat
}

impl SweepGrid {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let body = fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&body).map_err(|e| StoreError::Corrupt {
            path: path.as_ref().display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Cross product in (qe, rr, k) order.
    pub fn expand(&self, templates: &Templates) -> Vec<PipelineConfig> {
        let mut configs = Vec::new();
        for qe in &self.qe_variants {
            for rr in &self.rr_variants {
                for &k in &self.depths {
                    let qe_mode = if qe == super::VARIANT_OFF {
                        ExpansionMode::Off
                    } else {
                        self.qe_mode
                    };
                    configs.push(PipelineConfig {
                        qe_variant: qe.clone(),
                        qe_mode,
                        rr_variant: rr.clone(),
                        k,
                        window: self.window,
                        stride: self.stride,
                        bm25: self.bm25,
                        initial_n: self.initial_n.unwrap_or_else(|| k.max(100)),
                        seed: self.seed,
                        analyzer: self.analyzer,
                        gain: self.gain,
                        doc_token_budget: self.doc_token_budget,
                        doc_cap: self.doc_cap,
                        template_hashes: templates.hashes(),
                    });
                }
            }
        }
        configs
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Queries evaluated concurrently within one config.
    pub concurrency: usize,
    pub clock: Clock,
    /// Skip configs whose run record already exists and verifies.
    pub resume: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            concurrency: 4,
            clock: Clock::System,
            resume: false,
        }
    }
}

#[derive(Debug)]
pub struct SweepFailure {
    pub config_hash: String,
    pub error: String,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub failures: Vec<SweepFailure>,
    /// Configs satisfied from the store without re-running.
    pub resumed: usize,
}

type IndexKey = (u64, u64, bool, bool);

fn index_key(bm25: &Bm25Settings, analyzer: &AnalyzerOptions) -> IndexKey {
    (
        bm25.k1.to_bits(),
        bm25.b.to_bits(),
        analyzer.remove_stopwords,
        analyzer.stem,
    )
}

/// Run every config in the grid, sharing indexes across configs.
///
/// Configs run in grid order and never abort the sweep: a failing config
/// is recorded and skipped. Queries inside a config may run concurrently;
/// results are assembled in query order so records are deterministic.
pub fn run_sweep(
    grid: &[PipelineConfig],
    queries: &QuerySet,
    corpus: &Corpus,
    qrels: &Qrels,
    gateway: &Gateway,
    templates: &Templates,
    store: Option<&RunStore>,
    opts: &SweepOptions,
) -> Result<SweepOutcome, StoreError> {
    let mut index_cache: HashMap<IndexKey, Arc<Bm25Index>> = HashMap::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut manifest = Vec::new();
    let mut resumed = 0usize;

    for config in grid {
        let config_hash = config.config_hash();
        let manifest_base = ManifestEntry {
            config_hash: config_hash.clone(),
            file: format!("run_{config_hash}.json"),
            qe_variant: config.qe_variant.clone(),
            rr_variant: config.rr_variant.clone(),
            k: config.k,
            status: "completed".into(),
            toolkit_version: TOOLKIT_VERSION.to_string(),
        };

        if opts.resume {
            if let Some(store) = store {
                match store.load(&config_hash) {
                    Ok(record) => {
                        log::info!("sweep: {config_hash} already complete, skipping");
                        records.push(record);
                        resumed += 1;
                        manifest.push(manifest_base);
                        continue;
                    }
                    Err(StoreError::Missing(_)) => {}
                    Err(e) => {
                        log::warn!("sweep: stored record for {config_hash} unusable ({e}); re-running");
                    }
                }
            }
        }

        match run_one_config(config, queries, corpus, qrels, gateway, templates, opts, &mut index_cache)
        {
            Ok(record) => {
                if let Some(store) = store {
                    store.save(&record)?;
                }
                records.push(record);
                manifest.push(manifest_base);
            }
            Err(e) => {
                log::error!("sweep: config {config_hash} failed: {e}");
                failures.push(SweepFailure {
                    config_hash: config_hash.clone(),
                    error: e.to_string(),
                });
                manifest.push(ManifestEntry {
                    status: format!("failed: {e}"),
                    ..manifest_base
                });
            }
        }
    }

    if let Some(store) = store {
        store.write_manifest(&manifest)?;
    }

    Ok(SweepOutcome {
        records,
        failures,
        resumed,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_one_config(
    config: &PipelineConfig,
    queries: &QuerySet,
    corpus: &Corpus,
    qrels: &Qrels,
    gateway: &Gateway,
    templates: &Templates,
    opts: &SweepOptions,
    index_cache: &mut HashMap<IndexKey, Arc<Bm25Index>>,
) -> Result<RunRecord, OrchestratorError> {
    config.validate()?;
    let key = index_key(&config.bm25, &config.analyzer);
    let index = match index_cache.get(&key) {
        Some(index) => Arc::clone(index),
        None => {
            let built = Bm25Index::build(
                corpus,
                Bm25Params::new(config.bm25.k1, config.bm25.b),
                config.analyzer,
            )?;
            let built = Arc::new(built);
            index_cache.insert(key, Arc::clone(&built));
            built
        }
    };

    let started_at = opts.clock.now_epoch_secs();
    let ctx = PipelineContext {
        config,
        index: &index,
        corpus,
        qrels,
        gateway,
        templates,
    };

    let n = queries.len();
    let workers = opts.concurrency.max(1).min(n.max(1));
    let query_list: Vec<_> = queries.iter().collect();
    let mut slots: Vec<Option<Result<QueryResult, OrchestratorError>>> =
        (0..n).map(|_| None).collect();

    if workers <= 1 {
        for (slot, query) in slots.iter_mut().zip(&query_list) {
            *slot = Some(run_query(&ctx, query));
        }
    } else {
        let next = AtomicUsize::new(0);
        let slot_cells: Vec<std::sync::Mutex<&mut Option<_>>> =
            slots.iter_mut().map(std::sync::Mutex::new).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let result = run_query(&ctx, query_list[i]);
                    **slot_cells[i].lock().unwrap() = Some(result);
                });
            }
        });
    }

    let mut per_query = Vec::with_capacity(n);
    for slot in slots {
        per_query.push(slot.expect("every query slot filled")?);
    }
    let agg = aggregate(&per_query)?;

    Ok(RunRecord {
        config_hash: config.config_hash(),
        config: config.clone(),
        per_query,
        aggregate: agg,
        started_at,
        finished_at: opts.clock.now_epoch_secs(),
        toolkit_version: TOOLKIT_VERSION.to_string(),
    })
}

//! Stage orchestration: config, dependency checks, per-stage output
//! directories and resume.
//!
//! Each stage writes into `<output_dir>/<NN>-<stage>/`. Data stages write the
//! surviving corpus as `shards/shard-NNNNN.jsonl`; every stage writes
//! `report.json` last, carrying a fingerprint of the inputs and the config up
//! to and including that stage. A stage whose report exists with a matching
//! fingerprint is skipped on the next run. Once any stage runs, every later
//! stage runs too.

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blend::{next_batch_composition, BlendState, DatasetSpec, SequentialCursor};
use crate::cleanup::{clean_document, LanguageDetector, TrigramModel};
use crate::corpus::{emit_shard, ingest_shard_indexed, CorpusShard, CorpusStats, Document, DropReason};
use crate::decontam::{decontaminate_document, load_task_file, DecontamReport, TaskNgramIndex};
use crate::dedup::{deduplicate, write_component_report, write_edge_report, PriorityOrder};
use crate::hashing::{derive_seed, hash_bytes, hash_length_prefixed};
use crate::planner::plan;
use crate::quality::{pareto_keep, train_quality_classifier, ParetoFilterParams, QualityModel, TrainOptions};

pub use config::{
    BlendConfig, BlendDataset, CleanConfig, DecontamConfig, DedupConfig, FilterConfig, PipelineConfig, ScoreConfig,
    StageKind, TaskSpec, TrainConfig,
};

pub const REPORT_FILE: &str = "report.json";
pub const STATS_FILE: &str = "stats.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad configuration or arguments.
    #[error("config error: {0}")]
    Config(String),
    /// Bad or unreadable data.
    #[error("data error: {0}")]
    Data(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Data(_) => 2,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data(e.to_string())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Data(format!("{}: {e}", path.display()))
}

/// What one stage did. Stored as `report.json` in the stage directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: StageKind,
    pub fingerprint: String,
    pub docs_in: u64,
    pub docs_out: u64,
    /// Documents removed by this stage, per dataset and reason.
    pub drops: BTreeMap<String, BTreeMap<DropReason, u64>>,
    /// Extra records per dataset beyond one per surviving parent (split fragments).
    pub fragment_surplus: BTreeMap<String, u64>,
    pub details: serde_json::Value,
}

impl StageReport {
    fn new(stage: StageKind, fingerprint: u64, docs_in: u64) -> Self {
        Self {
            stage,
            fingerprint: format!("{fingerprint:016x}"),
            docs_in,
            docs_out: docs_in,
            drops: BTreeMap::new(),
            fragment_surplus: BTreeMap::new(),
            details: serde_json::Value::Null,
        }
    }

    fn drop_doc(&mut self, dataset: &str, reason: DropReason) {
        *self.drops.entry(dataset.to_string()).or_default().entry(reason).or_default() += 1;
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; rayon's default when `None`.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub stats: CorpusStats,
    pub reports: Vec<StageReport>,
    pub executed: Vec<StageKind>,
    pub skipped: Vec<StageKind>,
    pub corpus: Vec<CorpusShard>,
}

pub fn stage_dir(output_dir: &Path, index: usize, stage: StageKind) -> PathBuf {
    output_dir.join(format!("{:02}-{}", index, stage.name()))
}

/// Run (or resume) the whole pipeline.
pub fn execute_pipeline(config: &PipelineConfig, opts: &RunOptions) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        if j == 0 {
            return Err(PipelineError::Config("jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| PipelineError::Config(e.to_string()))?;
    pool.install(|| run_stages(config))
}

fn run_stages(config: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    // Everything that can fail on bad config is loaded before any work.
    let task_indices = if config.stages.contains(&StageKind::Decontaminate) {
        load_tasks(&config.decontaminate.tasks)?
    } else {
        Vec::new()
    };
    let detector: Option<Box<dyn LanguageDetector>> = match &config.clean.langid_model {
        Some(p) if config.stages.contains(&StageKind::Clean) => {
            let f = std::fs::File::open(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
            let model = TrigramModel::read_from(std::io::BufReader::new(f))
                .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
            Some(Box::new(model))
        }
        _ => None,
    };

    let (mut corpus, input_hash) = ingest_inputs(&config.inputs)?;
    let mut stats = CorpusStats::default();
    for doc in corpus.iter().flat_map(|s| &s.records) {
        stats.record_input(doc);
    }

    std::fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;

    let mut fingerprint = hash_length_prefixed([&input_hash.to_le_bytes()[..], &config.seed.to_le_bytes()[..]], 0);
    let mut rerun = false;
    let mut run = PipelineRun {
        stats: CorpusStats::default(),
        reports: Vec::new(),
        executed: Vec::new(),
        skipped: Vec::new(),
        corpus: Vec::new(),
    };

    for (index, &stage) in config.stages.iter().enumerate() {
        let stage_cfg = stage_config_json(config, stage);
        fingerprint =
            hash_length_prefixed([&fingerprint.to_le_bytes()[..], stage.name().as_bytes(), stage_cfg.as_bytes()], 0);
        let dir = stage_dir(&config.output_dir, index, stage);

        if !rerun {
            if let Some(report) = completed_report(&dir, fingerprint) {
                if stage.writes_shards() {
                    corpus = load_stage_shards(&dir, corpus.len())?;
                }
                run.reports.push(report);
                run.skipped.push(stage);
                continue;
            }
        }
        rerun = true;

        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;

        let docs_in = corpus.iter().map(|s| s.len() as u64).sum();
        let mut report = StageReport::new(stage, fingerprint, docs_in);
        let seed = derive_seed(config.seed, stage.name());
        match stage {
            StageKind::Clean => {
                let default_model;
                let det: &dyn LanguageDetector = match &detector {
                    Some(d) => d.as_ref(),
                    None => {
                        default_model = crate::cleanup::langid::default_model();
                        default_model
                    }
                };
                corpus = stage_clean(corpus, det, &mut report);
            }
            StageKind::Score => corpus = stage_score(corpus, config, seed, &dir, &mut report)?,
            StageKind::QualityFilter => corpus = stage_filter(corpus, &config.quality_filter, seed, &mut report)?,
            StageKind::Dedup => corpus = stage_dedup(corpus, config, seed, &dir, &mut report)?,
            StageKind::Decontaminate => corpus = stage_decontam(corpus, &task_indices, &mut report),
            StageKind::Blend => stage_blend(&corpus, &config.blend, seed, &dir, &mut report)?,
            StageKind::Plan => {
                let planner_cfg = config.plan.as_ref().expect("validated");
                let p = plan(planner_cfg).map_err(|e| PipelineError::Config(e.to_string()))?;
                write_file(&dir.join("plan.json"), &to_pretty(&p))?;
                write_file(&dir.join("plan.txt"), &p.render_text())?;
                report.details = serde_json::to_value(&p).expect("serializable");
            }
        }
        report.docs_out = corpus.iter().map(|s| s.len() as u64).sum();
        if stage.writes_shards() {
            write_stage_shards(&dir, &corpus)?;
        }
        // Written last: its presence marks the stage complete.
        write_file(&dir.join(REPORT_FILE), &to_pretty(&report))?;
        run.reports.push(report);
        run.executed.push(stage);
    }

    // Kept counts come from the surviving records, less split-fragment surplus;
    // drops come from the stage reports. Conservation is then a real check.
    for doc in corpus.iter().flat_map(|s| &s.records) {
        stats.record_kept(doc);
    }
    for report in &run.reports {
        for (dataset, reasons) in &report.drops {
            for (&reason, &n) in reasons {
                stats.add_drops(dataset, reason, n);
            }
        }
        for (dataset, &surplus) in &report.fragment_surplus {
            let entry = stats.datasets.entry(dataset.clone()).or_default();
            entry.kept_docs = entry.kept_docs.saturating_sub(surplus);
        }
    }
    write_file(&config.output_dir.join(STATS_FILE), &stats.to_json_pretty())?;
    run.stats = stats;
    run.corpus = corpus;
    Ok(run)
}

fn load_tasks(tasks: &[TaskSpec]) -> Result<Vec<TaskNgramIndex>, PipelineError> {
    tasks
        .iter()
        .map(|t| {
            load_task_file(&t.name, &t.path, t.n).map_err(|e| PipelineError::Config(format!("task {}: {e}", t.name)))
        })
        .collect()
}

/// Read all inputs, checking ids are unique across shards. Returns the
/// shards and a hash of the raw input bytes.
fn ingest_inputs(inputs: &[PathBuf]) -> Result<(Vec<CorpusShard>, u64), PipelineError> {
    let mut shards = Vec::with_capacity(inputs.len());
    let mut hashes = Vec::with_capacity(inputs.len());
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, path) in inputs.iter().enumerate() {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        hashes.push(hash_bytes(&bytes, 0));
        let shard = ingest_shard_indexed(path, i as u32).map_err(data_err)?;
        for doc in &shard.records {
            if let Some(&first) = seen.get(&doc.doc_id) {
                return Err(PipelineError::Data(format!(
                    "doc_id {} appears in both {} and {}",
                    doc.doc_id,
                    inputs[first].display(),
                    path.display()
                )));
            }
            seen.insert(doc.doc_id, i);
        }
        shards.push(shard);
    }
    let hash_bytes_le: Vec<[u8; 8]> = hashes.iter().map(|h| h.to_le_bytes()).collect();
    let combined = hash_length_prefixed(hash_bytes_le.iter().map(|b| &b[..]), 0);
    Ok((shards, combined))
}

/// The parts of the config a stage's output depends on, as canonical JSON.
fn stage_config_json(config: &PipelineConfig, stage: StageKind) -> String {
    let v = match stage {
        StageKind::Clean => serde_json::to_value(&config.clean),
        StageKind::Score => serde_json::to_value(&config.score),
        StageKind::QualityFilter => serde_json::to_value(&config.quality_filter),
        StageKind::Dedup => serde_json::to_value((&config.dedup, &config.priority)),
        StageKind::Decontaminate => serde_json::to_value(&config.decontaminate),
        StageKind::Blend => serde_json::to_value(&config.blend),
        StageKind::Plan => serde_json::to_value(&config.plan),
    };
    v.expect("config serializes").to_string()
}

fn completed_report(dir: &Path, fingerprint: u64) -> Option<StageReport> {
    let text = std::fs::read_to_string(dir.join(REPORT_FILE)).ok()?;
    let report: StageReport = serde_json::from_str(&text).ok()?;
    (report.fingerprint == format!("{fingerprint:016x}")).then_some(report)
}

fn shard_name(i: usize) -> String {
    format!("shard-{i:05}.jsonl")
}

fn write_stage_shards(dir: &Path, corpus: &[CorpusShard]) -> Result<(), PipelineError> {
    let shard_dir = dir.join("shards");
    std::fs::create_dir_all(&shard_dir).map_err(io_err(&shard_dir))?;
    corpus.par_iter().enumerate().try_for_each(|(i, s)| emit_shard(s, shard_dir.join(shard_name(i))).map_err(data_err))
}

fn load_stage_shards(dir: &Path, count: usize) -> Result<Vec<CorpusShard>, PipelineError> {
    (0..count)
        .map(|i| ingest_shard_indexed(dir.join("shards").join(shard_name(i)), i as u32).map_err(data_err))
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let mut text = contents.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    std::fs::write(path, text).map_err(io_err(path))
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Apply `f` to every document in parallel, keeping shard boundaries and order.
fn map_docs<F>(corpus: Vec<CorpusShard>, f: F) -> Vec<(CorpusShard, Vec<(String, DropReason)>)>
where
    F: Fn(Document) -> Result<Document, (String, DropReason)> + Sync,
{
    corpus
        .into_par_iter()
        .map(|shard| {
            let results: Vec<_> = shard.records.into_par_iter().map(&f).collect();
            let mut kept = Vec::new();
            let mut dropped = Vec::new();
            for r in results {
                match r {
                    Ok(d) => kept.push(d),
                    Err(x) => dropped.push(x),
                }
            }
            (CorpusShard::new(shard.path, kept), dropped)
        })
        .collect()
}

fn collect_drops(mapped: Vec<(CorpusShard, Vec<(String, DropReason)>)>, report: &mut StageReport) -> Vec<CorpusShard> {
    mapped
        .into_iter()
        .map(|(shard, drops)| {
            for (dataset, reason) in drops {
                report.drop_doc(&dataset, reason);
            }
            shard
        })
        .collect()
}

fn stage_clean(
    corpus: Vec<CorpusShard>,
    detector: &dyn LanguageDetector,
    report: &mut StageReport,
) -> Vec<CorpusShard> {
    let mapped = map_docs(corpus, |doc| {
        let dataset = doc.dataset.clone();
        clean_document(doc, detector).map_err(|r| (dataset, r))
    });
    collect_drops(mapped, report)
}

fn in_scope(filter: &Option<Vec<String>>, dataset: &str) -> bool {
    filter.as_ref().is_none_or(|names| names.iter().any(|n| n == dataset))
}

fn stage_score(
    corpus: Vec<CorpusShard>,
    config: &PipelineConfig,
    seed: u64,
    dir: &Path,
    report: &mut StageReport,
) -> Result<Vec<CorpusShard>, PipelineError> {
    let sc = &config.score;
    let model = match (&sc.model, &sc.train) {
        (Some(path), _) => {
            QualityModel::load(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some(t)) => {
            let pick = |names: &[String]| -> Vec<Document> {
                corpus.iter().flat_map(|s| &s.records).filter(|d| names.contains(&d.dataset)).cloned().collect()
            };
            let positives = pick(&t.positive_datasets);
            let negatives = pick(&t.negative_datasets);
            let opts = TrainOptions {
                holdout_fraction: t.holdout_fraction,
                epochs: t.epochs,
                learning_rate: t.learning_rate,
                seed,
                ..TrainOptions::default()
            };
            let (model, accuracy) = train_quality_classifier(&positives, &negatives, &opts).map_err(data_err)?;
            model.save(&dir.join("model.qmdl")).map_err(data_err)?;
            report.details = serde_json::json!({
                "holdout_accuracy": accuracy,
                "positives": positives.len(),
                "negatives": negatives.len(),
            });
            model
        }
        (None, None) => unreachable!("validated"),
    };
    let scored: Vec<CorpusShard> = corpus
        .into_par_iter()
        .map(|mut shard| {
            shard.records.par_iter_mut().for_each(|d| {
                if in_scope(&sc.datasets, &d.dataset) {
                    d.score = Some(model.score_text(&d.text));
                }
            });
            shard
        })
        .collect();
    let count = scored.iter().flat_map(|s| &s.records).filter(|d| d.score.is_some()).count();
    match &mut report.details {
        serde_json::Value::Object(m) => {
            m.insert("scored".into(), count.into());
        }
        other => *other = serde_json::json!({ "scored": count }),
    }
    Ok(scored)
}

fn stage_filter(
    corpus: Vec<CorpusShard>,
    fc: &FilterConfig,
    seed: u64,
    report: &mut StageReport,
) -> Result<Vec<CorpusShard>, PipelineError> {
    let params = ParetoFilterParams { alpha: fc.alpha, rng_seed: seed };
    // Scores were range-checked at ingestion or produced by the model.
    let mapped = map_docs(corpus, |doc| match doc.score {
        Some(score) if in_scope(&fc.datasets, &doc.dataset) => {
            if pareto_keep(score, &params, doc.doc_id).unwrap_or(false) {
                Ok(doc)
            } else {
                Err((doc.dataset, DropReason::Quality))
            }
        }
        _ => Ok(doc),
    });
    Ok(collect_drops(mapped, report))
}

fn stage_dedup(
    corpus: Vec<CorpusShard>,
    config: &PipelineConfig,
    seed: u64,
    dir: &Path,
    report: &mut StageReport,
) -> Result<Vec<CorpusShard>, PipelineError> {
    let all: Vec<Document> = corpus.iter().flat_map(|s| s.records.iter().cloned()).collect();
    let mut names: Vec<String> = config.priority.clone();
    for d in &all {
        if !names.contains(&d.dataset) {
            names.push(d.dataset.clone());
        }
    }
    let priority = PriorityOrder::new(names);
    let outcome = deduplicate(&all, &config.lsh_params(seed), &priority).map_err(data_err)?;
    write_edge_report(&outcome.graph, &dir.join("edges.jsonl")).map_err(data_err)?;
    write_component_report(&outcome.graph, &dir.join("components.jsonl")).map_err(data_err)?;
    let discarded: BTreeSet<u64> = outcome.graph.discarded();
    report.details = serde_json::json!({
        "candidate_buckets": outcome.candidate_buckets,
        "edges": outcome.graph.edges.len(),
        "components_with_duplicates": outcome.graph.components.iter().filter(|c| c.members.len() > 1).count(),
        "featureless": outcome.featureless,
        "discarded": discarded.len(),
    });
    let mapped = map_docs(corpus, |doc| {
        if discarded.contains(&doc.doc_id) {
            Err((doc.dataset, DropReason::Duplicate))
        } else {
            Ok(doc)
        }
    });
    Ok(collect_drops(mapped, report))
}

fn stage_decontam(corpus: Vec<CorpusShard>, indices: &[TaskNgramIndex], report: &mut StageReport) -> Vec<CorpusShard> {
    let mut totals = DecontamReport::default();
    let out = corpus
        .into_iter()
        .map(|shard| {
            let results: Vec<_> = shard.records.par_iter().map(|d| decontaminate_document(d, indices)).collect();
            let mut kept = Vec::new();
            for (doc, (pieces, outcome)) in shard.records.iter().zip(results) {
                totals.record(&outcome);
                if outcome.removed {
                    report.drop_doc(&doc.dataset, DropReason::Contamination);
                } else if pieces.len() > 1 {
                    *report.fragment_surplus.entry(doc.dataset.clone()).or_default() += pieces.len() as u64 - 1;
                }
                kept.extend(pieces);
            }
            CorpusShard::new(shard.path, kept)
        })
        .collect();
    report.details = serde_json::to_value(totals).expect("serializable");
    out
}

#[derive(Serialize)]
struct ManifestLine<'a> {
    step: u64,
    dataset: &'a str,
    doc_id: u64,
}

fn stage_blend(
    corpus: &[CorpusShard],
    bc: &BlendConfig,
    seed: u64,
    dir: &Path,
    report: &mut StageReport,
) -> Result<(), PipelineError> {
    let path = dir.join(MANIFEST_FILE);
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    let mut out = std::io::BufWriter::new(file);
    let total_docs: usize = corpus.iter().map(CorpusShard::len).sum();
    if total_docs == 0 {
        out.flush().map_err(io_err(&path))?;
        report.details = serde_json::json!({ "steps": 0, "samples": 0 });
        return Ok(());
    }

    let weight_sum: f64 = bc.datasets.iter().map(|d| d.weight_percent).sum();
    let specs: Vec<DatasetSpec> =
        bc.datasets.iter().map(|d| DatasetSpec::new(d.name.clone(), d.weight_percent / weight_sum)).collect();
    let mut pools: Vec<Vec<u64>> = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let mut ids: Vec<u64> =
            corpus.iter().flat_map(|s| &s.records).filter(|d| d.dataset == spec.name).map(|d| d.doc_id).collect();
        if ids.is_empty() {
            return Err(PipelineError::Data(format!("blend dataset {} has no documents in the corpus", spec.name)));
        }
        if bc.shuffle {
            ids.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("{k}:{}", spec.name))));
        }
        pools.push(ids);
    }

    let mut cursors = vec![SequentialCursor::default(); specs.len()];
    let mut state = BlendState::new(specs.len());
    let mut max_abs_deviation = 0.0f64;
    for step in 0..bc.steps {
        let (counts, next) = next_batch_composition(&state, &specs, bc.batch_size).map_err(data_err)?;
        for (k, &count) in counts.iter().enumerate() {
            for &doc_id in cursors[k].take(&pools[k], count) {
                let line = ManifestLine { step, dataset: &specs[k].name, doc_id };
                serde_json::to_writer(&mut out, &line).map_err(data_err)?;
                out.write_all(b"\n").map_err(io_err(&path))?;
            }
        }
        state = next;
        for d in state.deviation(&specs) {
            max_abs_deviation = max_abs_deviation.max(d.abs());
        }
    }
    out.flush().map_err(io_err(&path))?;

    let per_dataset: BTreeMap<&str, serde_json::Value> = specs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            (
                s.name.as_str(),
                serde_json::json!({
                    "drawn": state.drawn[k],
                    "documents": pools[k].len(),
                    "epochs": state.drawn[k] as f64 / pools[k].len() as f64,
                }),
            )
        })
        .collect();
    report.details = serde_json::json!({
        "steps": bc.steps,
        "samples": state.total_drawn(),
        "max_abs_deviation": max_abs_deviation,
        "datasets": per_dataset,
    });
    Ok(())
}

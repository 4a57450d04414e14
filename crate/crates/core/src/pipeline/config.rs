use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::decontam::DEFAULT_NGRAM;
use crate::dedup::SimilarityMode;
use crate::planner::PlannerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Clean,
    Score,
    QualityFilter,
    Dedup,
    Decontaminate,
    Blend,
    Plan,
}

impl StageKind {
    pub fn name(self) -> &'static str {
        match self {
            StageKind::Clean => "clean",
            StageKind::Score => "score",
            StageKind::QualityFilter => "quality_filter",
            StageKind::Dedup => "dedup",
            StageKind::Decontaminate => "decontaminate",
            StageKind::Blend => "blend",
            StageKind::Plan => "plan",
        }
    }

    /// Position in the canonical data order; `None` for stages that do not
    /// touch the corpus.
    fn data_rank(self) -> Option<u8> {
        match self {
            StageKind::Clean => Some(0),
            StageKind::Score => Some(1),
            StageKind::QualityFilter => Some(2),
            StageKind::Dedup => Some(3),
            StageKind::Decontaminate => Some(4),
            StageKind::Blend => Some(5),
            StageKind::Plan => None,
        }
    }

    /// Whether the stage writes corpus shards.
    pub fn writes_shards(self) -> bool {
        !matches!(self, StageKind::Blend | StageKind::Plan)
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    /// Binary trigram model; the bundled model is used when absent.
    pub langid_model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub positive_datasets: Vec<String>,
    pub negative_datasets: Vec<String>,
    pub holdout_fraction: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let d = crate::quality::TrainOptions::default();
        Self {
            positive_datasets: Vec::new(),
            negative_datasets: Vec::new(),
            holdout_fraction: d.holdout_fraction,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    /// Pre-trained model file. Mutually exclusive with `train`.
    pub model: Option<PathBuf>,
    /// Train on the corpus itself from the named datasets.
    pub train: Option<TrainConfig>,
    /// Datasets to score; all when absent.
    pub datasets: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub alpha: f64,
    /// Datasets the filter applies to; all when absent. Unscored documents always pass.
    pub datasets: Option<Vec<String>>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { alpha: 3.0, datasets: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    pub bands: usize,
    pub rows: usize,
    pub jaccard_threshold: f64,
    pub sample_iterations: usize,
    pub similarity: SimilarityMode,
}

impl Default for DedupConfig {
    fn default() -> Self {
        let p = crate::dedup::LshParams::default();
        Self {
            bands: p.bands,
            rows: p.rows,
            jaccard_threshold: p.jaccard_threshold,
            sample_iterations: p.sample_iterations,
            similarity: p.similarity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    DEFAULT_NGRAM
}

impl TaskSpec {
    /// Parse `name=path[,n=13]`.
    pub fn parse_arg(arg: &str) -> Result<Self, String> {
        let (name, rest) = arg.split_once('=').ok_or_else(|| format!("expected name=path[,n=N], got {arg:?}"))?;
        let mut parts = rest.split(',');
        let path = parts.next().filter(|p| !p.is_empty()).ok_or_else(|| format!("missing path in {arg:?}"))?;
        let mut n = DEFAULT_NGRAM;
        for opt in parts {
            match opt.split_once('=') {
                Some(("n", v)) => n = v.parse().map_err(|_| format!("bad n in {arg:?}"))?,
                _ => return Err(format!("unknown task option {opt:?} in {arg:?}")),
            }
        }
        Ok(Self { name: name.to_string(), path: PathBuf::from(path), n })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecontamConfig {
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendDataset {
    pub name: String,
    pub weight_percent: f64,
    /// Shard file for standalone blending; inside a pipeline the corpus is used.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    pub batch_size: u64,
    pub steps: u64,
    pub datasets: Vec<BlendDataset>,
    /// Seeded shuffle of each dataset's documents before sequential draws.
    pub shuffle: bool,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self { batch_size: 1920, steps: 1, datasets: Vec::new(), shuffle: false }
    }
}

/// Whole-pipeline configuration (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub stages: Vec<StageKind>,
    /// Dataset priority for dedup, best first. Defaults to first-appearance order.
    #[serde(default)]
    pub priority: Vec<String>,
    #[serde(default)]
    pub clean: CleanConfig,
    #[serde(default)]
    pub score: ScoreConfig,
    #[serde(default)]
    pub quality_filter: FilterConfig,
    #[serde(default)]
    pub dedup: DedupConfig,
    #[serde(default)]
    pub decontaminate: DecontamConfig,
    #[serde(default)]
    pub blend: BlendConfig,
    #[serde(default)]
    pub plan: Option<PlannerConfig>,
}

impl PipelineConfig {
    pub fn new(output_dir: impl Into<PathBuf>, stages: Vec<StageKind>) -> Self {
        Self {
            seed: 0,
            inputs: Vec::new(),
            output_dir: output_dir.into(),
            stages,
            priority: Vec::new(),
            clean: CleanConfig::default(),
            score: ScoreConfig::default(),
            quality_filter: FilterConfig::default(),
            dedup: DedupConfig::default(),
            decontaminate: DecontamConfig::default(),
            blend: BlendConfig::default(),
            plan: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Parse a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.inputs.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
        if let Some(p) = self.clean.langid_model.as_mut() {
            fix(p);
        }
        if let Some(p) = self.score.model.as_mut() {
            fix(p);
        }
        self.decontaminate.tasks.iter_mut().for_each(|t| fix(&mut t.path));
        self.blend.datasets.iter_mut().filter_map(|d| d.path.as_mut()).for_each(fix);
    }

    /// Structural checks that need no corpus: stage order, per-stage
    /// parameters and the presence of referenced files.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut seen = HashSet::new();
        for s in &self.stages {
            if !seen.insert(*s) {
                return Err(PipelineError::Config(format!("stage `{s}` listed twice")));
            }
        }
        for (i, a) in self.stages.iter().enumerate() {
            for b in &self.stages[i + 1..] {
                if let (Some(ra), Some(rb)) = (a.data_rank(), b.data_rank()) {
                    if ra > rb {
                        return Err(PipelineError::Config(format!(
                            "stage order violation: `{b}` must run before `{a}`"
                        )));
                    }
                }
            }
        }
        let has = |k: StageKind| self.stages.contains(&k);

        if has(StageKind::Clean) {
            if let Some(p) = &self.clean.langid_model {
                require_file(p, "language model")?;
            }
        }
        if has(StageKind::Score) {
            match (&self.score.model, &self.score.train) {
                (Some(p), None) => require_file(p, "quality model")?,
                (None, Some(t)) => {
                    if t.positive_datasets.is_empty() || t.negative_datasets.is_empty() {
                        return Err(PipelineError::Config(
                            "score.train needs positive_datasets and negative_datasets".into(),
                        ));
                    }
                    if !(t.holdout_fraction > 0.0 && t.holdout_fraction < 1.0) {
                        return Err(PipelineError::Config(format!(
                            "score.train.holdout_fraction {} outside (0, 1)",
                            t.holdout_fraction
                        )));
                    }
                }
                _ => return Err(PipelineError::Config("score needs exactly one of score.model or score.train".into())),
            }
        }
        if has(StageKind::QualityFilter) && (self.quality_filter.alpha.is_nan() || self.quality_filter.alpha <= 0.0) {
            return Err(PipelineError::Config(format!(
                "quality_filter.alpha must be positive, got {}",
                self.quality_filter.alpha
            )));
        }
        if has(StageKind::Dedup) {
            self.lsh_params(0).validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if has(StageKind::Decontaminate) {
            for t in &self.decontaminate.tasks {
                if t.n < 1 {
                    return Err(PipelineError::Config(format!("task {}: n must be at least 1", t.name)));
                }
                require_file(&t.path, &format!("task file for {}", t.name))?;
            }
        }
        if has(StageKind::Blend) {
            let b = &self.blend;
            if b.batch_size == 0 {
                return Err(PipelineError::Config("blend.batch_size must be at least 1".into()));
            }
            if b.datasets.is_empty() {
                return Err(PipelineError::Config("blend.datasets is empty".into()));
            }
            if let Some(d) = b.datasets.iter().find(|d| d.weight_percent.is_nan() || d.weight_percent <= 0.0) {
                return Err(PipelineError::Config(format!("blend dataset {} has non-positive weight", d.name)));
            }
        }
        if has(StageKind::Plan) && self.plan.is_none() {
            return Err(PipelineError::Config("stage `plan` needs a [plan] section".into()));
        }
        Ok(())
    }

    pub fn lsh_params(&self, rng_seed: u64) -> crate::dedup::LshParams {
        crate::dedup::LshParams {
            bands: self.dedup.bands,
            rows: self.dedup.rows,
            jaccard_threshold: self.dedup.jaccard_threshold,
            sample_iterations: self.dedup.sample_iterations,
            rng_seed,
            similarity: self.dedup.similarity,
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), PipelineError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PipelineError::Config(format!("{what} not found: {}", path.display())))
    }
}

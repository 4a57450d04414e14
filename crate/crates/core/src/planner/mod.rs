//! Closed-form capacity planning for large transformer training.

mod schedule;
mod topology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schedule::{batch_size_at, lr_at, weight_init_std, TrainingRecipe};
pub use topology::{map_topology, RankCoord, RankGrid, RankGridSummary};

/// Bytes of model state per parameter under mixed-precision Adam:
/// fp16 weights + fp32 master copy, fp16 + fp32 gradients, two fp32 moments.
pub const BYTES_PER_PARAMETER: f64 = (2 + 4) as f64 + (2 + 4) as f64 + (4 + 4) as f64;
/// Bytes per stored activation element (16-bit).
pub const ACTIVATION_BYTES_PER_ELEMENT: f64 = 2.0;
pub const A100_PEAK_FLOPS: f64 = 312e12;
pub const DEFAULT_VOCAB: u64 = 50_257;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("topology constraint violated: {0}")]
    Constraint(String),
    #[error("invalid planner config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    pub parameters: f64,
    pub layers: u64,
    pub hidden: u64,
    pub heads: u64,
    pub sequence: u64,
    #[serde(default = "default_vocab")]
    pub vocab: u64,
}

fn default_vocab() -> u64 {
    DEFAULT_VOCAB
}

impl ModelShape {
    /// The 530B-parameter configuration: 105 layers, hidden 20480, 128 heads, 2048 tokens.
    pub fn dense_530b() -> Self {
        Self { parameters: 530e9, layers: 105, hidden: 20480, heads: 128, sequence: 2048, vocab: DEFAULT_VOCAB }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelConfig {
    pub tensor: usize,
    pub pipeline: usize,
    pub data: usize,
    /// Global batch in samples.
    pub batch: u64,
    /// Micro-batches per pipeline per iteration.
    pub micro_batches: u64,
}

impl ParallelConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.tensor == 0 || self.pipeline == 0 || self.data == 0 || self.micro_batches == 0 {
            return Err(PlannerError::Config("TP, PP, DP and MB must be at least 1".into()));
        }
        let per_step = self.micro_batches * self.data as u64;
        if !self.batch.is_multiple_of(per_step) {
            return Err(PlannerError::Config(format!("batch {} is not divisible by MB × DP = {per_step}", self.batch)));
        }
        Ok(())
    }

    /// Samples per micro-batch on one data-parallel replica.
    pub fn micro_batch_size(&self) -> u64 {
        self.batch / (self.micro_batches * self.data as u64)
    }

    pub fn gpus(&self) -> usize {
        self.tensor * self.pipeline * self.data
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterTopology {
    pub nodes: usize,
    pub gpus_per_node: usize,
    /// Bytes per second.
    #[serde(default)]
    pub intra_node_bw: f64,
    #[serde(default)]
    pub inter_node_bw: f64,
    #[serde(default = "default_peak")]
    pub peak_flops_per_gpu: f64,
}

fn default_peak() -> f64 {
    A100_PEAK_FLOPS
}

impl ClusterTopology {
    pub fn dgx_a100(nodes: usize) -> Self {
        Self {
            nodes,
            gpus_per_node: 8,
            intra_node_bw: 600e9,
            inter_node_bw: 8.0 * 25e9,
            peak_flops_per_gpu: A100_PEAK_FLOPS,
        }
    }

    pub fn gpus(&self) -> usize {
        self.nodes * self.gpus_per_node
    }
}

/// Weights, gradients and Adam state: 20 bytes per parameter.
pub fn model_state_bytes(parameters: f64) -> f64 {
    BYTES_PER_PARAMETER * parameters
}

/// Layer-boundary activations kept under full recomputation:
/// `batch × layers × sequence × hidden × 2` bytes.
pub fn activation_bytes(batch: f64, layers: f64, sequence: f64, hidden: f64) -> f64 {
    batch * layers * sequence * hidden * ACTIVATION_BYTES_PER_ELEMENT
}

/// Fraction of ideal pipeline speedup: `MB / (MB + PP − 1)`.
pub fn pipeline_efficiency(micro_batches: u64, stages: u64) -> f64 {
    let mb = micro_batches as f64;
    mb / (mb + stages as f64 - 1.0)
}

/// Model FLOPs per iteration with activation recomputation:
/// `96 B s L h² (1 + s / 6h + V / 16 L h)`.
pub fn flops_per_iteration(shape: &ModelShape, batch: u64) -> f64 {
    let (b, s, l, h, v) =
        (batch as f64, shape.sequence as f64, shape.layers as f64, shape.hidden as f64, shape.vocab as f64);
    96.0 * b * s * l * h * h * (1.0 + s / (6.0 * h) + v / (16.0 * l * h))
}

/// Achieved TFLOP/s per GPU for a measured iteration time.
pub fn estimated_tflops_per_gpu(
    shape: &ModelShape,
    parallel: &ParallelConfig,
    topo: &ClusterTopology,
    iteration_seconds: f64,
) -> f64 {
    flops_per_iteration(shape, parallel.batch) / (topo.gpus() as f64 * iteration_seconds * 1e12)
}

/// Planner input file (TOML).
///
/// ```toml
/// iteration_seconds = 60.1   # optional
///
/// [model]
/// parameters = 530e9
/// layers = 105
/// hidden = 20480
/// heads = 128
/// sequence = 2048
///
/// [parallel]
/// tensor = 8
/// pipeline = 35
/// data = 8
/// batch = 1920
/// micro_batches = 240
///
/// [topology]
/// nodes = 280
/// gpus_per_node = 8
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub model: ModelShape,
    pub parallel: ParallelConfig,
    pub topology: ClusterTopology,
    #[serde(default)]
    pub iteration_seconds: Option<f64>,
    #[serde(default)]
    pub recipe: TrainingRecipe,
}

impl PlannerConfig {
    pub fn from_toml(text: &str) -> Result<Self, PlannerError> {
        toml::from_str(text).map_err(|e| PlannerError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub model_state_total_bytes: f64,
    /// Model state per GPU when layers split evenly over TP × PP.
    pub model_state_per_gpu_bytes: f64,
    pub activation_total_bytes: f64,
    /// Boundary activations of one micro-batch across all layers.
    pub activation_per_micro_batch_bytes: f64,
    /// One micro-batch's activations for the layers of a single stage.
    pub activation_per_stage_micro_batch_bytes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub gpus: usize,
    pub micro_batch_size: u64,
    pub memory: MemoryReport,
    pub pipeline_efficiency: f64,
    pub rank_map: RankGridSummary,
    pub flops_per_iteration: f64,
    pub tflops_per_gpu: Option<f64>,
    pub peak_fraction: Option<f64>,
    pub weight_init_std: f64,
}

pub fn plan(config: &PlannerConfig) -> Result<PlanReport, PlannerError> {
    config.parallel.validate()?;
    let grid = map_topology(&config.topology, &config.parallel)?;
    let m = &config.model;
    let p = &config.parallel;
    let mbs = p.micro_batch_size();
    let total_state = model_state_bytes(m.parameters);
    let act_mb = activation_bytes(mbs as f64, m.layers as f64, m.sequence as f64, m.hidden as f64);
    let memory = MemoryReport {
        model_state_total_bytes: total_state,
        model_state_per_gpu_bytes: total_state / (p.tensor * p.pipeline) as f64,
        activation_total_bytes: activation_bytes(p.batch as f64, m.layers as f64, m.sequence as f64, m.hidden as f64),
        activation_per_micro_batch_bytes: act_mb,
        activation_per_stage_micro_batch_bytes: act_mb / p.pipeline as f64,
    };
    let tflops = config.iteration_seconds.map(|secs| estimated_tflops_per_gpu(m, p, &config.topology, secs));
    Ok(PlanReport {
        gpus: config.topology.gpus(),
        micro_batch_size: mbs,
        memory,
        pipeline_efficiency: pipeline_efficiency(p.micro_batches, p.pipeline as u64),
        rank_map: grid.summary(),
        flops_per_iteration: flops_per_iteration(m, p.batch),
        peak_fraction: tflops.map(|t| t * 1e12 / config.topology.peak_flops_per_gpu),
        tflops_per_gpu: tflops,
        weight_init_std: weight_init_std(m.hidden as f64),
    })
}

fn human_bytes(b: f64) -> String {
    const UNITS: [&str; 6] = ["B", "KB", "MB", "GB", "TB", "PB"];
    let mut v = b;
    let mut u = 0;
    while v >= 1000.0 && u < UNITS.len() - 1 {
        v /= 1000.0;
        u += 1;
    }
    format!("{v:.2} {}", UNITS[u])
}

impl PlanReport {
    pub fn render_text(&self) -> String {
        let m = &self.memory;
        let r = &self.rank_map;
        let mut out = String::new();
        out.push_str(&format!("GPUs: {}  (micro-batch size {})\n", self.gpus, self.micro_batch_size));
        out.push_str("Memory\n");
        out.push_str(&format!("  model state, total:          {}\n", human_bytes(m.model_state_total_bytes)));
        out.push_str(&format!("  model state, per GPU:        {}\n", human_bytes(m.model_state_per_gpu_bytes)));
        out.push_str(&format!("  activations, full batch:     {}\n", human_bytes(m.activation_total_bytes)));
        out.push_str(&format!("  activations, per micro-batch: {}\n", human_bytes(m.activation_per_micro_batch_bytes)));
        out.push_str(&format!(
            "  activations, per stage and micro-batch: {}\n",
            human_bytes(m.activation_per_stage_micro_batch_bytes)
        ));
        out.push_str(&format!("Pipeline efficiency: {:.4}\n", self.pipeline_efficiency));
        out.push_str(&format!(
            "Rank map: {} ranks on {} nodes; TP groups intra-node {}/{}; DP group spans ≤ {} nodes; pipelines span ≤ {} nodes\n",
            r.ranks, r.nodes, r.tp_groups_intra_node, r.tp_groups, r.dp_group_max_nodes, r.pp_group_max_nodes
        ));
        out.push_str(&format!("FLOPs per iteration: {:.4e}\n", self.flops_per_iteration));
        if let (Some(t), Some(f)) = (self.tflops_per_gpu, self.peak_fraction) {
            out.push_str(&format!("Throughput: {t:.1} TFLOP/s per GPU ({:.1}% of peak)\n", f * 100.0));
        }
        out.push_str(&format!("Weight init std: {:.4e}\n", self.weight_init_std));
        out
    }
}

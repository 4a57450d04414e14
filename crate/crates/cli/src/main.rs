use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use curator_core::corpus::{corpus_stats, ingest_shard_indexed};
use curator_core::pipeline::{
    execute_pipeline, BlendDataset, PipelineConfig, PipelineError, PipelineRun, RunOptions, StageKind, TaskSpec,
};
use curator_core::planner::{plan, PlannerConfig};
use curator_core::quality::{train_quality_classifier, TrainOptions};

#[derive(Parser)]
#[command(name = "curator", version, about = "Corpus curation and training capacity planning")]
struct Cli {
    /// Pipeline config (TOML). Single-stage commands take their stage block from it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Input shards (JSONL). Replaces the config's inputs.
    #[arg(long = "input", short = 'i', num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Output directory. Replaces the config's output_dir.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Repair text, identify language and apply the length rules.
    Clean {
        #[command(flatten)]
        data: DataArgs,
        /// Binary trigram language model; the bundled one by default.
        #[arg(long)]
        langid_model: Option<PathBuf>,
    },
    /// Attach quality scores from a trained model.
    Score {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Pareto filter on quality scores.
    Filter {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Fuzzy deduplication.
    Dedup {
        #[command(flatten)]
        data: DataArgs,
        /// Dataset priority, best first, comma separated.
        #[arg(long, value_delimiter = ',')]
        priority: Vec<String>,
    },
    /// Remove text overlapping evaluation tasks.
    Decontaminate {
        #[command(flatten)]
        data: DataArgs,
        /// `name=path[,n=13]`, repeatable.
        #[arg(long = "task", value_parser = TaskSpec::parse_arg)]
        tasks: Vec<TaskSpec>,
    },
    /// Write a batch manifest mixing datasets by weight.
    Blend {
        #[command(flatten)]
        data: DataArgs,
        /// `name=weight_percent`, repeatable.
        #[arg(long = "dataset", value_parser = parse_blend_dataset)]
        datasets: Vec<BlendDataset>,
        #[arg(long)]
        batch_size: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Memory, bubble, rank-map and throughput report for a training setup.
    Plan {
        /// Planner config (TOML); falls back to the [plan] block of --config.
        planner_config: Option<PathBuf>,
    },
    /// Run every stage listed in the config.
    Run {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Per-dataset document and character counts.
    Stats {
        /// Shards, or pipeline output directories containing stats.json.
        paths: Vec<PathBuf>,
    },
    /// Train a quality classifier from positive and negative shards.
    Train {
        #[arg(long = "positive", required = true, num_args = 1..)]
        positives: Vec<PathBuf>,
        #[arg(long = "negative", required = true, num_args = 1..)]
        negatives: Vec<PathBuf>,
        /// Where to write the model.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        holdout: f64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
    },
}

fn parse_blend_dataset(arg: &str) -> Result<BlendDataset, String> {
    let (name, weight) = arg.rsplit_once('=').ok_or_else(|| format!("expected name=weight_percent, got {arg:?}"))?;
    let weight_percent = weight.parse().map_err(|_| format!("bad weight in {arg:?}"))?;
    Ok(BlendDataset { name: name.to_string(), weight_percent, path: None })
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    PipelineError::Config(msg.into()).into()
}

fn base_config(cli: &Cli, data: &DataArgs, stage: Option<StageKind>) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => {
            let output = data.output.clone().ok_or_else(|| config_err("--output is required without --config"))?;
            PipelineConfig::new(output, Vec::new())
        }
    };
    if let Some(stage) = stage {
        cfg.stages = vec![stage];
    }
    if !data.inputs.is_empty() {
        cfg.inputs = data.inputs.clone();
    }
    if let Some(out) = &data.output {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_and_report(cli: &Cli, cfg: &PipelineConfig) -> Result<()> {
    let run = execute_pipeline(cfg, &RunOptions { jobs: cli.jobs })?;
    print_run(cli.json, &run);
    Ok(())
}

fn print_run(json: bool, run: &PipelineRun) {
    if json {
        let v = serde_json::json!({ "stages": run.reports, "stats": run.stats });
        println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
        return;
    }
    for r in &run.reports {
        let how = if run.skipped.contains(&r.stage) { "resumed" } else { "ran" };
        let dropped: u64 = r.drops.values().flat_map(|m| m.values()).sum();
        println!("{:<14} {:>8} -> {:<8} dropped {:<8} ({how})", r.stage.name(), r.docs_in, r.docs_out, dropped);
    }
    print_stats_text(&run.stats);
}

fn print_stats_text(stats: &curator_core::CorpusStats) {
    println!("{:<24} {:>10} {:>10} {:>14} {:>14}  dropped", "dataset", "input", "kept", "input chars", "kept chars");
    for (name, d) in &stats.datasets {
        let drops: Vec<String> = d.dropped.iter().map(|(r, n)| format!("{r}={n}")).collect();
        println!(
            "{:<24} {:>10} {:>10} {:>14} {:>14}  {}",
            name,
            d.input_docs,
            d.kept_docs,
            d.input_chars,
            d.kept_chars,
            drops.join(" ")
        );
    }
}

fn load_docs(paths: &[PathBuf]) -> Result<Vec<curator_core::Document>> {
    let mut docs = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let shard = ingest_shard_indexed(p, i as u32).map_err(|e| PipelineError::Data(e.to_string()))?;
        docs.extend(shard.records);
    }
    Ok(docs)
}

fn run_command(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Clean { data, langid_model } => {
            let mut cfg = base_config(cli, data, Some(StageKind::Clean))?;
            if langid_model.is_some() {
                cfg.clean.langid_model = langid_model.clone();
            }
            run_and_report(cli, &cfg)
        }
        Command::Score { data, model } => {
            let mut cfg = base_config(cli, data, Some(StageKind::Score))?;
            if model.is_some() {
                cfg.score.model = model.clone();
                cfg.score.train = None;
            }
            run_and_report(cli, &cfg)
        }
        Command::Filter { data, alpha } => {
            let mut cfg = base_config(cli, data, Some(StageKind::QualityFilter))?;
            if let Some(a) = alpha {
                cfg.quality_filter.alpha = *a;
            }
            run_and_report(cli, &cfg)
        }
        Command::Dedup { data, priority } => {
            let mut cfg = base_config(cli, data, Some(StageKind::Dedup))?;
            if !priority.is_empty() {
                cfg.priority = priority.clone();
            }
            run_and_report(cli, &cfg)
        }
        Command::Decontaminate { data, tasks } => {
            let mut cfg = base_config(cli, data, Some(StageKind::Decontaminate))?;
            if !tasks.is_empty() {
                cfg.decontaminate.tasks = tasks.clone();
            }
            run_and_report(cli, &cfg)
        }
        Command::Blend { data, datasets, batch_size, steps } => {
            let mut cfg = base_config(cli, data, Some(StageKind::Blend))?;
            if !datasets.is_empty() {
                cfg.blend.datasets = datasets.clone();
            }
            if let Some(b) = batch_size {
                cfg.blend.batch_size = *b;
            }
            if let Some(s) = steps {
                cfg.blend.steps = *s;
            }
            if data.inputs.is_empty() {
                let paths: Vec<PathBuf> = cfg.blend.datasets.iter().filter_map(|d| d.path.clone()).collect();
                if !paths.is_empty() {
                    cfg.inputs = paths;
                }
            }
            run_and_report(cli, &cfg)
        }
        Command::Plan { planner_config } => {
            let pc = match (planner_config, &cli.config) {
                (Some(path), _) => {
                    let text =
                        std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                    PlannerConfig::from_toml(&text).map_err(|e| config_err(e.to_string()))?
                }
                (None, Some(path)) => PipelineConfig::load(path)?
                    .plan
                    .ok_or_else(|| config_err(format!("{} has no [plan] section", path.display())))?,
                (None, None) => return Err(config_err("plan needs a planner config file")),
            };
            let report = plan(&pc).map_err(|e| config_err(e.to_string()))?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            } else {
                print!("{}", report.render_text());
            }
            Ok(())
        }
        Command::Run { data } => {
            if cli.config.is_none() {
                return Err(config_err("run needs --config"));
            }
            let cfg = base_config(cli, data, None)?;
            run_and_report(cli, &cfg)
        }
        Command::Stats { paths } => stats_command(cli.json, paths),
        Command::Train { positives, negatives, model, holdout, epochs } => {
            let pos = load_docs(positives)?;
            let neg = load_docs(negatives)?;
            let opts = TrainOptions {
                holdout_fraction: *holdout,
                epochs: *epochs,
                seed: curator_core::hashing::derive_seed(cli.seed.unwrap_or(0), "score"),
                ..TrainOptions::default()
            };
            let (m, acc) = train_quality_classifier(&pos, &neg, &opts).map_err(|e| match e {
                curator_core::quality::QualityError::HoldoutFraction(_) => config_err(e.to_string()),
                other => PipelineError::Data(other.to_string()).into(),
            })?;
            m.save(model).with_context(|| format!("writing {}", model.display()))?;
            if cli.json {
                let v = serde_json::json!({
                    "holdout_accuracy": acc,
                    "positives": pos.len(),
                    "negatives": neg.len(),
                });
                println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
            } else {
                println!("holdout accuracy {acc:.4} ({} positives, {} negatives)", pos.len(), neg.len());
            }
            Ok(())
        }
    }
}

fn stats_command(json: bool, paths: &[PathBuf]) -> Result<()> {
    if paths.is_empty() {
        return Err(config_err("stats needs at least one path"));
    }
    let mut shards = Vec::new();
    let mut from_runs = Vec::new();
    for p in paths {
        if p.is_dir() {
            from_runs.push(read_run_stats(p)?);
        } else {
            let shard = ingest_shard_indexed(p, shards.len() as u32).map_err(|e| PipelineError::Data(e.to_string()))?;
            shards.push(shard);
        }
    }
    let mut stats = corpus_stats(&shards);
    for run in from_runs {
        for (name, d) in run.datasets {
            let e = stats.datasets.entry(name).or_default();
            e.input_docs += d.input_docs;
            e.input_chars += d.input_chars;
            e.kept_docs += d.kept_docs;
            e.kept_chars += d.kept_chars;
            for (r, n) in d.dropped {
                *e.dropped.entry(r).or_default() += n;
            }
        }
    }
    if json {
        println!("{}", stats.to_json_pretty());
    } else {
        print_stats_text(&stats);
    }
    Ok(())
}

fn read_run_stats(dir: &Path) -> Result<curator_core::CorpusStats> {
    let path = dir.join(curator_core::pipeline::STATS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())).into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run_command(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<PipelineError>().map_or(2, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

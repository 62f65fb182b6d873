use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdf_core::augment::{fit_relevance, FitOptions};
use sdf_core::corpus::{load_qa, write_json};
use sdf_core::pipeline::{
    dataset_stats, evaluate_files, BackendKind, Backends, Pipeline, PipelineConfig, PipelineError,
    Resources, Stage, EXIT_CONFIG, EXIT_DATA,
};
use sdf_core::quality::{calibrate_threshold, Task, ThresholdSet};

#[derive(Parser)]
#[command(name = "sdf", version, about = "Build and evaluate augmented 3D-language QA datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-record stages (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Abort on the first invalid input record.
    #[arg(long)]
    strict: bool,
    /// Override the backend kind.
    #[arg(long, value_parser = parse_backend)]
    backend: Option<BackendKind>,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage, resuming from valid checkpoints.
    Run {
        #[command(flatten)]
        args: PipelineArgs,
        /// Ignore existing checkpoints.
        #[arg(long)]
        fresh: bool,
    },
    /// Load and validate the input corpora.
    Ingest(PipelineArgs),
    /// Generate candidates with every enabled family.
    Augment(PipelineArgs),
    /// Attach similarity, consistency and relevance scores.
    Score(PipelineArgs),
    /// Apply relevance and threshold gates.
    Gate(PipelineArgs),
    /// Drop near-duplicate generated records.
    Dedup(PipelineArgs),
    /// Write dataset.jsonl, manifest.json and rejected.jsonl.
    Compose(PipelineArgs),
    /// Write stats.json for a pipeline run, or print stats for a dataset file.
    Stats {
        #[command(flatten)]
        args: Option<PipelineArgs>,
        /// Dataset JSONL to summarize instead of a pipeline run.
        #[arg(long, conflicts_with = "config")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against references with the captioning metrics.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        references: PathBuf,
        /// Also report metrics gated at this box IoU.
        #[arg(long)]
        iou: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute thresholds from reference score samples.
    Calibrate {
        /// JSON object mapping `qa` and/or `captioning` to score lists.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit relevance weights on the config's QA corpus.
    FitRelevance {
        #[command(flatten)]
        args: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

/// An error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let mut message = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            let text = s.to_string();
            if !message.contains(&text) {
                message.push_str(&format!(": {text}"));
            }
            source = s.source();
        }
        Failure {
            code: e.exit_code() as u8,
            message,
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG as u8,
        message: message.into(),
    }
}

fn data_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_DATA as u8,
        message: message.into(),
    }
}

fn load_config(args: &PipelineArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    cfg.apply_env();
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.strict {
        cfg.strict = true;
    }
    if let Some(kind) = args.backend {
        cfg.backends.kind = kind;
    }
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(config_error("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error(e.to_string()))?;
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| data_error(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(data_error(e.to_string())),
        _ => Ok(()),
    }
}

fn write_out<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    write_json(path, value).map_err(|e| data_error(e.to_string()))
}

fn stage(args: &PipelineArgs, stage: Stage) -> Result<(), Failure> {
    let pipeline = Pipeline::new(load_config(args)?)?;
    pipeline.run_stage(stage)?;
    log::info!("{} done", stage.name());
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { args, fresh } => {
            let pipeline = Pipeline::new(load_config(&args)?)?.resume(!fresh);
            let manifest = pipeline.run()?;
            log::info!(
                "wrote {} records to {}",
                manifest.total,
                pipeline.config().output_dir.display()
            );
            print_json(&manifest)
        }
        Command::Ingest(a) => stage(&a, Stage::Ingest),
        Command::Augment(a) => stage(&a, Stage::Augment),
        Command::Score(a) => stage(&a, Stage::Score),
        Command::Gate(a) => stage(&a, Stage::Gate),
        Command::Dedup(a) => stage(&a, Stage::Dedup),
        Command::Compose(a) => stage(&a, Stage::Compose),
        Command::Stats { args, dataset, out } => match (args, dataset) {
            (_, Some(path)) => {
                let report = dataset_stats(&path)?;
                match out {
                    Some(o) => write_out(&o, &report),
                    None => print_json(&report),
                }
            }
            (Some(a), None) => stage(&a, Stage::Stats),
            (None, None) => Err(config_error("give --config or --dataset")),
        },
        Command::Evaluate {
            predictions,
            references,
            iou,
            out,
        } => {
            if let Some(k) = iou {
                if !(0.0..=1.0).contains(&k) {
                    return Err(config_error("--iou must be in [0, 1]"));
                }
            }
            let metrics = evaluate_files(&predictions, &references, iou)?;
            if let Some(o) = out {
                write_out(&o, &metrics)?;
            }
            print_json(&metrics)
        }
        Command::Calibrate { scores, out } => {
            let text = std::fs::read_to_string(&scores)
                .map_err(|e| config_error(format!("{}: {e}", scores.display())))?;
            let samples: BTreeMap<Task, Vec<f64>> = serde_json::from_str(&text)
                .map_err(|e| config_error(format!("{}: {e}", scores.display())))?;
            let entries = samples
                .iter()
                .map(|(task, s)| calibrate_threshold(s, *task))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| config_error(e.to_string()))?;
            let set = ThresholdSet::calibrated(&entries);
            write_out(&out, &set)?;
            print_json(&set)
        }
        Command::FitRelevance { args, out } => {
            let cfg = load_config(&args)?;
            let resources =
                Resources::load(&cfg.augment.resources).map_err(|e| config_error(e.to_string()))?;
            let backends = Backends::from_config(&cfg.backends, &resources)
                .map_err(|e| PipelineError::stage("fit-relevance", e))?;
            let qa = load_qa(&cfg.inputs.qa, cfg.strict)
                .map_err(|e| PipelineError::stage("fit-relevance", e))?;
            let opts = FitOptions {
                seed: cfg.seed,
                ..FitOptions::default()
            };
            let weights = fit_relevance(&qa.records, backends.embedder.as_ref(), &opts)
                .map_err(|e| PipelineError::stage("fit-relevance", e))?;
            weights
                .save(&out)
                .map_err(|e| data_error(e.to_string()))?;
            log::info!("wrote {} weights to {}", weights.w.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

mod commands;
mod manifest;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(
    name = "threadcast",
    version,
    about = "Fit, simulate and predict discussion-tree growth"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Worker threads for per-tree fan-out (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Global seed; overrides any seed in a config file.
    #[arg(long, global = true, env = "THREADCAST_SEED")]
    pub seed: Option<u64>,
    /// Only log warnings and errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    /// Log debug events.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Build a forest from line-delimited comment records.
    Ingest(IngestArgs),
    /// Per-tree descriptive statistics, or CCDF points of a pooled sample.
    Stats(StatsArgs),
    /// Fit one model to every tree.
    Fit(FitArgs),
    /// Simulate Hawkes trees from parameter sets.
    Simulate(SimulateArgs),
    /// Predict final sizes and score the unobserved activity.
    Predict(PredictArgs),
    /// Grow preferential-attachment trees.
    SimulatePa(SimulatePaArgs),
    /// Run the structure and dynamics experiments.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Canonical,
    Reddit,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long, value_enum, default_value = "canonical")]
    pub format: Format,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Abort on the first anomalous thread instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcdfSample {
    Sizes,
    Rootdeg,
    Fwddeg,
    RespRoot,
    RespComment,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub forest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Emit CCDF points of this pooled sample instead of per-tree rows.
    #[arg(long, value_enum)]
    pub ccdf: Option<CcdfSample>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Hawkes,
    Pa,
    Dp,
    Rpp,
}

/// Hours, or `full` for the whole tree.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Window(pub f64);

impl std::str::FromStr for Window {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Window(f64::INFINITY));
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 => Ok(Window(h)),
            _ => Err(format!("expected positive hours or `full`, got `{s}`")),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub forest: PathBuf,
    #[arg(long, default_value = "full")]
    pub t_learn: Window,
    #[arg(long, value_enum, default_value = "hawkes")]
    pub model: ModelArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// A params CSV (as written by `fit`) or inline `a=..,b=..,alpha=..,mu=..,sigma=..,n_b=..`.
    #[arg(long)]
    pub params: String,
    /// Trees per parameter set.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Observation horizon in hours.
    #[arg(long, default_value = "full")]
    pub horizon: Window,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum PredictModel {
    Hawkes,
    Dp,
    Rpp,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub forest: PathBuf,
    #[arg(long)]
    pub t_learn: Window,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    #[arg(long, value_enum, default_value = "hawkes")]
    pub model: PredictModel,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulatePaArgs {
    /// Nodes per tree, root included.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentArg {
    Structure,
    Dynamics,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub forest: PathBuf,
    /// TOML file with evaluation settings; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub experiment: ExperimentArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn init_logging(g: &Global) {
    let level = if g.quiet {
        tracing::Level::WARN
    } else if g.verbose {
        tracing::Level::DEBUG
    } else {
        tracing::Level::INFO
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .with_target(false)
        .with_ansi(false)
        .without_time()
        .init();
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    init_logging(&cli.global);
    let started = Instant::now();
    let run = || commands::dispatch(&cli.command, &cli.global, &argv, started);
    let result = match cli.global.workers {
        Some(0) => Err(anyhow::anyhow!("--workers must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(run)),
        None => run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dcs_core::{Format, ObjectiveMode, SearchMode};

#[derive(Debug, Parser)]
#[command(
    name = "dcs",
    version,
    about = "Post-hoc class- and sample-level debiasing of classifier probabilities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a dataset, anneal a correction scheme on the optimization part
    /// and report dev metrics.
    Optimize(OptimizeArgs),
    /// Apply a saved scheme to a dataset.
    Apply(ApplyArgs),
    /// Exhaustively search the optimization split (small instances only).
    Oracle(OracleArgs),
    /// Run a dataset x mode x seed grid and tabulate accuracy and COBias.
    Compare(CompareArgs),
    /// Summarize annealing time from solve files.
    Report(ReportArgs),
    /// Generate a synthetic biased dataset.
    Synth(SynthArgs),
    /// Write the default function catalog.
    Catalog(CatalogArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to the input file extension.
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct ObjectiveArgs {
    #[arg(long, default_value = "dcs")]
    pub mode: SearchMode,
    #[arg(long, default_value = "full")]
    pub objective: ObjectiveMode,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// JSON catalog; the built-in 19 + 30 catalog when omitted.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub dev_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 200_000.0)]
    pub init_temp: f64,
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100.0)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub min_temp: f64,
    #[arg(long, default_value_t = 150)]
    pub max_outer: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Required; every random choice derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Task label recorded in the solve file; defaults to the input stem.
    #[arg(long)]
    pub task: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ApplyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub scheme: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    /// Accepted for parity with `optimize`; the oracle ignores the schedule.
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Seed of the optimization/dev split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Refuse search spaces larger than this.
    #[arg(long, default_value_t = 1_000_000)]
    pub limit: u128,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// May be repeated.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub format: Option<Format>,
    #[arg(
        long = "modes",
        value_delimiter = ',',
        default_value = "dnip,furud,dcs"
    )]
    pub modes: Vec<SearchMode>,
    #[arg(long, default_value = "full")]
    pub objective: ObjectiveMode,
    /// Comma-separated grid axis.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    pub tau: Vec<f64>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub dev_fraction: f64,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Required, comma-separated list of seeds.
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Solve files written by `optimize` (may be repeated).
    #[arg(long = "trace", required = true)]
    pub traces: Vec<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Profile JSON file.
    #[arg(long, conflicts_with = "suite")]
    pub profile: Option<PathBuf>,
    /// Named profile from the built-in suite (P1..P5).
    #[arg(long)]
    pub suite: Option<String>,
    /// Defaults to the suite entry's size, or 3000.
    #[arg(long)]
    pub num_instances: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct CatalogArgs {
    #[arg(long)]
    pub out: PathBuf,
}

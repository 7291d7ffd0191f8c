//! Command-line front end: argument definitions and the command implementations.

pub mod benchmark;
pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cpdag_core::postprocess::PostProcess;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "cpdag",
    version,
    about = "Simulate, train, discover and benchmark CPDAG estimators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a training corpus of (correlation matrix, CPDAG) pairs.
    Simulate(SimulateArgs),
    /// Train the network on a corpus.
    Train(TrainArgs),
    /// Estimate a CPDAG from a correlation matrix with a trained model.
    Discover(DiscoverArgs),
    /// Estimate a CPDAG with the PC algorithm and Fisher-z tests.
    Pc(PcArgs),
    /// Score estimated graphs against true graphs.
    Evaluate(EvaluateArgs),
    /// Run the full simulate/train/evaluate sweep and write one CSV row per condition.
    #[command(after_help = benchmark::HELP_COLUMNS)]
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flat key=value file; keys: p, n, count, seed, workers, shard_size.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of variables (default 5).
    #[arg(long)]
    pub p: Option<usize>,
    /// Observations per simulated data set (default 1000).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of pairs (default 20000).
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; output is identical for any value.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub shard_size: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Network hyperparameter overrides shared by `train` and `benchmark`.
#[derive(Debug, Default, Args)]
pub struct HyperArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Hidden dense layer width (default 4 p^2).
    #[arg(long)]
    pub dense_units: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub pool: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Flat key=value file; keys: seed, epochs, batch_size, dense_units, filters, pool, dropout, learning_rate.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus directory written by `simulate`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output `.sld` model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Training log CSV (default: model path with `.log.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Expected number of variables; training fails if the corpus differs.
    #[arg(long)]
    pub p: Option<usize>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    /// Trained `.sld` model.
    #[arg(long)]
    pub model: PathBuf,
    /// Input `.cor.csv` correlation matrix.
    #[arg(long)]
    pub input: PathBuf,
    /// Threshold in (0, 1).
    #[arg(long)]
    pub tau: f64,
    #[arg(long, default_value = "bpco", value_parser = parse_postprocess)]
    pub method: PostProcess,
    /// Output `.adj.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Probability matrix output (default: next to `--out` as `.prob.csv`).
    #[arg(long)]
    pub probabilities: Option<PathBuf>,
    /// Corpus directory the model must have been trained on.
    #[arg(long)]
    pub expect_corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PcArgs {
    /// Input `.cor.csv` correlation matrix.
    #[arg(long)]
    pub input: PathBuf,
    /// Sample size behind the correlation matrix.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Output `.adj.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Separating sets, one pair per line (default: next to `--out` as `.sepsets.txt`).
    #[arg(long)]
    pub sepsets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimated `.adj.csv`; repeat once per instance.
    #[arg(long = "est", required = true)]
    pub estimates: Vec<PathBuf>,
    /// True `.adj.csv`, in the same order as `--est`.
    #[arg(long = "truth", required = true)]
    pub truths: Vec<PathBuf>,
    /// Per-instance and aggregate CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave instances with a 0/0 ratio out of the means.
    #[arg(long)]
    pub exclude_degenerate: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Flat key=value file; keys: p, n, tau, alpha, postprocess, b_train, b_test,
    /// seed, workers and the hyperparameter keys. Lists are comma separated.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_postprocess)]
    pub postprocess: Vec<PostProcess>,
    /// Training pairs per cell (default 20000).
    #[arg(long)]
    pub b_train: Option<usize>,
    /// Test pairs per cell (default 500).
    #[arg(long)]
    pub b_test: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cells run in parallel on this many threads; results do not change.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

fn parse_postprocess(s: &str) -> Result<PostProcess, String> {
    s.parse().map_err(|e: cpdag_core::Error| e.to_string())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Train(args) => commands::train(&args),
        Command::Discover(args) => commands::discover(&args),
        Command::Pc(args) => commands::pc(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Benchmark(args) => commands::benchmark(&args),
    }
}

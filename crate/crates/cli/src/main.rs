mod commands;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;

/// Version of the file formats and command-line interface, reported by
/// `--version` next to the crate version.
const INTERFACE_VERSION: &str = "1";

#[derive(Debug, Parser)]
#[command(
    name = "bidding-lab",
    version = version_string(),
    about = "Randomized learning-augmented online bidding: strategies, certificates and experiments"
)]
struct Cli {
    /// Cap on worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

const fn version_string() -> &'static str {
    concat!(env!("CARGO_PKG_VERSION"), " (interface 1)")
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Consistency of every strategy family on a grid of robustness values.
    Tradeoff(TradeoffArgs),
    /// Build the Pareto-optimal bidding function for robustness R.
    Pareto(ParetoArgs),
    /// Tabulate B(t), the normalized mass and the work of a function file.
    Mass(MassArgs),
    /// Draw one randomized bid sequence against a threshold.
    Sample(SampleArgs),
    /// Dual certificate for the lower bound, optionally over a grid of R.
    LowerBound(LowerBoundArgs),
    /// Write the discretized primal LP in text form.
    ExportLp(ExportLpArgs),
    /// Expected normalized cost under log-normal prediction noise.
    Simulate(SimulateArgs),
    /// Incremental median experiment on a weighted graph.
    Median(MedianArgs),
}

#[derive(Debug, Args)]
struct TradeoffArgs {
    #[arg(long, default_value_t = std::f64::consts::E)]
    r_min: f64,
    #[arg(long, default_value_t = 8.0)]
    r_max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 50)]
    steps: usize,
    /// Positive-index truncation of the lower-bound LP.
    #[arg(long, default_value_t = 50)]
    a: usize,
    /// Negative-index truncation of the lower-bound LP.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParetoArgs {
    #[arg(long)]
    r: f64,
    /// Tail truncation tolerance of the polynomial family.
    #[arg(long, default_value_t = 1e-12)]
    tail_tol: f64,
    /// Write the bidding function as JSON.
    #[arg(long)]
    emit: Option<PathBuf>,
    /// Write the constants q_k as CSV `k,q_k`.
    #[arg(long)]
    emit_qk: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MassArgs {
    /// Bidding function JSON file.
    function: PathBuf,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    t_min: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    t_max: f64,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Bidding function JSON file.
    function: PathBuf,
    #[arg(long)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the bids as CSV `i,bid`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LowerBoundArgs {
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 50)]
    a: usize,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Certificate JSON path (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid of R values (`start:stop:step` or a list) for a curve CSV.
    #[arg(long, requires = "curve_out")]
    curve: Option<String>,
    /// Output path of the `r,lambda,a,n` curve.
    #[arg(long, requires = "curve")]
    curve_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportLpArgs {
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 10)]
    a: usize,
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 4.0)]
    r: f64,
    /// Noise variances, `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0:4:0.1")]
    sigma2: String,
    #[arg(long, default_value_t = 1_000_000)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated subset of A, I, D.
    #[arg(long, default_value = "A,I,D")]
    algos: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MedianArgs {
    /// Edge list CSV `u,v,weight`.
    #[arg(long, conflicts_with = "synthetic")]
    graph: Option<PathBuf>,
    /// Generate a road-like graph with this many vertices instead.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Seed of the synthetic graph.
    #[arg(long, default_value_t = 2024)]
    graph_seed: u64,
    #[arg(long, default_value_t = 4.0)]
    r: f64,
    /// Cluster count whose baseline cost is the prediction.
    #[arg(long)]
    k_hat: usize,
    #[arg(long, default_value = "A,I,D")]
    algos: String,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Baseline cache JSON, reused when the graph and seed match.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Fill skipped indices greedily up to their size budget.
    #[arg(long)]
    fill: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code, e.message);
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::new("INVALID_ARGUMENT", e.to_string()))?;
    }
    match cli.command {
        Command::Tradeoff(a) => commands::tradeoff(a),
        Command::Pareto(a) => commands::pareto(a),
        Command::Mass(a) => commands::mass(a),
        Command::Sample(a) => commands::sample(a),
        Command::LowerBound(a) => commands::lower_bound(a),
        Command::ExportLp(a) => commands::export_lp(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Median(a) => commands::median(a),
    }
}

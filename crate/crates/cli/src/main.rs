//! `wmmse`: robust MMSE estimation from the command line.
//!
//! Exit codes: 0 on success, 1 when a solve or check does not certify the
//! requested tolerance, 2 on invalid input or arguments.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use io::Format;

#[derive(Parser)]
#[command(name = "wmmse", version, about = "Distributionally robust MMSE estimation under Gelbrich ambiguity")]
struct Cli {
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance file
    Generate(GenerateArgs),
    /// Compute the robust estimator and least favorable prior
    Solve(SolveArgs),
    /// Recompute primal and dual values of a solution file
    Check(CheckArgs),
    /// Frank-Wolfe iteration counts and timings on random instances
    Benchmark(BenchmarkArgs),
    /// Out-of-sample regret over a grid of radii
    Regret(RegretArgs),
    /// Write the primal or dual program as an SDPA sparse file
    Export(ExportArgs),
}

/// Where the instance comes from: a file, or a random recipe.
#[derive(Args, Debug, Clone)]
pub struct SourceArgs {
    /// Instance JSON file
    #[arg(long, conflicts_with_all = ["dim", "n", "m"])]
    pub instance: Option<PathBuf>,
    /// Signal and noise dimension of a random instance (sets n and m)
    #[arg(long, conflicts_with_all = ["n", "m"])]
    pub dim: Option<usize>,
    /// Signal dimension of a random instance
    #[arg(long, requires = "m")]
    pub n: Option<usize>,
    /// Noise dimension of a random instance
    #[arg(long, requires = "n")]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// RNG substream of a random instance
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Signal radius (random instances default to sqrt(n))
    #[arg(long)]
    pub rho_x: Option<f64>,
    /// Noise radius (random instances default to sqrt(m))
    #[arg(long)]
    pub rho_w: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// vanilla, adaptive or fully_adaptive
    #[arg(long, default_value = "fully_adaptive")]
    pub variant: String,
    /// Oracle precision in (0, 1)
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit wall-clock times so output is reproducible byte for byte
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args)]
pub struct CheckArgs {
    /// Solution file written by `solve`
    pub solution: PathBuf,
    /// Largest acceptable duality gap
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 50, 100])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = ["vanilla".to_string(), "adaptive".to_string(), "fully_adaptive".to_string()])]
    pub variants: Vec<String>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// One row per iteration instead of one row per solve
    #[arg(long)]
    pub trace: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args)]
pub struct RegretArgs {
    /// Signal and noise dimension
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    /// Samples per nominal covariance estimate
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Radii used on both axes (default: 0 and 20 log-spaced points in [0.1, 10])
    #[arg(long, value_delimiter = ',')]
    pub rho_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the run-averaged summary as JSON
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SdpKind {
    Primal,
    PrimalCholesky,
    Dual,
}

#[derive(Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum, default_value_t = SdpKind::Primal)]
    pub kind: SdpKind,
    #[arg(long)]
    pub out: PathBuf,
}

/// Result of a command that ran to completion.
pub enum Status {
    Ok,
    NotCertified(String),
}

fn main() -> ExitCode {
    // Argument errors exit with code 2.
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Check(a) => commands::check(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Regret(a) => commands::regret(a),
        Command::Export(a) => commands::export(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotCertified(msg)) => {
            eprintln!("wmmse: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("wmmse: error: {e:#}");
            ExitCode::from(2)
        }
    }
}

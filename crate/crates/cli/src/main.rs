mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "COLLAPSE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "collapse", version, about = "Simulate recursive-training processes and check collapse bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo estimate of an event over many trajectories.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Closed-form bound curves for a process.
    #[command(args_override_self = true)]
    Bounds(BoundsArgs),
    /// Run a named preset and write its data series.
    #[command(args_override_self = true)]
    Figure(FigureArgs),
    /// Check a Monte Carlo summary against bound curves.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Compare the exact and approximate mixture estimators.
    #[command(name = "gmm-compare", args_override_self = true)]
    GmmCompare(GmmCompareArgs),
    /// Recursive n-gram training on a corpus.
    #[command(args_override_self = true)]
    Ngram(NgramArgs),
    /// One trajectory as JSON lines.
    #[command(args_override_self = true)]
    Trajectory(TrajectoryArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutputArgs {
    /// Output file (directory for `figure`); defaults to $COLLAPSE_OUT_DIR or stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Flat `key = value` file of flags; flags on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProcessArgs {
    /// bernoulli, poisson, gaussian, gmm, discrete or discrete_poisson.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Initial probabilities (discrete) or counts (discrete_poisson), separated by whitespace or commas.
    #[arg(long)]
    pub theta_file: Option<PathBuf>,
    /// Samples per generation.
    #[arg(long)]
    pub n: Option<u64>,
    /// ml, ml_unbiased_variance, joint_ml or approx_joint_ml.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Surrogate constant for approx_joint_ml.
    #[arg(long)]
    pub approx_a: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    /// Last generation.
    #[arg(long = "K", default_value_t = 100)]
    pub k_max: u64,
    /// Comma-separated generations to record; defaults to 1..=K.
    #[arg(long)]
    pub ks: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Event to estimate; defaults to the family's survival or collapse event.
    #[arg(long)]
    pub event: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Worker threads, 0 for the machine default.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Half-widths are z standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub z: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long = "K", default_value_t = 100)]
    pub k_max: u64,
    #[arg(long)]
    pub ks: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct FigureArgs {
    /// Preset name, e.g. fig3.
    pub name: String,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "K")]
    pub k_max: Option<u64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Monte Carlo summary file.
    pub summary: PathBuf,
    /// Bound curve file.
    pub curves: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GmmCompareArgs {
    #[arg(long, default_value_t = 1.0)]
    pub mu0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 10)]
    pub n: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50.0)]
    pub approx_a: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct NgramArgs {
    /// Whitespace-tokenized text file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Optional vocabulary file, one token per line; other tokens are rejected.
    #[arg(long)]
    pub vocabulary: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Tokens generated per generation; defaults to the corpus length.
    #[arg(long)]
    pub n: Option<u64>,
    /// Number of generations.
    #[arg(long = "K", default_value_t = 10)]
    pub k_max: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long = "K", default_value_t = 100)]
    pub k_max: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; defaults to $COLLAPSE_OUT_DIR or stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// How a subcommand finished, mapped onto the process exit code.
pub enum Status {
    Ok,
    VerificationFailed,
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Bounds(a) => commands::bounds(&a),
        Command::Figure(a) => commands::figure(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::GmmCompare(a) => commands::gmm_compare(&a),
        Command::Ngram(a) => commands::ngram(&a),
        Command::Trajectory(a) => commands::trajectory(&a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

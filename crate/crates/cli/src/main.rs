mod jobs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use abcpart::abc::AdaptMode;
use abcpart::scenarios::Scenario;
use abcpart::transport::SolverKind;
use abcpart::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "abcpart", version, about = "ABC-MCMC and marginal Gibbs samplers for random partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ABC sampler on a dataset.
    RunAbc(RunAbcArgs),
    /// Run a marginal Gibbs sampler (gaussian and gk1 only).
    RunGibbs(RunGibbsArgs),
    /// Summarize an existing chain directory.
    Summarize(SummarizeArgs),
    /// Write a simulated dataset and its ground-truth labels.
    SimulateData(SimulateArgs),
    /// Re-run a job from the config.json echo of an earlier run.
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kernel {
    Gaussian,
    Gk1,
    Gk2,
    Ergm,
}

impl From<Kernel> for Scenario {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Gaussian => Scenario::Gaussian,
            Kernel::Gk1 => Scenario::Gk1,
            Kernel::Gk2 => Scenario::Gk2,
            Kernel::Ergm => Scenario::Ergm,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Adapt {
    /// Fixed threshold.
    None,
    /// Adaptive threshold, frozen at the end of burn-in.
    Burnin,
    /// Adaptive threshold for the whole chain.
    Full,
}

impl Adapt {
    fn mode(self) -> Option<AdaptMode> {
        match self {
            Adapt::None => None,
            Adapt::Burnin => Some(AdaptMode::StopAfterBurnin),
            Adapt::Full => Some(AdaptMode::Always),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Solver {
    Sort,
    Hungarian,
    Sinkhorn,
}

impl From<Solver> for SolverKind {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Sort => SolverKind::Sorted1d,
            Solver::Hungarian => SolverKind::Hungarian,
            Solver::Sinkhorn => SolverKind::Sinkhorn,
        }
    }
}

/// Options shared by both samplers.
#[derive(Args, Clone, Debug)]
struct Common {
    #[arg(long, value_enum)]
    kernel: Kernel,
    /// Observations: CSV with one row per item, or a graph manifest for ergm.
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth labels, one per line.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Pitman-Yor strength.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Pitman-Yor discount.
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 20_000)]
    iters: usize,
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent replications, one ChaCha stream each.
    #[arg(long, default_value_t = 1)]
    reps: u64,
    /// Thinning used by the point estimate.
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Metropolis sweeps per simulated graph (ergm).
    #[arg(long, default_value_t = 20)]
    sweeps: usize,
}

#[derive(Args, Debug)]
struct RunAbcArgs {
    #[command(flatten)]
    common: Common,
    /// Fixed threshold (adapt = none). Defaults to sqrt(n log n) on the raw scale.
    #[arg(long)]
    eps: Option<f64>,
    /// Starting threshold of the adaptive schedule.
    #[arg(long)]
    eps0: Option<f64>,
    /// Limit threshold of the adaptive schedule; tuned when omitted.
    #[arg(long)]
    eps_star: Option<f64>,
    #[arg(long, value_enum, default_value_t = Adapt::Full)]
    adapt: Adapt,
    /// Target acceptance rate when tuning the limit threshold.
    #[arg(long, default_value_t = 0.1)]
    target: f64,
    /// Transport solver; defaults to sort for scalar data, hungarian otherwise.
    #[arg(long, value_enum)]
    solver: Option<Solver>,
    /// Wasserstein order.
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Attempts without acceptance before the sampler gives up.
    #[arg(long, default_value_t = abcpart::abc::DEFAULT_MAX_ATTEMPTS)]
    max_attempts: u64,
}

#[derive(Args, Debug)]
struct RunGibbsArgs {
    #[command(flatten)]
    common: Common,
    /// Auxiliary atoms per item.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Use the collapsed conjugate sampler (gaussian only).
    #[arg(long)]
    conjugate: bool,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// Run directory containing chain.csv, or a chain file.
    chain: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory; defaults to the chain's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    thin: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kernel: Kernel,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Nodes per graph (ergm).
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    /// Metropolis sweeps per graph (ergm).
    #[arg(long, default_value_t = 20)]
    sweeps: usize,
}

#[derive(Args, Debug)]
struct RerunArgs {
    /// A config.json written by run-abc or run-gibbs.
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// 2 for bad input or configuration, 3 for a stalled sampler.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stall { .. } => 3,
        Error::InvalidParameter(_)
        | Error::Parse(_)
        | Error::Empty(_)
        | Error::SizeMismatch { .. }
        | Error::TuneFailed { .. }
        | Error::Json(_)
        | Error::Csv(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunAbc(args) => jobs::run_abc_command(args),
        Command::RunGibbs(args) => jobs::run_gibbs_command(args),
        Command::Summarize(args) => output::summarize_command(args),
        Command::SimulateData(args) => output::simulate_command(args),
        Command::Rerun(args) => jobs::rerun_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

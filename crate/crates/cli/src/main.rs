//! `mflq`: solve, study and check mean-field LQ problems from JSON files.
//!
//! Exit status: 0 success, 2 bad input or failed validation, 3 ill-posed or
//! blown-up solve, 4 no convergence, 1 anything else (I/O, failed checks).

mod out;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mflq_types::MflqError;

#[derive(Debug)]
pub enum CliError {
    Mflq(MflqError),
    Input(String),
    Failed(String),
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Other(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failed(_) | CliError::Other(_) => 1,
            CliError::Mflq(e) => match e {
                MflqError::Parse(_) | MflqError::Config(_) | MflqError::Dimension { .. } | MflqError::Precondition(_) => 2,
                MflqError::IllPosed { .. } | MflqError::BlowUp { .. } => 3,
                MflqError::NoConvergence { .. } => 4,
                MflqError::Invariant(_) => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Mflq(e) => write!(f, "{e}"),
            CliError::Input(s) | CliError::Failed(s) | CliError::Other(s) => f.write_str(s),
        }
    }
}

impl From<MflqError> for CliError {
    fn from(e: MflqError) -> Self {
        CliError::Mflq(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "mflq", version, about = "Mean-field LQ solvers: pre-commitment, equilibria, convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the problem commands.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Problem JSON file.
    pub problem: PathBuf,
    /// ODE step.
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    /// Refinement tolerance (closed-loop 1e-4, converge 1e-3 when unset).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Monte Carlo paths.
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    /// Monte Carlo time steps.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Intervals of the coarsest refinement level.
    #[arg(long = "N0", default_value_t = 4)]
    pub n0: usize,
    #[arg(long = "max-doublings")]
    pub max_doublings: Option<usize>,
    /// Artifact directory.
    #[arg(long, default_value = "mflq-out")]
    pub out: PathBuf,
    /// Problem override `key=value`, e.g. `weights.G=[[2]]`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Initial state, comma separated (default all ones).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    ClosedLoop,
    Precommit,
    OpenLoop,
    Game,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    /// Local optimality of every player of the N-player game.
    Game,
    /// Spike-perturbation check of the open-loop equilibrium.
    OpenLoop,
    /// Equation residual of the closed-loop solution.
    Residual,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demo {
    /// Restart experiment for `dX = E[X] ds + E[X] dW`.
    Semigroup,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check (H1)-(H2), and (H3) for monotone problems.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Sampling intervals per axis.
        #[arg(long, default_value_t = 64)]
        density: usize,
    },
    /// Pre-commitment Riccati pair from time `t`.
    Precommit {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Open-loop equilibrium.
    OpenLoop {
        #[command(flatten)]
        common: Common,
    },
    /// Closed-loop equilibrium as the limit of N-player games.
    ClosedLoop {
        #[command(flatten)]
        common: Common,
        /// Report raw levels only, without Richardson extrapolation.
        #[arg(long)]
        no_extrapolate: bool,
    },
    /// N-player game on a uniform partition.
    Game {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N", default_value_t = 4)]
        n: usize,
    },
    /// Refinement study N0, 2N0, ... with a monotone-decrease flag.
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo run under a computed policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "closed-loop")]
        policy: Policy,
        /// Players for `--policy game`.
        #[arg(long = "N", default_value_t = 4)]
        n: usize,
        /// Also write every path to paths.bin.
        #[arg(long)]
        dump_paths: bool,
    },
    /// Statistical or residual check of a computed equilibrium.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "game")]
        check: Check,
        #[arg(long = "N", default_value_t = 4)]
        n: usize,
    },
    /// Small worked experiments.
    Demo {
        #[arg(value_enum)]
        which: Demo,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MFLQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("MFLQ_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Other(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    threads()?;
    match cli.command {
        Command::Validate { common, density } => run::validate(&common, density),
        Command::Precommit { common, t } => run::precommit(&common, t),
        Command::OpenLoop { common } => run::open_loop(&common),
        Command::ClosedLoop { common, no_extrapolate } => run::closed_loop(&common, !no_extrapolate),
        Command::Game { common, n } => run::game(&common, n),
        Command::Converge { common } => run::converge(&common),
        Command::Simulate {
            common,
            policy,
            n,
            dump_paths,
        } => run::simulate(&common, policy, n, dump_paths),
        Command::Verify { common, check, n } => run::verify(&common, check, n),
        Command::Demo {
            which: Demo::Semigroup,
            t,
            tau,
            s,
            x,
            paths,
            steps,
            seed,
            out,
        } => run::demo_semigroup(t, tau, s, x, paths, steps, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mflq: {e}");
            ExitCode::from(e.code())
        }
    }
}

//! `energon`: energy estimation, budgeted projection and constrained training
//! from the command line.
//!
//! Exit codes: 0 success, 1 self-test failure, 2 bad input or configuration,
//! 3 infeasible budget, 4 training failure.

mod error;
mod estimate;
mod input;
mod knapsack;
mod project;
mod selftest;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use energon::energy::DramMode;
use energon::knapsack::Solver;
use energon::rational::{self, Rational};
use energon::trainer::Budget;
use energon_oracle::suites::Faults;
use num_traits::Zero;

use crate::error::{config, CliResult};

#[derive(Parser)]
#[command(
    name = "energon",
    version,
    about = "Energy-constrained sparse networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Greedy,
    Exact,
    Approx,
}

impl SolverArg {
    fn name(self) -> &'static str {
        match self {
            SolverArg::Greedy => "greedy",
            SolverArg::Exact => "exact",
            SolverArg::Approx => "approx",
        }
    }

    fn solver(self, epsilon: Option<Rational>) -> CliResult<Solver> {
        Ok(match self {
            SolverArg::Greedy => Solver::Greedy,
            SolverArg::Exact => Solver::Exact,
            SolverArg::Approx => {
                Solver::Approx(epsilon.ok_or_else(|| config("--solver approx requires --epsilon"))?)
            }
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    DenseUpperBound,
    ExactSparse,
}

impl From<ModeArg> for DramMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::DenseUpperBound => DramMode::DenseUpperBound,
            ModeArg::ExactSparse => DramMode::ExactSparse,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Alpha3,
}

fn positive_rational(s: &str) -> Result<Rational, String> {
    let v = rational::parse(s)?;
    if v <= Rational::zero() {
        return Err(format!("{s} is not positive"));
    }
    Ok(v)
}

#[derive(Subcommand)]
enum Command {
    /// Per-layer access counts and energies of a network as CSV.
    Estimate {
        /// JSON with `hardware`, `layers` and optional supports.
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a checkpoint's weights onto an energy budget.
    Project {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Absolute energy, or a percentage of the dense energy such as `50%`.
        #[arg(long)]
        budget: Budget,
        #[arg(long, value_enum, default_value_t = SolverArg::Greedy)]
        solver: SolverArg,
        /// Accuracy parameter of the approximation scheme, e.g. `1/100`.
        #[arg(long, value_parser = positive_rational)]
        epsilon: Option<Rational>,
        #[arg(long, value_enum, default_value_t = ModeArg::DenseUpperBound)]
        dram_mode: ModeArg,
        /// Where to write the projected checkpoint.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a knapsack instance given as JSON `{values, weights, capacity}`.
    Knapsack {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverArg::Greedy)]
        solver: SolverArg,
        #[arg(long, value_parser = positive_rational)]
        epsilon: Option<Rational>,
    },
    /// Dense training followed by energy-constrained training.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `train.budget`.
        #[arg(long)]
        budget: Option<Budget>,
        /// Overrides `train.solver`.
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        /// Overrides `train.epsilon`.
        #[arg(long, value_parser = positive_rational)]
        epsilon: Option<Rational>,
        /// Overrides `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the checkpoint, log, audit and mask images.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the bundled oracle suites and print a pass/fail table.
    Selftest {
        /// Smaller case counts.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Estimate { config, out } => estimate::run(&config, out.as_deref()),
        Command::Project {
            checkpoint,
            budget,
            solver,
            epsilon,
            dram_mode,
            out,
        } => project::run(
            &checkpoint,
            &budget,
            &solver.solver(epsilon)?,
            dram_mode.into(),
            &out,
        ),
        Command::Knapsack {
            config,
            solver,
            epsilon,
        } => knapsack::run(&config, &solver.solver(epsilon)?),
        Command::Train {
            config,
            budget,
            solver,
            epsilon,
            seed,
            out,
        } => {
            let ov = train::Overrides {
                budget: budget.map(|b| b.to_string()),
                solver: solver.map(SolverArg::name),
                epsilon: epsilon.map(|e| rational::format(&e)),
                seed,
            };
            train::execute(&config, &ov, &out)
        }
        Command::Selftest {
            quick,
            seed,
            inject_fault,
        } => selftest::run(
            quick,
            seed,
            Faults {
                alpha3: matches!(inject_fault, Some(FaultArg::Alpha3)),
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

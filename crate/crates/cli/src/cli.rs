//! Argument parsing and dispatch for the `dqtopo` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dqtopo_core::admm::Backend;
use serde::Serialize;

use crate::commands::{self, QuboOptions, RunOptions, SolverOptions};
use crate::CliResult;

#[derive(Parser)]
#[command(name = "dqtopo", version, about = "Consensus topology design with ADMM and imaginary-time evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop consensus with periodic topology updates.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// brute, exact-qite or varqite; overrides the config.
        #[arg(long)]
        backend: Option<Backend>,
        /// Qubit budget for the varqite backend.
        #[arg(long)]
        varqite_max_qubits: Option<usize>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// One topology snapshot solved by ADMM.
    SolveTopology {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Exact optimum by enumeration, compared against ADMM.
    EnumerateBaseline {
        #[arg(long)]
        instance: PathBuf,
        /// Report the optimum only.
        #[arg(long)]
        no_admm: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Minimises a QUBO file.
    QuboSolve {
        #[arg(long)]
        qubo: PathBuf,
        #[arg(long, default_value = "brute")]
        backend: Backend,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        varqite_max_qubits: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Summarises a run directory into plot-ready CSV.
    Report {
        #[arg(long)]
        trace_dir: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct SolverArgs {
    /// Closed-loop config supplying ADMM and QITE settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    varqite_max_qubits: Option<usize>,
}

impl From<SolverArgs> for SolverOptions {
    fn from(a: SolverArgs) -> Self {
        Self {
            config: a.config,
            backend: a.backend,
            seed: a.seed,
            varqite_max_qubits: a.varqite_max_qubits,
        }
    }
}

fn print<T: Serialize>(out: &mut dyn Write, value: CliResult<T>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(&value?)?;
    writeln!(out, "{text}").map_err(|e| crate::CliError::io(std::path::Path::new("<stdout>"), e))
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            backend,
            varqite_max_qubits,
            out_dir,
        } => print(out, commands::run(&RunOptions {
            config,
            seed,
            backend,
            varqite_max_qubits,
            out_dir,
        })),
        Command::SolveTopology { instance, solver, out_dir } => {
            print(out, commands::solve_topology(&instance, &solver.into(), out_dir.as_deref()))
        }
        Command::EnumerateBaseline { instance, no_admm, solver } => {
            print(out, commands::enumerate_baseline(&instance, !no_admm, &solver.into()))
        }
        Command::QuboSolve {
            qubo,
            backend,
            tau,
            steps,
            shots,
            top_k,
            reps,
            varqite_max_qubits,
            seed,
            out_dir,
        } => print(out, commands::qubo_solve(
            &qubo,
            &QuboOptions {
                backend: Some(backend),
                tau,
                steps,
                shots,
                top_k,
                reps,
                varqite_max_qubits,
                seed,
                out_dir,
            },
        )),
        Command::Report { trace_dir, out_dir } => print(out, commands::report(&trace_dir, out_dir.as_deref())),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 2 for malformed input, 3 when a size
/// budget is exceeded, 1 otherwise.
pub fn cli_main<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return e.exit_code() as u8;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ProblemSpec, ReferenceSpec, RunConfig, SolverSpec, SCHEMA_VERSION};
use crate::error::{BenchError, Result};
use crate::experiment::run_experiment;
use crate::plotdata::{aggregate, trace_files};
use crate::sweep::{parse_grid, run_sweep, SweepGrid};
use crate::trajectories::{run_dynamics, DynamicsMode};

#[derive(Debug, Parser)]
#[command(name = "fastkm-bench", version, about = "Fast-KM experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fast-KM over a grid of (alpha, sigma, eta).
    Sweep {
        /// Base configuration; defaults to the skew toy with d = 10, tau = 0.1.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `start:stop:count` or a comma list.
        #[arg(long, default_value = "0.5")]
        eta: String,
        #[arg(long, default_value = "4")]
        alpha: String,
        #[arg(long, default_value = "4")]
        sigma: String,
        /// Overrides the budget of the base config.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
        /// Run on the current thread only.
        #[arg(long)]
        serial: bool,
    },
    /// Integrate the second-order dynamics on the plane rotation.
    Dynamics {
        #[arg(long, value_enum)]
        mode: DynamicsMode,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Keep every n-th step.
        #[arg(long, default_value_t = 100)]
        stride: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Collect the trace CSVs of a directory into one long-format CSV.
    Plotdata {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Base config of `sweep` when none is given.
pub fn default_sweep_config() -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        seed: 0,
        output: PathBuf::from("out"),
        label: "skew".into(),
        thin: 1,
        problem: ProblemSpec::SkewToy { d: 10, tau: 0.1 },
        solver: SolverSpec::FastKm {
            alpha: 4.0,
            eta: Some(0.5),
            theta: None,
            sigma: 4.0,
            step: 1.0,
            iterations: 1000,
        },
        reference: ReferenceSpec::Auto,
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    // an unreadable config file is a configuration problem too
    RunConfig::from_path(path).map_err(|e| match e {
        BenchError::Io { path, source } => BenchError::Config(format!("{}: {source}", path.display())),
        other => other,
    })
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = load(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            let out = run_experiment(&cfg)?;
            for w in &out.metadata.warnings {
                log::warn!("{w}");
            }
            println!("{}", out.csv.display());
        }
        Command::Sweep {
            config,
            eta,
            alpha,
            sigma,
            iterations,
            output,
            label,
            serial,
        } => {
            let mut base = match &config {
                Some(p) => load(p)?,
                None => default_sweep_config(),
            };
            if let Some(o) = output {
                base.output = o;
            }
            if let Some(l) = label {
                base.label = l;
            }
            if let Some(n) = iterations {
                set_iterations(&mut base.solver, n);
            }
            let grid = SweepGrid {
                alphas: parse_grid(&alpha)?,
                sigmas: parse_grid(&sigma)?,
                etas: parse_grid(&eta)?,
            };
            let outs = run_sweep(&base, &grid, !serial)?;
            for o in &outs {
                println!("{}", o.csv.display());
            }
        }
        Command::Dynamics {
            mode,
            t_end,
            h,
            stride,
            output,
        } => {
            let n = run_dynamics(mode, t_end, h, stride, &output)?;
            log::info!("{n} samples");
            println!("{}", output.display());
        }
        Command::Plotdata { input, output } => {
            let files = trace_files(&input)?;
            let rows = aggregate(&files, &output)?;
            log::info!("{} traces, {rows} rows", files.len());
            println!("{}", output.display());
        }
    }
    Ok(())
}

fn set_iterations(solver: &mut SolverSpec, n: usize) {
    match solver {
        SolverSpec::Km { iterations, .. }
        | SolverSpec::FastKm { iterations, .. }
        | SolverSpec::Ohm { iterations }
        | SolverSpec::FastKmCooled { iterations, .. } => *iterations = n,
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

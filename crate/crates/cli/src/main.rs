//! `dpo`: derive normal modes, sweep the semiclassical probe response, solve
//! Lindblad steady states and write Wigner grids.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
//! 4 capacity exceeded, 1 anything else (I/O, internal).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpo_core::lindblad::TruncationStep;
use dpo_core::Error;

use config::{parse_range, Axis, SweepConfig};
use output::Run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("truncation did not converge (last dims {last_dims:?})")]
    Truncation {
        last_dims: (usize, usize),
        steps: Vec<TruncationStep>,
    },

    #[error("sweep failed: no grid point converged")]
    SweepFailed,

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Truncation { .. } | CliError::SweepFailed => 3,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                Error::InvalidParameter { .. }
                | Error::InvalidDimension(_)
                | Error::Domain(_)
                | Error::DegenerateModel(_) => 2,
                Error::SemiclassicalNoConvergence { .. }
                | Error::Numerical { .. }
                | Error::DegenerateSteadyState(_)
                | Error::TruncationNotConverged { .. } => 3,
                Error::Capacity(_) => 4,
                _ => 1,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "dpo", version, about = "Reduced optomechanical DPO model: normal modes, probe sweeps, steady states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run configuration (JSON), or a previous run's manifest.json.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps; overrides `solver.workers`.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normal-mode data, validity checks and cooling predictions.
    Derive {
        #[command(flatten)]
        common: Common,
    },
    /// Semiclassical probe response over a drive or detuning grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        /// START:STOP:COUNT
        #[arg(long)]
        range: Option<String>,
    },
    /// Lindblad steady state, moments and optional Wigner grids.
    Steady {
        #[command(flatten)]
        common: Common,
    },
    /// Steady state plus Wigner grids of both reduced states.
    Wigner {
        #[command(flatten)]
        common: Common,
    },
}

fn prepare(common: &Common, command: &'static str) -> Result<Run, CliError> {
    let (mut config, overrides) = config::load(&common.config)?;
    if let Some(dir) = &common.out {
        config.output.dir = dir.clone();
    }
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        config.solver.workers = w;
    }
    Run::new(command, config, overrides)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Derive { common } => {
            let mut run = prepare(&common, "derive")?;
            commands::derive(&mut run)?;
            finish(run)
        }
        Command::Sweep { common, axis, range } => {
            let mut run = prepare(&common, "sweep")?;
            let from_config = run.config().sweep.clone();
            let axis = axis
                .or(from_config.as_ref().map(|s| s.axis))
                .ok_or_else(|| CliError::Config("sweep axis missing: pass --axis or set `sweep.axis`".into()))?;
            let (start, stop, count) = match (&range, &from_config) {
                (Some(r), _) => parse_range(r).map_err(CliError::Config)?,
                (None, Some(s)) => (s.start, s.stop, s.count),
                (None, None) => {
                    return Err(CliError::Config("sweep range missing: pass --range or set `sweep`".into()))
                }
            };
            let spec = SweepConfig { axis, start, stop, count };
            spec.validate()?;
            // the manifest's config must reproduce the run without flags
            run.config_mut().sweep = Some(spec.clone());
            let converged = commands::sweep(&mut run, &spec)?;
            let out = finish(run);
            if converged == 0 {
                return Err(CliError::SweepFailed);
            }
            out
        }
        Command::Steady { common } => {
            let mut run = prepare(&common, "steady")?;
            commands::steady(&mut run, false)?;
            finish(run)
        }
        Command::Wigner { common } => {
            let mut run = prepare(&common, "wigner")?;
            commands::steady(&mut run, true)?;
            finish(run)
        }
    }
}

fn finish(run: Run) -> Result<(), CliError> {
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    let path = run.finish()?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Truncation { steps, .. } = &e {
                eprintln!("dims        tail_c      tail_b      trace_distance");
                for s in steps {
                    let td = s.trace_distance.map(|t| format!("{t:.3e}")).unwrap_or_else(|| "-".into());
                    eprintln!("{:<11} {:<11.3e} {:<11.3e} {td}", format!("{:?}", s.dims), s.tail_c, s.tail_b);
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}

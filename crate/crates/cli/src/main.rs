use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use homog_cli::{cmd_homogenize, cmd_solve, cmd_study, cmd_validate, exit_code, ConfigFile, Overrides, RunConfig};
use homog_cli::{CommandOutput, MaterialSource, StudyKind};
use homog_core::Result;

/// Periodic homogenization with FFT-accelerated solvers.
#[derive(Debug, Parser)]
#[command(name = "homog", version)]
struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Coefficient field as a voxel file (`name.json` + `name.bin`).
    #[arg(long, global = true)]
    material: Option<PathBuf>,

    /// Built-in family, e.g. `sine:3,2` or `checkerboard:1,100`.
    #[arg(long, global = true)]
    family: Option<String>,

    /// Grid shape, odd along every axis, e.g. `81,81`.
    #[arg(long, global = true, value_delimiter = ',')]
    grid: Option<Vec<usize>>,

    /// Half-periods of the cell, default 1 along every axis.
    #[arg(long, global = true, value_delimiter = ',')]
    half_periods: Option<Vec<f64>>,

    /// Mean applied gradient, e.g. `1,0`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    load: Option<Vec<f64>>,

    /// Solution method, default `cg`.
    #[arg(long, global = true, value_parser = ["cg", "neumann"])]
    solver: Option<String>,

    /// Relative stopping tolerance, default 1e-8.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Iteration cap, default 1000 (cg) or 100000 (neumann).
    #[arg(long, global = true)]
    max_iter: Option<usize>,

    /// Scalar reference medium `lambda I`.
    #[arg(long, global = true)]
    ref_lambda: Option<f64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a material and print its bounds and grid statistics.
    Validate,
    /// Solve one load case and write the fields and a summary.
    Solve,
    /// Compute the effective tensor from the unit load cases.
    Homogenize,
    /// Run a convergence, contrast or approximation study.
    Study {
        /// convergence | contrast | approximation
        kind: Option<String>,
    },
}

fn run(cli: Cli) -> (Result<CommandOutput>, Option<String>) {
    let file = match &cli.config {
        Some(p) => match ConfigFile::load(p) {
            Ok(f) => f,
            Err(e) => return (Err(e), None),
        },
        None => ConfigFile::default(),
    };
    let flags = Overrides {
        material: cli.material,
        family: cli.family,
        grid: cli.grid,
        half_periods: cli.half_periods,
        load: cli.load,
        solver: cli.solver,
        tol: cli.tol,
        max_iter: cli.max_iter,
        ref_lambda: cli.ref_lambda,
        out: cli.out,
    };
    let cfg = match RunConfig::resolve(file, flags) {
        Ok(c) => c,
        Err(e) => return (Err(e), None),
    };
    let context = match &cfg.material {
        Some(MaterialSource::Voxel(p)) => Some(p.display().to_string()),
        _ => None,
    };
    let result = match cli.command {
        Command::Validate => cmd_validate(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::Homogenize => cmd_homogenize(&cfg),
        Command::Study { kind } => match kind.as_deref().map(str::parse::<StudyKind>).transpose() {
            Ok(k) => cmd_study(&cfg, k),
            Err(e) => Err(e),
        },
    };
    (result, context)
}

fn main() -> ExitCode {
    let (result, context) = run(Cli::parse());
    match result {
        Ok(out) => {
            print!("{}", out.text);
            if out.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: solver did not converge, outputs are partial");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            match context {
                Some(c) if e.is_data_error() => eprintln!("error: {c}: {e}"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

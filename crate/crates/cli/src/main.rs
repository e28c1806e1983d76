//! Command-line front end: scenario ingestion, impedance export, channel
//! computation, parameter sweeps, and load optimization, with CSV/JSON
//! outputs.
//!
//! Every failure is reported as a single machine-parsable JSON error record
//! on stderr (`{"error":{"code":...,"message":...}}`); the exit status is 0
//! exactly when no error record was emitted.

mod channel_cmd;
mod common;
mod impedance_cmd;
mod optimize_cmd;
mod sweep_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use common::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "riswire",
    version,
    about = "Coupled-impedance channel simulator for wire-element surfaces",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Each can also be set through an
/// environment variable with the `RISWIRE_` prefix.
#[derive(Args, Debug, Clone)]
struct GlobalOpts {
    /// Scenario description (TOML).
    #[arg(long, global = true, env = "RISWIRE_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory; created if missing.
    #[arg(long, global = true, env = "RISWIRE_OUT", default_value = "out")]
    out: PathBuf,

    /// Worker thread budget (sweep points, multi-start runs, assembly).
    /// Defaults to the number of available cores.
    #[arg(long, global = true, env = "RISWIRE_JOBS")]
    jobs: Option<usize>,

    /// Seed for every randomized component (optimizer starts).
    #[arg(long, global = true, env = "RISWIRE_SEED", default_value_t = 0)]
    seed: u64,

    /// Relative tolerance for the impedance quadrature convergence check.
    #[arg(long, global = true, env = "RISWIRE_QUAD_TOL")]
    quad_tol: Option<f64>,

    /// Impedance cache directory. `impedance` defaults to `<out>/cache`;
    /// other commands only cache when this is set.
    #[arg(long, global = true, env = "RISWIRE_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble the nine coupled-impedance blocks and export them as CSV
    /// plus a JSON manifest (geometry hash, quadrature, timing, cache hit).
    Impedance,
    /// Compute the end-to-end channel by one or more methods and export
    /// the results as JSON and CSV.
    Channel(channel_cmd::ChannelOpts),
    /// Sweep one scenario parameter and record coupled vs coupling-unaware
    /// surface-path power per point, one CSV row per point.
    Sweep(sweep_cmd::SweepOpts),
    /// Optimize the surface load reactances and write a reproducible report.
    Optimize(optimize_cmd::OptimizeOpts),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        // Ignore the error if a pool already exists (tests call run twice).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    if let Some(tol) = cli.global.quad_tol {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(CliError::usage("--quad-tol must be a positive number"));
        }
    }
    std::fs::create_dir_all(&cli.global.out)
        .map_err(|e| CliError::io(format!("cannot create output directory: {e}")))?;

    let ctx = common::Context::new(&cli.global)?;
    match cli.command {
        Command::Impedance => impedance_cmd::run(&ctx),
        Command::Channel(opts) => channel_cmd::run(&ctx, &opts),
        Command::Sweep(opts) => sweep_cmd::run(&ctx, &opts),
        Command::Optimize(opts) => optimize_cmd::run(&ctx, &opts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            CliError::usage(e.to_string()).emit();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.emit();
            ExitCode::FAILURE
        }
    }
}

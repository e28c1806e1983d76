//! `optimize`: tune the surface load reactances for the configured scenario
//! and write a reproducible report (parameters, trajectory, final loads,
//! wall time, seed).

use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::Serialize;

use riswire::{Objective, OptimizationProblem, OptimizationResult};

use crate::common::{load_network, obtain_blocks, write_json, CliError, Context};

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ObjectiveArg {
    /// Power through the surface path (coupled).
    Vlos,
    /// Power of the full end-to-end channel.
    E2e,
}

#[derive(Args, Debug)]
pub struct OptimizeOpts {
    #[arg(long, value_enum, default_value = "vlos")]
    pub objective: ObjectiveArg,
    /// Fixed series resistance of every tunable load, ohms.
    #[arg(long, default_value_t = 1.0)]
    pub resistance: f64,
    /// Independent restarts; start 0 reuses the configured loads.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    /// Stop when the projected step falls below this many ohms.
    #[arg(long, default_value_t = 1e-6)]
    pub step_tolerance: f64,
}

#[derive(Serialize)]
struct Parameters {
    objective: &'static str,
    resistance_ohm: f64,
    n_starts: usize,
    max_iterations: usize,
    step_tolerance: f64,
    seed: u64,
}

#[derive(Serialize)]
struct Report {
    geometry_hash: String,
    parameters: Parameters,
    result: OptimizationResult,
    wall_ms: f64,
}

pub fn run(ctx: &Context, opts: &OptimizeOpts) -> Result<(), CliError> {
    if !(opts.resistance >= 0.0) || !opts.resistance.is_finite() {
        return Err(CliError::usage(
            "--resistance must be a finite non-negative number",
        ));
    }
    let n_ris = ctx.scenario.n_ris();
    if n_ris == 0 {
        return Err(CliError::usage(
            "optimize needs a scenario with at least one surface element",
        ));
    }

    let start = Instant::now();
    let outcome = obtain_blocks(&ctx.scenario, &ctx.quad, ctx.cache_dir.as_deref())?;
    let loads = load_network(ctx)?;

    let mut problem = OptimizationProblem::new(vec![opts.resistance; n_ris]);
    problem.objective = match opts.objective {
        ObjectiveArg::Vlos => Objective::VlosPower,
        ObjectiveArg::E2e => Objective::E2ePower,
    };
    problem.n_starts = opts.starts.max(1);
    problem.max_iterations = opts.max_iterations;
    problem.step_tolerance = opts.step_tolerance;
    problem.seed = ctx.seed;

    let result = riswire::optimize_ris_loads(&problem, &outcome.blocks, &loads)?;

    let report = Report {
        geometry_hash: outcome.key,
        parameters: Parameters {
            objective: match opts.objective {
                ObjectiveArg::Vlos => "vlos",
                ObjectiveArg::E2e => "e2e",
            },
            resistance_ohm: opts.resistance,
            n_starts: problem.n_starts,
            max_iterations: problem.max_iterations,
            step_tolerance: problem.step_tolerance,
            seed: problem.seed,
        },
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        result,
    };
    write_json(&ctx.out.join("optimize_report.json"), &report)?;
    println!(
        "optimized {n_ris} load(s): objective {:.6e} after {} iteration(s) (start {})",
        report.result.objective_value, report.result.iterations, report.result.start_index
    );
    Ok(())
}

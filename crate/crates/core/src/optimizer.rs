//! Tunable-load optimization: projected gradient ascent over the per-element
//! load reactances with fixed series resistances, multi-start from a seeded
//! RNG, and a backtracking line search that keeps the objective trajectory
//! monotone by construction.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{self, ChannelError};
use crate::impedance::ImpedanceBlocks;
use crate::loads::LoadNetwork;

/// Reactance box constraint, ohms.
pub const REACTANCE_MIN: f64 = -1000.0;
pub const REACTANCE_MAX: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("no RIS elements to optimize")]
    NoRisElements,
    #[error("load resistance {0} must be finite and non-negative")]
    BadResistance(f64),
    #[error("no feasible start: every initial point failed to evaluate; last error: {0}")]
    NoFeasibleStart(#[source] ChannelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// What the optimizer maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Objective {
    /// Squared Frobenius norm of the RIS-mediated term Z_RS Phi Z_ST.
    VlosPower,
    /// Squared Frobenius norm of the full end-to-end matrix.
    E2ePower,
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub objective: Objective,
    /// Fixed series resistance of each tunable load, ohms.
    pub resistances: Vec<f64>,
    pub max_iterations: usize,
    /// Stop when the projected gradient step falls below this, ohms.
    pub step_tolerance: f64,
    pub n_starts: usize,
    pub seed: u64,
}

impl OptimizationProblem {
    pub fn new(resistances: Vec<f64>) -> Self {
        Self {
            objective: Objective::VlosPower,
            resistances,
            max_iterations: 500,
            step_tolerance: 1e-6,
            n_starts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    /// Optimized reactances, ohms, inside the box constraint.
    pub reactances: Vec<f64>,
    /// Full optimized load impedances R + jX.
    pub loads: Vec<Complex64>,
    pub objective_value: f64,
    /// Objective after each accepted iterate of the winning start;
    /// non-decreasing by construction.
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    /// Which start won (0 = warm start from the incoming loads).
    pub start_index: usize,
    pub objective_evaluations: usize,
}

fn clamp(x: f64) -> f64 {
    x.clamp(REACTANCE_MIN, REACTANCE_MAX)
}

fn loads_from_reactances(
    base: &LoadNetwork,
    resistances: &[f64],
    x: &[f64],
) -> LoadNetwork {
    let z: Vec<Complex64> = resistances
        .iter()
        .zip(x.iter())
        .map(|(r, xi)| Complex64::new(*r, *xi))
        .collect();
    base.with_ris_loads(z)
}

/// Objective value at reactances `x`.
pub fn evaluate_objective(
    objective: Objective,
    blocks: &ImpedanceBlocks,
    base: &LoadNetwork,
    resistances: &[f64],
    x: &[f64],
) -> Result<f64, ChannelError> {
    let loads = loads_from_reactances(base, resistances, x);
    match objective {
        Objective::VlosPower => {
            let h = channel::vlos_decomposition(blocks, &loads, true)?;
            Ok(h.iter().map(|v| v.norm_sqr()).sum())
        }
        Objective::E2ePower => {
            let r = channel::e2e_closed_form(blocks, &loads)?;
            Ok(r.h_e2e.iter().map(|v| v.norm_sqr()).sum())
        }
    }
}

/// Analytic gradient of the RIS-mediated power objective with respect to the
/// load reactances. With A = Z_RS Phi and B = Phi Z_ST,
/// dH/dX_u = -j A[:,u] B[u,:], so
/// dF/dX_u = 2 Re(-j sum_{r,t} conj(H_rt) A_{ru} B_{ut}).
fn gradient_vlos(
    blocks: &ImpedanceBlocks,
    base: &LoadNetwork,
    resistances: &[f64],
    x: &[f64],
) -> Result<Vec<f64>, ChannelError> {
    let loads = loads_from_reactances(base, resistances, x);
    let phi = channel::ris_resolvent(blocks, &loads.z_ris)?;
    let a = &blocks.z_rs * &phi; // nr x ns
    let b = &phi * &blocks.z_st; // ns x nt
    let h = &a * &blocks.z_st; // H_VLOS = Z_RS Phi Z_ST
    let ns = x.len();
    let mut grad = vec![0.0; ns];
    let m = a.transpose() * h.map(|v| v.conj()); // ns x nt
    for u in 0..ns {
        let s: Complex64 = (0..b.ncols()).map(|t| m[(u, t)] * b[(u, t)]).sum();
        grad[u] = 2.0 * (-Complex64::i() * s).re;
    }
    Ok(grad)
}

/// Central-difference gradient, used for the end-to-end objective where the
/// dependence on the loads has no convenient low-rank structure.
fn gradient_finite_difference(
    objective: Objective,
    blocks: &ImpedanceBlocks,
    base: &LoadNetwork,
    resistances: &[f64],
    x: &[f64],
    evals: &mut usize,
) -> Result<Vec<f64>, ChannelError> {
    let h = 1e-4;
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for u in 0..x.len() {
        let x0 = x[u];
        probe[u] = x0 + h;
        let fp = evaluate_objective(objective, blocks, base, resistances, &probe)?;
        probe[u] = x0 - h;
        let fm = evaluate_objective(objective, blocks, base, resistances, &probe)?;
        probe[u] = x0;
        *evals += 2;
        grad[u] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Gradient of the objective with respect to the load reactances: analytic
/// for the RIS-mediated power objective, central differences for the
/// end-to-end objective.
pub fn objective_gradient(
    objective: Objective,
    blocks: &ImpedanceBlocks,
    base: &LoadNetwork,
    resistances: &[f64],
    x: &[f64],
) -> Result<Vec<f64>, ChannelError> {
    let mut evals = 0;
    gradient(objective, blocks, base, resistances, x, &mut evals)
}

fn gradient(
    objective: Objective,
    blocks: &ImpedanceBlocks,
    base: &LoadNetwork,
    resistances: &[f64],
    x: &[f64],
    evals: &mut usize,
) -> Result<Vec<f64>, ChannelError> {
    match objective {
        Objective::VlosPower => gradient_vlos(blocks, base, resistances, x),
        Objective::E2ePower => {
            gradient_finite_difference(objective, blocks, base, resistances, x, evals)
        }
    }
}

struct StartOutcome {
    result: OptimizationResult,
}

fn run_single_start(
    problem: &OptimizationProblem,
    blocks: &ImpedanceBlocks,
    base: &LoadNetwork,
    start_index: usize,
    mut x: Vec<f64>,
) -> Result<StartOutcome, ChannelError> {
    let res = &problem.resistances;
    let mut evals = 0usize;
    let mut f = evaluate_objective(problem.objective, blocks, base, res, &x)?;
    evals += 1;
    let mut trajectory = vec![f];
    let mut step = 1.0;
    let mut iterations = 0;

    for _ in 0..problem.max_iterations {
        iterations += 1;
        let g = gradient(problem.objective, blocks, base, res, &x, &mut evals)?;
        // projected-gradient stationarity measure
        let stat: f64 = x
            .iter()
            .zip(g.iter())
            .map(|(xi, gi)| (clamp(xi + gi) - xi).abs())
            .fold(0.0, f64::max);
        if stat < problem.step_tolerance {
            break;
        }
        // backtracking line search on the projected step
        let mut accepted = false;
        let mut t = step;
        for _ in 0..40 {
            let cand: Vec<f64> = x
                .iter()
                .zip(g.iter())
                .map(|(xi, gi)| clamp(xi + t * gi))
                .collect();
            let moved: f64 = cand
                .iter()
                .zip(x.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if moved == 0.0 {
                break;
            }
            let f_new = evaluate_objective(problem.objective, blocks, base, res, &cand)?;
            evals += 1;
            let ascent: f64 = cand
                .iter()
                .zip(x.iter())
                .zip(g.iter())
                .map(|((a, b), gi)| (a - b) * gi)
                .sum();
            if f_new >= f + 1e-4 * ascent && f_new > f {
                x = cand;
                f = f_new;
                trajectory.push(f);
                step = (t * 2.0).min(1e6);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let loads: Vec<Complex64> = res
        .iter()
        .zip(x.iter())
        .map(|(r, xi)| Complex64::new(*r, *xi))
        .collect();
    Ok(StartOutcome {
        result: OptimizationResult {
            reactances: x,
            loads,
            objective_value: f,
            trajectory,
            iterations,
            start_index,
            objective_evaluations: evals,
        },
    })
}

/// Runs `n_starts` independent projected gradient ascents (start 0 warm from
/// the loads already in `base`, the rest seeded uniform in the box) and
/// returns the best. Deterministic for a fixed seed.
pub fn optimize_ris_loads(
    problem: &OptimizationProblem,
    blocks: &ImpedanceBlocks,
    base: &LoadNetwork,
) -> Result<OptimizationResult, OptimizerError> {
    let ns = blocks.z_ss.nrows();
    if ns == 0 {
        return Err(OptimizerError::NoRisElements);
    }
    if problem.resistances.len() != ns {
        return Err(OptimizerError::BadResistance(f64::NAN));
    }
    for r in &problem.resistances {
        if !r.is_finite() || *r < 0.0 {
            return Err(OptimizerError::BadResistance(*r));
        }
    }

    let n_starts = problem.n_starts.max(1);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n_starts);
    starts.push(base.z_ris.iter().map(|z| clamp(z.im)).collect());
    for k in 1..n_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(problem.seed.wrapping_add(k as u64));
        starts.push(
            (0..ns)
                .map(|_| rng.gen_range(REACTANCE_MIN..=REACTANCE_MAX))
                .collect(),
        );
    }

    let outcomes: Vec<Result<StartOutcome, ChannelError>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(idx, x0)| run_single_start(problem, blocks, base, idx, x0))
        .collect();

    let mut best: Option<OptimizationResult> = None;
    let mut last_err: Option<ChannelError> = None;
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                let better = best
                    .as_ref()
                    .map(|b| o.result.objective_value > b.objective_value)
                    .unwrap_or(true);
                if better {
                    best = Some(o.result);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(r) => Ok(r),
        None => Err(OptimizerError::NoFeasibleStart(
            last_err.expect("at least one start must have run"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::test_fixtures::{synthetic_blocks, synthetic_loads};

    fn problem(ns: usize) -> OptimizationProblem {
        let mut p = OptimizationProblem::new(vec![1.0; ns]);
        p.n_starts = 4;
        p.seed = 42;
        p
    }

    #[test]
    fn analytic_gradient_matches_finite_difference() {
        let blocks = synthetic_blocks(2, 4, 2, 17);
        let base = synthetic_loads(2, 4, 2, 17);
        let res = vec![1.0; 4];
        let x = vec![30.0, -120.0, 5.0, 400.0];
        let analytic = gradient_vlos(&blocks, &base, &res, &x).unwrap();
        let mut evals = 0;
        let numeric = gradient_finite_difference(
            Objective::VlosPower,
            &blocks,
            &base,
            &res,
            &x,
            &mut evals,
        )
        .unwrap();
        let scale = numeric.iter().map(|v| v.abs()).fold(1e-12, f64::max);
        for (a, n) in analytic.iter().zip(numeric.iter()) {
            assert!(
                (a - n).abs() <= 1e-5 * scale,
                "analytic {a} vs numeric {n} (scale {scale})"
            );
        }
    }

    #[test]
    fn single_element_optimum_cancels_self_reactance() {
        // With one element, |H_VLOS|^2 = |Z_RS Z_ST|^2 / |Z_RIS + Z_SS|^2,
        // maximized when the load reactance cancels Im(Z_SS).
        let blocks = synthetic_blocks(1, 1, 1, 23);
        let base = synthetic_loads(1, 1, 1, 23);
        let mut p = problem(1);
        p.step_tolerance = 1e-9;
        p.max_iterations = 2000;
        let r = optimize_ris_loads(&p, &blocks, &base).unwrap();
        let expect = clamp(-blocks.z_ss[(0, 0)].im);
        assert!(
            (r.reactances[0] - expect).abs() < 1e-3,
            "got {}, want {}",
            r.reactances[0],
            expect
        );
    }

    #[test]
    fn trajectory_is_monotone_nondecreasing() {
        let blocks = synthetic_blocks(1, 6, 1, 29);
        let base = synthetic_loads(1, 6, 1, 29);
        let r = optimize_ris_loads(&problem(6), &blocks, &base).unwrap();
        for w in r.trajectory.windows(2) {
            assert!(w[1] >= w[0], "trajectory decreased: {} -> {}", w[0], w[1]);
        }
        assert_eq!(r.objective_value, *r.trajectory.last().unwrap());
    }

    #[test]
    fn optimized_beats_initial_loads() {
        let blocks = synthetic_blocks(1, 5, 1, 31);
        let base = synthetic_loads(1, 5, 1, 31);
        let res = vec![1.0; 5];
        let x0: Vec<f64> = base.z_ris.iter().map(|z| clamp(z.im)).collect();
        let f0 = evaluate_objective(Objective::VlosPower, &blocks, &base, &res, &x0).unwrap();
        let r = optimize_ris_loads(&problem(5), &blocks, &base).unwrap();
        assert!(r.objective_value >= f0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let blocks = synthetic_blocks(1, 3, 1, 37);
        let base = synthetic_loads(1, 3, 1, 37);
        let r1 = optimize_ris_loads(&problem(3), &blocks, &base).unwrap();
        let r2 = optimize_ris_loads(&problem(3), &blocks, &base).unwrap();
        assert_eq!(r1.reactances, r2.reactances);
        assert_eq!(r1.objective_value, r2.objective_value);
        assert_eq!(r1.start_index, r2.start_index);
    }

    #[test]
    fn result_respects_box_constraint() {
        let blocks = synthetic_blocks(1, 4, 1, 43);
        let base = synthetic_loads(1, 4, 1, 43);
        let r = optimize_ris_loads(&problem(4), &blocks, &base).unwrap();
        for x in &r.reactances {
            assert!((REACTANCE_MIN..=REACTANCE_MAX).contains(x));
        }
        for (z, res) in r.loads.iter().zip([1.0; 4]) {
            assert_eq!(z.re, res);
        }
    }

    #[test]
    fn e2e_objective_improves_too() {
        let blocks = synthetic_blocks(1, 3, 1, 47);
        let base = synthetic_loads(1, 3, 1, 47);
        let mut p = problem(3);
        p.objective = Objective::E2ePower;
        p.n_starts = 2;
        p.max_iterations = 60;
        let res = vec![1.0; 3];
        let x0: Vec<f64> = base.z_ris.iter().map(|z| clamp(z.im)).collect();
        let f0 = evaluate_objective(Objective::E2ePower, &blocks, &base, &res, &x0).unwrap();
        let r = optimize_ris_loads(&p, &blocks, &base).unwrap();
        assert!(r.objective_value >= f0);
        for w in r.trajectory.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn rejects_empty_and_bad_resistance() {
        let blocks = synthetic_blocks(1, 0, 1, 3);
        let base = synthetic_loads(1, 0, 1, 3);
        assert!(matches!(
            optimize_ris_loads(&problem(0), &blocks, &base),
            Err(OptimizerError::NoRisElements)
        ));
        let blocks = synthetic_blocks(1, 2, 1, 3);
        let base = synthetic_loads(1, 2, 1, 3);
        let mut p = problem(2);
        p.resistances = vec![1.0, -0.5];
        assert!(matches!(
            optimize_ris_loads(&p, &blocks, &base),
            Err(OptimizerError::BadResistance(_))
        ));
    }
}

//! Shared scenario builders for the benchmark suite.

use num_complex::Complex64;
use riswire::scenario::{ris_grid_positions, PhysicalConstants, Point3, Role, Scenario, WireElement};
use riswire::{ImpedanceBlocks, LoadNetwork};

/// Transmitter/grid/receiver deployment at 28 GHz with short wire elements.
pub fn grid_scenario(rows: usize, cols: usize, spacing_wavelengths: f64) -> Scenario {
    let constants = PhysicalConstants::from_frequency(28e9).unwrap();
    let lam = constants.wavelength;
    let l = lam / 32.0;
    let a = lam / 500.0;
    let scatterers = ris_grid_positions(
        Point3::new(0.0, 0.0, 0.0),
        rows,
        cols,
        spacing_wavelengths * lam,
    )
    .unwrap()
    .into_iter()
    .enumerate()
    .map(|(i, p)| WireElement::new(p, l, a, Role::Scatterer, i).unwrap())
    .collect();
    Scenario {
        constants,
        transmit: vec![
            WireElement::new(Point3::new(5.0, -5.0, 3.0), l, a, Role::Transmit, 0).unwrap(),
        ],
        scatterers,
        receive: vec![
            WireElement::new(Point3::new(5.0, 5.0, 1.0), l, a, Role::Receive, 0).unwrap(),
        ],
    }
}

/// Uniform series-RL loads matching the deployment.
pub fn grid_loads(scenario: &Scenario) -> LoadNetwork {
    let z_ris =
        riswire::loads::pin_series(1.0, 1e-9, scenario.constants.omega).unwrap();
    LoadNetwork {
        z_g: vec![Complex64::new(50.0, 0.0); scenario.n_transmit()],
        z_l: vec![Complex64::new(50.0, 0.0); scenario.n_receive()],
        z_ris: vec![z_ris; scenario.n_ris()],
        v_g: {
            let mut v = vec![Complex64::new(0.0, 0.0); scenario.n_transmit()];
            v[0] = Complex64::new(1.0, 0.0);
            v
        },
    }
}

/// Random symmetric diagonally dominant blocks for solver-only benchmarks.
pub fn random_blocks(nt: usize, ns: usize, nr: usize, seed: u64) -> ImpedanceBlocks {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = nt + ns + nr;
    let mut full = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = Complex64::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            full[(i, j)] = v;
            full[(j, i)] = v;
        }
        full[(i, i)] += Complex64::new(60.0 + rng.gen_range(0.0..20.0), 0.0);
    }
    ImpedanceBlocks::from_full(&full, nt, ns, nr)
}

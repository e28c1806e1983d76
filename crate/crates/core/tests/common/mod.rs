//! Shared oracle machinery for the integration and acceptance suites.
//!
//! Everything here is computed independently of the library's own quadrature
//! pipeline: the classical induced-EMF closed forms need only the sine and
//! cosine integrals, implemented from their power series and asymptotic
//! expansions.

#![allow(dead_code)]

use num_complex::Complex64;
use riswire::scenario::{PhysicalConstants, Point3, Role, Scenario, WireElement};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Sine integral Si(x) = int_0^x sin(t)/t dt.
pub fn sine_integral(x: f64) -> f64 {
    if x < 0.0 {
        return -sine_integral(-x);
    }
    if x <= 20.0 {
        // sum (-1)^n x^(2n+1) / ((2n+1) (2n+1)!)
        let mut term = x;
        let mut sum = x;
        for n in 1..120 {
            let k = 2 * n + 1;
            term *= -x * x / ((k - 1) as f64 * k as f64);
            let contrib = term / k as f64;
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs().max(1.0) {
                break;
            }
        }
        sum
    } else {
        let (f, g) = auxiliary_fg(x);
        std::f64::consts::FRAC_PI_2 - f * x.cos() - g * x.sin()
    }
}

/// Cosine integral Ci(x) = gamma + ln x + int_0^x (cos t - 1)/t dt, x > 0.
pub fn cosine_integral(x: f64) -> f64 {
    assert!(x > 0.0, "Ci is defined here for positive arguments");
    if x <= 20.0 {
        // gamma + ln x + sum (-1)^n x^(2n) / (2n (2n)!)
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 1..120 {
            let k = 2 * n;
            term *= -x * x / ((k - 1) as f64 * k as f64);
            let contrib = term / k as f64;
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs().max(1.0) {
                break;
            }
        }
        EULER_GAMMA + x.ln() + sum
    } else {
        let (f, g) = auxiliary_fg(x);
        f * x.sin() - g * x.cos()
    }
}

/// Asymptotic auxiliary functions: f(x) ~ (1/x) sum (-1)^k (2k)!/x^{2k},
/// g(x) ~ (1/x^2) sum (-1)^k (2k+1)!/x^{2k}; truncated at the smallest term.
fn auxiliary_fg(x: f64) -> (f64, f64) {
    let x2 = x * x;
    let mut f = 0.0;
    let mut g = 0.0;
    let mut num_f: f64 = 1.0; // (2k)!
    let mut num_g = 1.0; // (2k+1)!
    let mut pow: f64 = 1.0; // x^{2k}
    let mut last_f = f64::INFINITY;
    for k in 0..40 {
        let tf = num_f / pow;
        if tf.abs() > last_f {
            break; // divergent tail reached
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        f += sign * tf;
        g += sign * num_g / pow;
        last_f = tf.abs();
        let a = (2 * k + 1) as f64;
        let b = (2 * k + 2) as f64;
        let c = (2 * k + 3) as f64;
        num_f *= a * b;
        num_g *= b * c;
        pow *= x2;
    }
    (f / x, g / x2)
}

/// Free-space wave impedance from the CODATA constants, duplicated here so
/// the oracle does not depend on the library's own derivation.
pub fn free_space_impedance() -> f64 {
    let mu0: f64 = 1.256_637_062_12e-6;
    let eps0 = 8.854_187_812_8e-12;
    (mu0 / eps0).sqrt()
}

/// Induced-EMF self impedance of a center-fed half-wave dipole with
/// sinusoidal current, referenced to the feed (= current maximum).
pub fn half_wave_self_impedance() -> Complex64 {
    let eta = free_space_impedance();
    let pi = std::f64::consts::PI;
    let two_pi = 2.0 * pi;
    let r = (eta / two_pi)
        * (EULER_GAMMA + pi.ln() - cosine_integral(pi)
            - 0.5 * (EULER_GAMMA + (pi / 2.0).ln() + cosine_integral(two_pi)
                - 2.0 * cosine_integral(pi)));
    let x = (eta / (4.0 * pi)) * sine_integral(two_pi);
    Complex64::new(r, x)
}

/// Induced-EMF mutual impedance of two parallel side-by-side half-wave
/// dipoles with center separation `d_over_lambda` wavelengths.
pub fn side_by_side_half_wave_mutual(d_over_lambda: f64) -> Complex64 {
    let eta = free_space_impedance();
    let pi = std::f64::consts::PI;
    let k = 2.0 * pi; // per wavelength
    let d = d_over_lambda;
    let l = 0.5;
    let u0 = k * d;
    let u1 = k * ((d * d + l * l).sqrt() + l);
    let u2 = k * ((d * d + l * l).sqrt() - l);
    let r = (eta / (4.0 * pi))
        * (2.0 * cosine_integral(u0) - cosine_integral(u1) - cosine_integral(u2));
    let x = -(eta / (4.0 * pi))
        * (2.0 * sine_integral(u0) - sine_integral(u1) - sine_integral(u2));
    Complex64::new(r, x)
}

/// Reference operating point used throughout the acceptance suite.
pub fn constants_28ghz() -> PhysicalConstants {
    PhysicalConstants::from_frequency(28e9).unwrap()
}

pub fn wire(
    x: f64,
    y: f64,
    z: f64,
    length: f64,
    radius: f64,
    role: Role,
    index: usize,
) -> WireElement {
    WireElement::new(Point3::new(x, y, z), length, radius, role, index).unwrap()
}

/// The reference deployment: transmitter at (5, -5, 3) m, receiver at
/// (5, 5, 1) m, a rows x cols element grid centered at the origin, all
/// elements lambda/32 long with radius lambda/500.
pub fn reference_deployment(rows: usize, cols: usize, spacing: f64) -> Scenario {
    let c = constants_28ghz();
    let lam = c.wavelength;
    let l = lam / 32.0;
    let a = lam / 500.0;
    let scatterers: Vec<WireElement> = riswire::scenario::ris_grid_positions(
        Point3::new(0.0, 0.0, 0.0),
        rows,
        cols,
        spacing,
    )
    .unwrap()
    .into_iter()
    .enumerate()
    .map(|(i, p)| WireElement::new(p, l, a, Role::Scatterer, i).unwrap())
    .collect();
    Scenario {
        constants: c,
        transmit: vec![wire(5.0, -5.0, 3.0, l, a, Role::Transmit, 0)],
        scatterers,
        receive: vec![wire(5.0, 5.0, 1.0, l, a, Role::Receive, 0)],
    }
}

/// Random symmetric impedance blocks with diagonally dominant self terms,
/// standing in for physically assembled matrices where only the algebra is
/// under test.
pub fn synthetic_blocks(
    nt: usize,
    ns: usize,
    nr: usize,
    seed: u64,
) -> riswire::ImpedanceBlocks {
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
        full[(i, i)] +=
            Complex64::new(60.0 + rng.gen_range(0.0..20.0), rng.gen_range(-30.0..30.0));
    }
    riswire::ImpedanceBlocks::from_full(&full, nt, ns, nr)
}

pub fn synthetic_loads(nt: usize, ns: usize, nr: usize, seed: u64) -> riswire::LoadNetwork {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut v_g = vec![Complex64::new(0.0, 0.0); nt];
    if nt > 0 {
        v_g[0] = Complex64::new(1.0, 0.0);
    }
    riswire::LoadNetwork {
        z_g: (0..nt)
            .map(|_| Complex64::new(rng.gen_range(20.0..80.0), rng.gen_range(-10.0..10.0)))
            .collect(),
        z_l: (0..nr)
            .map(|_| Complex64::new(rng.gen_range(20.0..80.0), rng.gen_range(-10.0..10.0)))
            .collect(),
        z_ris: (0..ns)
            .map(|_| Complex64::new(rng.gen_range(0.5..5.0), rng.gen_range(-50.0..200.0)))
            .collect(),
        v_g,
    }
}

/// Uniform series-RL tunable loads (1 ohm, 1 nH) matching the reference
/// operating point.
pub fn reference_loads(n_ris: usize, omega: f64) -> riswire::LoadNetwork {
    let z_ris = riswire::loads::pin_series(1.0, 1e-9, omega).unwrap();
    riswire::LoadNetwork {
        z_g: vec![Complex64::new(50.0, 0.0)],
        z_l: vec![Complex64::new(50.0, 0.0)],
        z_ris: vec![z_ris; n_ris],
        v_g: vec![Complex64::new(1.0, 0.0)],
    }
}

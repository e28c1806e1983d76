//! Self and mutual impedances of thin-wire elements, and assembly of the
//! nine-block impedance matrix of the coupled transmitter/RIS/receiver
//! system.
//!
//! The production path is the double quadrature of the impedance kernel over
//! both wire spans. A second, independent path integrates the radiated field
//! over the observing wire's surface line and is kept solely for
//! cross-validation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::kernels::{
    check_not_resonant, distance, field_factor_of, green_of_r, on_axis, radiated_field_z,
    KernelError,
};
use crate::quadrature::{
    integrate_adaptive, panels_graded, panels_uniform, refine, split_at, GlRule, QuadError,
    QuadratureSpec,
};
use crate::scenario::{PhysicalConstants, Point3, Role, Scenario, WireElement};

#[derive(Debug, Error)]
pub enum ImpedanceError {
    #[error("impedance quadrature failed for element pair ({p}, {q}): {source}")]
    PairFailed {
        /// Flat indices in transmitter, RIS, receiver order.
        p: usize,
        q: usize,
        source: QuadError,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// One computed impedance entry with its quadrature diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct MutualImpedance {
    /// Value in ohms.
    pub value: Complex64,
    /// (p, q) indices the caller passed in (element group indices).
    pub pair: (usize, usize),
    /// Total panel count (outer x mean inner) at the accepted level.
    pub panels: usize,
    /// Last refinement change, an estimate of the remaining error (ohm).
    pub est_error: f64,
}

/// Mutual impedance between elements `p` (source) and `q` (observer) by
/// direct double quadrature of the impedance kernel. `p == q` gives the self
/// impedance. The value depends only on the geometry, never on port currents.
pub fn mutual_impedance(
    p: &WireElement,
    q: &WireElement,
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
) -> Result<MutualImpedance, ImpedanceError> {
    quad.validate()?;
    let k0 = constants.k0;
    let denom_p = check_not_resonant(p, k0)?;
    let denom_q = check_not_resonant(q, k0)?;
    let lambda = constants.wavelength;
    let rule = GlRule::get(quad.base_order);

    let obs_probe = Point3::new(q.position.x, q.position.y, q.position.z);
    let same_axis = on_axis(&obs_probe, p, lambda);
    let near_w = quad.near_panel_width.unwrap_or(p.radius);

    let (q_lo, q_hi) = q.span();
    let (p_lo, p_hi) = p.span();
    let outer_width = (lambda / 8.0).min(q.length / 4.0);
    let inner_width = (lambda / 8.0).min(p.length / 4.0);

    let coeff = Complex64::new(0.0, constants.eta0 / (4.0 * std::f64::consts::PI * k0));

    let eval_level = |level: usize| -> (Complex64, usize) {
        // Pin panel edges to the current-profile kinks at the feeds; the
        // integrand is continuous but not smooth there.
        let mut outer_panels = split_at(panels_uniform(q_lo, q_hi, outer_width), q.position.z);
        for _ in 0..level {
            outer_panels = refine(&outer_panels);
        }
        let mut total_panels = outer_panels.len();
        let mut sum = Complex64::new(0.0, 0.0);
        for &(a, b) in &outer_panels {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let zq = mid + half * x;
                let profile_q = (k0 * (0.5 * q.length - (zq - q.position.z).abs())).sin() / denom_q;
                let obs = Point3::new(q.position.x, q.position.y, zq);
                let mut inner_panels = split_at(
                    if same_axis {
                        panels_graded(p_lo, p_hi, zq, 10.0 * near_w, near_w, inner_width)
                    } else {
                        panels_uniform(p_lo, p_hi, inner_width)
                    },
                    p.position.z,
                );
                for _ in 0..level {
                    inner_panels = refine(&inner_panels);
                }
                total_panels += inner_panels.len();
                let mut inner = Complex64::new(0.0, 0.0);
                for &(ia, ib) in &inner_panels {
                    let imid = 0.5 * (ia + ib);
                    let ihalf = 0.5 * (ib - ia);
                    let mut panel_sum = Complex64::new(0.0, 0.0);
                    for (ix, iw) in rule.nodes.iter().zip(rule.weights.iter()) {
                        let zp = imid + ihalf * ix;
                        let profile_p =
                            (k0 * (0.5 * p.length - (zp - p.position.z).abs())).sin() / denom_p;
                        let r = distance(&obs, p, zp, lambda);
                        panel_sum +=
                            field_factor_of(zq - zp, r, k0) * green_of_r(r, k0) * profile_p * *iw;
                    }
                    inner += panel_sum * ihalf;
                }
                sum += inner * profile_q * *w * half;
            }
        }
        (coeff * sum, total_panels)
    };

    let (mut prev, _) = eval_level(0);
    let mut last_change = f64::INFINITY;
    for level in 1..=quad.max_subdivisions {
        let (next, panels) = eval_level(level);
        let scale = next.norm().max(f64::MIN_POSITIVE);
        last_change = (next - prev).norm();
        if last_change <= quad.rel_tol * scale {
            return Ok(MutualImpedance {
                value: next,
                pair: (p.index, q.index),
                panels,
                est_error: last_change,
            });
        }
        prev = next;
    }
    Err(ImpedanceError::PairFailed {
        p: p.index,
        q: q.index,
        source: QuadError::NoConvergence {
            max_subdivisions: quad.max_subdivisions,
            last_change,
            tolerance: quad.rel_tol,
        },
    })
}

/// Independent cross-validation path: outer quadrature of the radiated field
/// of `p` over `q`'s surface line. Agrees with [`mutual_impedance`] to the
/// combined quadrature tolerances; kept as a distinct code path on purpose.
pub fn mutual_impedance_field_oracle(
    p: &WireElement,
    q: &WireElement,
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
) -> Result<MutualImpedance, ImpedanceError> {
    mutual_impedance_field_oracle_with_currents(
        p,
        q,
        constants,
        quad,
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
    )
}

/// Field-path impedance with explicit internal port currents. The result is
/// independent of the current magnitudes (the definition normalizes them
/// out); a test asserts exactly that.
pub fn mutual_impedance_field_oracle_with_currents(
    p: &WireElement,
    q: &WireElement,
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
    current_p: Complex64,
    current_q: Complex64,
) -> Result<MutualImpedance, ImpedanceError> {
    quad.validate()?;
    let k0 = constants.k0;
    let denom_q = check_not_resonant(q, k0)?;
    check_not_resonant(p, k0)?;
    let (q_lo, q_hi) = q.span();
    let outer_width = (constants.wavelength / 8.0).min(q.length / 4.0);
    // Same-axis pairs: the observed field has structure on the scale of the
    // wire radius near the source wire's ends, so grade the outer panels
    // toward both ends (splitting at the feed to isolate the profile kink).
    let same_axis =
        p.position.transverse_distance(&q.position) <= 1e-12 * constants.wavelength;
    let panels = if same_axis {
        let w = quad.near_panel_width.unwrap_or(p.radius);
        let mid = q.position.z;
        let mut left = panels_graded(q_lo, mid, q_lo, 10.0 * w, w, outer_width);
        left.extend(panels_graded(mid, q_hi, q_hi, 10.0 * w, w, outer_width));
        left
    } else {
        panels_uniform(q_lo, q_hi, outer_width)
    };
    let mut field_error: Option<KernelError> = None;
    let result = integrate_adaptive(panels, quad, |zq| {
        let obs = Point3::new(q.position.x, q.position.y, zq);
        match radiated_field_z(&obs, p, current_p, constants, quad) {
            Ok(e_field) => {
                let i_q =
                    current_q * (k0 * (0.5 * q.length - (zq - q.position.z).abs())).sin() / denom_q;
                e_field * i_q
            }
            Err(err) => {
                field_error.get_or_insert(err);
                Complex64::new(0.0, 0.0)
            }
        }
    });
    if let Some(err) = field_error {
        return Err(err.into());
    }
    let result = result.map_err(|source| ImpedanceError::PairFailed {
        p: p.index,
        q: q.index,
        source,
    })?;
    Ok(MutualImpedance {
        value: -result.value / (current_p * current_q),
        pair: (p.index, q.index),
        panels: result.panels,
        est_error: result.est_error / (current_p * current_q).norm(),
    })
}

/// The nine block matrices of the coupled system, ohms. Row/column order is
/// transmitter, RIS, receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceBlocks {
    pub z_tt: DMatrix<Complex64>,
    pub z_ts: DMatrix<Complex64>,
    pub z_tr: DMatrix<Complex64>,
    pub z_st: DMatrix<Complex64>,
    pub z_ss: DMatrix<Complex64>,
    pub z_sr: DMatrix<Complex64>,
    pub z_rt: DMatrix<Complex64>,
    pub z_rs: DMatrix<Complex64>,
    pub z_rr: DMatrix<Complex64>,
}

impl ImpedanceBlocks {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.z_tt.nrows(), self.z_ss.nrows(), self.z_rr.nrows())
    }

    /// Assembles the full (N_t + N_ris + N_r)^2 system matrix.
    pub fn full_matrix(&self) -> DMatrix<Complex64> {
        let (nt, ns, nr) = self.dims();
        let n = nt + ns + nr;
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((0, 0), (nt, nt)).copy_from(&self.z_tt);
        full.view_mut((0, nt), (nt, ns)).copy_from(&self.z_ts);
        full.view_mut((0, nt + ns), (nt, nr)).copy_from(&self.z_tr);
        full.view_mut((nt, 0), (ns, nt)).copy_from(&self.z_st);
        full.view_mut((nt, nt), (ns, ns)).copy_from(&self.z_ss);
        full.view_mut((nt, nt + ns), (ns, nr)).copy_from(&self.z_sr);
        full.view_mut((nt + ns, 0), (nr, nt)).copy_from(&self.z_rt);
        full.view_mut((nt + ns, nt), (nr, ns)).copy_from(&self.z_rs);
        full.view_mut((nt + ns, nt + ns), (nr, nr)).copy_from(&self.z_rr);
        full
    }

    pub fn from_full(full: &DMatrix<Complex64>, nt: usize, ns: usize, nr: usize) -> Self {
        assert_eq!(full.nrows(), nt + ns + nr);
        assert_eq!(full.ncols(), nt + ns + nr);
        Self {
            z_tt: full.view((0, 0), (nt, nt)).into_owned(),
            z_ts: full.view((0, nt), (nt, ns)).into_owned(),
            z_tr: full.view((0, nt + ns), (nt, nr)).into_owned(),
            z_st: full.view((nt, 0), (ns, nt)).into_owned(),
            z_ss: full.view((nt, nt), (ns, ns)).into_owned(),
            z_sr: full.view((nt, nt + ns), (ns, nr)).into_owned(),
            z_rt: full.view((nt + ns, 0), (nr, nt)).into_owned(),
            z_rs: full.view((nt + ns, nt), (nr, ns)).into_owned(),
            z_rr: full.view((nt + ns, nt + ns), (nr, nr)).into_owned(),
        }
    }

    /// Largest |Z_ij - Z_ji| over the full system matrix.
    pub fn max_asymmetry(&self) -> f64 {
        let full = self.full_matrix();
        let n = full.nrows();
        let mut max = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                max = max.max((full[(i, j)] - full[(j, i)]).norm());
            }
        }
        max
    }
}

/// Geometry displacement class used to deduplicate quadrature work during
/// assembly. Mutual impedance is invariant under rigid translation and under
/// flipping the axial offset, so pairs sharing (transverse distance, |dz|,
/// lengths, radii) share one computation. Coordinates are quantized at
/// 1e-10 wavelengths, far below any quadrature tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct PairClass {
    rho: i64,
    dz: i64,
    l_p: i64,
    a_p: i64,
    l_q: i64,
    a_q: i64,
}

impl PairClass {
    fn quantum(lambda: f64) -> f64 {
        1e-10 * lambda
    }

    /// Canonical class for the unordered pair; off-axis the kernel is
    /// symmetric in (p, q) so the endpoints are sorted.
    fn of(p: &WireElement, q: &WireElement, lambda: f64) -> Self {
        let qm = Self::quantum(lambda);
        let quant = |v: f64| (v / qm).round() as i64;
        let rho = quant(p.position.transverse_distance(&q.position));
        let dz = quant((p.position.z - q.position.z).abs());
        let mut ends = [(quant(p.length), quant(p.radius)), (quant(q.length), quant(q.radius))];
        ends.sort_unstable();
        Self {
            rho,
            dz,
            l_p: ends[0].0,
            a_p: ends[0].1,
            l_q: ends[1].0,
            a_q: ends[1].1,
        }
    }

    /// Reconstructs a canonical geometry for the class: p at the origin,
    /// q at (rho, 0, dz).
    fn geometry(&self, lambda: f64) -> (WireElement, WireElement) {
        let qm = Self::quantum(lambda);
        let p = WireElement {
            position: Point3::new(0.0, 0.0, 0.0),
            length: self.l_p as f64 * qm,
            radius: self.a_p as f64 * qm,
            role: Role::Transmit,
            index: 0,
        };
        let q = WireElement {
            position: Point3::new(self.rho as f64 * qm, 0.0, self.dz as f64 * qm),
            length: self.l_q as f64 * qm,
            radius: self.a_q as f64 * qm,
            role: Role::Receive,
            index: 1,
        };
        (p, q)
    }
}

/// Assembly diagnostics.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct AssemblyReport {
    /// Lower-triangle pairs filled (including the diagonal).
    pub pairs: usize,
    /// Distinct displacement classes actually integrated.
    pub classes: usize,
    /// Largest per-class quadrature error estimate (ohm).
    pub max_est_error: f64,
}

/// Computes the full coupled impedance matrix for a scenario and slices it
/// into the nine blocks. Only the lower triangle is integrated; the upper is
/// mirrored (reciprocity). Deterministic regardless of worker count: every
/// class is integrated from its canonical geometry.
pub fn assemble_impedance_blocks(
    scenario: &Scenario,
    quad: &QuadratureSpec,
) -> Result<(ImpedanceBlocks, AssemblyReport), ImpedanceError> {
    let elements: Vec<&WireElement> = scenario.elements().collect();
    let n = elements.len();
    let lambda = scenario.constants.wavelength;

    // Group lower-triangle pairs by displacement class, deterministically.
    let mut classes: BTreeMap<PairClass, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..n {
        for j in 0..=i {
            let class = PairClass::of(elements[i], elements[j], lambda);
            classes.entry(class).or_default().push((i, j));
        }
    }

    let class_list: Vec<(&PairClass, &Vec<(usize, usize)>)> = classes.iter().collect();
    let computed: Vec<Result<MutualImpedance, ImpedanceError>> = class_list
        .par_iter()
        .map(|(class, members)| {
            let (p, q) = class.geometry(lambda);
            mutual_impedance(&p, &q, &scenario.constants, quad).map_err(|e| match e {
                ImpedanceError::PairFailed { source, .. } => {
                    let (i, j) = members[0];
                    ImpedanceError::PairFailed { p: i, q: j, source }
                }
                other => other,
            })
        })
        .collect();

    let mut full = DMatrix::zeros(n, n);
    let mut report = AssemblyReport::default();
    report.classes = class_list.len();
    for ((_, members), result) in class_list.iter().zip(computed) {
        let z = result?;
        report.max_est_error = report.max_est_error.max(z.est_error);
        for &(i, j) in members.iter() {
            report.pairs += 1;
            full[(i, j)] = z.value;
            full[(j, i)] = z.value;
        }
    }

    let nt = scenario.n_transmit();
    let ns = scenario.n_ris();
    let nr = scenario.n_receive();
    Ok((ImpedanceBlocks::from_full(&full, nt, ns, nr), report))
}

/// Symmetrizes the full system matrix by averaging with its transpose and
/// reports the largest asymmetry removed. Assembly already mirrors, so this
/// is a no-op on its own output.
pub fn enforce_reciprocity(blocks: &ImpedanceBlocks) -> (ImpedanceBlocks, f64) {
    let full = blocks.full_matrix();
    let max_asym = blocks.max_asymmetry();
    let sym = (&full + full.transpose()) * Complex64::new(0.5, 0.0);
    let (nt, ns, nr) = blocks.dims();
    (ImpedanceBlocks::from_full(&sym, nt, ns, nr), max_asym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Role;
    use approx::assert_relative_eq;

    fn constants() -> PhysicalConstants {
        PhysicalConstants::from_frequency(28e9).unwrap()
    }

    fn wire(x: f64, y: f64, z: f64, l: f64, a: f64) -> WireElement {
        WireElement::new(Point3::new(x, y, z), l, a, Role::Transmit, 0).unwrap()
    }

    #[test]
    fn self_impedance_positive_radiation_resistance() {
        // sign regression for the kernel coefficient +j eta0/(4 pi k0)
        let c = constants();
        let lam = c.wavelength;
        let e = wire(0.0, 0.0, 0.0, lam / 2.0, lam / 500.0);
        let z = mutual_impedance(&e, &e, &c, &QuadratureSpec::default()).unwrap();
        assert!(z.value.re > 0.0, "radiation resistance must be positive, got {}", z.value);
        assert!(z.value.re > 60.0 && z.value.re < 90.0);
    }

    #[test]
    fn short_dipole_self_impedance_is_capacitive() {
        let c = constants();
        let lam = c.wavelength;
        let e = wire(0.0, 0.0, 0.0, lam / 32.0, lam / 500.0);
        let z = mutual_impedance(&e, &e, &c, &QuadratureSpec::default()).unwrap();
        assert!(z.value.re > 0.0);
        assert!(z.value.im < 0.0, "short dipole must be capacitive, got {}", z.value);
    }

    #[test]
    fn reciprocity_on_swap() {
        let c = constants();
        let lam = c.wavelength;
        let p = wire(0.0, 0.0, 0.0, lam / 2.0, lam / 500.0);
        let q = wire(0.3 * lam, 0.4 * lam, 0.2 * lam, lam / 3.0, lam / 400.0);
        let quad = QuadratureSpec::default();
        let zqp = mutual_impedance(&p, &q, &c, &quad).unwrap();
        let zpq = mutual_impedance(&q, &p, &c, &quad).unwrap();
        assert!((zqp.value - zpq.value).norm() <= 1e-10 * zqp.value.norm());
    }

    #[test]
    fn translation_invariance() {
        let c = constants();
        let lam = c.wavelength;
        let quad = QuadratureSpec::default();
        let p = wire(0.0, 0.0, 0.0, lam / 4.0, lam / 500.0);
        let q = wire(lam, 0.0, 0.0, lam / 4.0, lam / 500.0);
        let z1 = mutual_impedance(&p, &q, &c, &quad).unwrap();
        let shift = |e: &WireElement| {
            let mut e = *e;
            e.position = Point3::new(e.position.x + 2.7, e.position.y - 1.1, e.position.z + 0.4);
            e
        };
        let z2 = mutual_impedance(&shift(&p), &shift(&q), &c, &quad).unwrap();
        assert!((z1.value - z2.value).norm() <= 1e-7 * z1.value.norm());
    }

    #[test]
    fn halving_tolerance_within_error_estimate() {
        let c = constants();
        let lam = c.wavelength;
        let p = wire(0.0, 0.0, 0.0, lam / 2.0, lam / 500.0);
        let q = wire(lam / 2.0, 0.0, 0.0, lam / 2.0, lam / 500.0);
        let quad = QuadratureSpec::default();
        let z1 = mutual_impedance(&p, &q, &c, &quad).unwrap();
        let tighter = QuadratureSpec {
            rel_tol: quad.rel_tol / 2.0,
            ..quad
        };
        let z2 = mutual_impedance(&p, &q, &c, &tighter).unwrap();
        assert!((z1.value - z2.value).norm() <= z1.est_error.max(1e-14));
    }

    #[test]
    fn field_oracle_current_scaling_invariance() {
        let c = constants();
        let lam = c.wavelength;
        let p = wire(0.0, 0.0, 0.0, lam / 4.0, lam / 500.0);
        let q = wire(lam / 2.0, 0.0, 0.0, lam / 4.0, lam / 500.0);
        let quad = QuadratureSpec::default();
        let unit = mutual_impedance_field_oracle(&p, &q, &c, &quad).unwrap();
        let scaled = mutual_impedance_field_oracle_with_currents(
            &p,
            &q,
            &c,
            &quad,
            Complex64::new(0.3, -1.9),
            Complex64::new(-2.4, 0.8),
        )
        .unwrap();
        assert!((unit.value - scaled.value).norm() <= 1e-10 * unit.value.norm());
    }

    #[test]
    fn dual_paths_agree_separated_pair() {
        let c = constants();
        let lam = c.wavelength;
        let p = wire(0.0, 0.0, 0.0, lam / 32.0, lam / 500.0);
        let q = wire(lam / 4.0, 0.0, 0.0, lam / 32.0, lam / 500.0);
        let quad = QuadratureSpec::default();
        let direct = mutual_impedance(&p, &q, &c, &quad).unwrap();
        let oracle = mutual_impedance_field_oracle(&p, &q, &c, &quad).unwrap();
        assert!(
            (direct.value - oracle.value).norm() <= 1e-6 * direct.value.norm(),
            "direct {} vs field path {}",
            direct.value,
            oracle.value
        );
    }

    #[test]
    fn dual_paths_agree_self_term() {
        let c = constants();
        let lam = c.wavelength;
        let e = wire(0.0, 0.0, 0.0, lam / 32.0, lam / 500.0);
        let quad = QuadratureSpec::default();
        let direct = mutual_impedance(&e, &e, &c, &quad).unwrap();
        let oracle = mutual_impedance_field_oracle(&e, &e, &c, &quad).unwrap();
        assert!(
            (direct.value - oracle.value).norm() <= 1e-6 * direct.value.norm(),
            "direct {} vs field path {}",
            direct.value,
            oracle.value
        );
    }

    fn grid_scenario(nt: usize, rows: usize, cols: usize, nr: usize) -> Scenario {
        let c = constants();
        let lam = c.wavelength;
        let l = lam / 32.0;
        let a = lam / 500.0;
        let mk = |x: f64, y: f64, z: f64, role, i| {
            WireElement::new(Point3::new(x, y, z), l, a, role, i).unwrap()
        };
        let mut scatterers = Vec::new();
        for (i, p) in
            crate::scenario::ris_grid_positions(Point3::new(0.0, 0.0, 0.0), rows, cols, lam / 8.0)
                .unwrap()
                .into_iter()
                .enumerate()
        {
            scatterers.push(WireElement::new(p, l, a, Role::Scatterer, i).unwrap());
        }
        Scenario {
            constants: c,
            transmit: (0..nt).map(|i| mk(1.0, -1.0 + i as f64 * 0.01, 0.3, Role::Transmit, i)).collect(),
            scatterers,
            receive: (0..nr).map(|i| mk(1.0, 1.0 + i as f64 * 0.01, 0.1, Role::Receive, i)).collect(),
        }
    }

    #[test]
    fn single_element_assembly() {
        let c = constants();
        let lam = c.wavelength;
        let s = Scenario {
            constants: c,
            transmit: vec![wire(0.0, 0.0, 0.0, lam / 2.0, lam / 500.0)],
            scatterers: vec![],
            receive: vec![],
        };
        let (blocks, report) = assemble_impedance_blocks(&s, &QuadratureSpec::default()).unwrap();
        assert_eq!(blocks.z_tt.nrows(), 1);
        assert_eq!(report.pairs, 1);
        let self_z = mutual_impedance(&s.transmit[0], &s.transmit[0], &c, &QuadratureSpec::default())
            .unwrap();
        assert!((blocks.z_tt[(0, 0)] - self_z.value).norm() <= 1e-9 * self_z.value.norm());
    }

    #[test]
    fn three_element_assembly_matches_pairwise() {
        let s = grid_scenario(1, 1, 1, 1);
        let quad = QuadratureSpec::default();
        let (blocks, _) = assemble_impedance_blocks(&s, &quad).unwrap();
        let full = blocks.full_matrix();
        assert_eq!(full.nrows(), 3);
        assert!(blocks.max_asymmetry() == 0.0);
        let els: Vec<&WireElement> = s.elements().collect();
        for i in 0..3 {
            for j in 0..3 {
                let z = mutual_impedance(els[i], els[j], &s.constants, &quad).unwrap();
                assert!(
                    (full[(i, j)] - z.value).norm() <= 1e-7 * z.value.norm(),
                    "entry ({i},{j}): assembled {} vs pairwise {}",
                    full[(i, j)],
                    z.value
                );
            }
        }
    }

    #[test]
    fn assembly_deterministic_and_class_deduplicated() {
        let s = grid_scenario(1, 3, 3, 1);
        let quad = QuadratureSpec::default();
        let (b1, r1) = assemble_impedance_blocks(&s, &quad).unwrap();
        let (b2, _) = assemble_impedance_blocks(&s, &quad).unwrap();
        assert_eq!(b1, b2);
        // 11 elements -> 66 lower-triangle pairs, far fewer distinct classes
        assert_eq!(r1.pairs, 66);
        assert!(r1.classes < r1.pairs, "classes {} pairs {}", r1.classes, r1.pairs);
    }

    #[test]
    fn permuting_ris_order_permutes_z_ss() {
        let mut s = grid_scenario(0, 2, 2, 0);
        let quad = QuadratureSpec::default();
        let (b1, _) = assemble_impedance_blocks(&s, &quad).unwrap();
        s.scatterers.swap(1, 3);
        let (b2, _) = assemble_impedance_blocks(&s, &quad).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let pi = if i == 1 { 3 } else if i == 3 { 1 } else { i };
                let pj = if j == 1 { 3 } else if j == 3 { 1 } else { j };
                assert_eq!(b1.z_ss[(i, j)], b2.z_ss[(pi, pj)]);
            }
        }
    }

    #[test]
    fn enforce_reciprocity_reports_and_fixes() {
        let s = grid_scenario(1, 1, 1, 1);
        let (blocks, _) = assemble_impedance_blocks(&s, &QuadratureSpec::default()).unwrap();
        // already symmetric: no-op
        let (sym, removed) = enforce_reciprocity(&blocks);
        assert_eq!(removed, 0.0);
        assert_eq!(sym, blocks);
        // perturb one entry
        let mut perturbed = blocks.clone();
        let eps = Complex64::new(1e-3, 0.0);
        perturbed.z_ts[(0, 0)] += eps;
        let (fixed, removed) = enforce_reciprocity(&perturbed);
        assert_relative_eq!(removed, 1e-3, max_relative = 1e-9);
        assert!(fixed.max_asymmetry() < 1e-15);
    }
}

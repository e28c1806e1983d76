//! The coupled port network: direct linear-system solve for all port
//! voltages and currents, the block closed form for the end-to-end channel,
//! the far-field SISO scalar form, LOS/VLOS decompositions, and channel
//! metrics.
//!
//! The direct solver is the source of truth. The closed form is accepted
//! because it matches the direct solve on randomized instances, not because
//! of its printed derivation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::impedance::ImpedanceBlocks;
use crate::loads::LoadNetwork;

/// Condition-number ceiling for the coupled system; beyond this the solve is
/// reported as failed rather than returning noise.
pub const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("ill-conditioned system in {name}: condition estimate {cond:.3e} exceeds {max:.0e}")]
    IllConditioned {
        name: &'static str,
        cond: f64,
        max: f64,
    },
    #[error("dimension mismatch: blocks are ({bt}, {bs}, {br}) but loads are ({lt}, {ls}, {lr})")]
    DimensionMismatch {
        bt: usize,
        bs: usize,
        br: usize,
        lt: usize,
        ls: usize,
        lr: usize,
    },
    #[error("{op} requires N_t = N_r = 1, got N_t = {nt}, N_r = {nr}")]
    NotSiso {
        op: &'static str,
        nt: usize,
        nr: usize,
    },
}

/// All port voltages and currents of one excitation, with solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct PortSolution {
    pub v_t: Vec<Complex64>,
    pub i_t: Vec<Complex64>,
    pub v_s: Vec<Complex64>,
    pub i_s: Vec<Complex64>,
    pub v_l: Vec<Complex64>,
    pub i_l: Vec<Complex64>,
    /// Relative residual of the solved linear system.
    pub residual: f64,
    /// One-norm condition estimate of the solved system.
    pub condition: f64,
}

/// Solved linear system wrapper keeping the factorization for reuse.
struct FactoredSystem {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    matrix: DMatrix<Complex64>,
    condition: f64,
}

impl FactoredSystem {
    /// Factors `a` and estimates its one-norm condition number. `a` must be
    /// symmetric (the coupled impedance system always is), which lets the
    /// transpose solves in the estimator reuse the same factorization.
    fn new(a: DMatrix<Complex64>, name: &'static str) -> Result<Self, ChannelError> {
        let n = a.nrows();
        let lu = a.clone().lu();
        if n == 0 {
            return Ok(Self {
                lu,
                matrix: a,
                condition: 1.0,
            });
        }
        let probe = lu
            .solve(&DVector::from_element(n, Complex64::new(1.0, 0.0)))
            .ok_or(ChannelError::Singular(name))?;
        if probe.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(ChannelError::Singular(name));
        }
        let norm_a = one_norm(&a);
        let inv_norm = hager_inverse_norm(&lu, n).ok_or(ChannelError::Singular(name))?;
        let condition = norm_a * inv_norm;
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(ChannelError::IllConditioned {
                name,
                cond: condition,
                max: MAX_CONDITION,
            });
        }
        Ok(Self {
            lu,
            matrix: a,
            condition,
        })
    }

    fn solve(&self, b: &DVector<Complex64>, name: &'static str) -> Result<DVector<Complex64>, ChannelError> {
        self.lu.solve(b).ok_or(ChannelError::Singular(name))
    }

    fn residual(&self, x: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
        let r = &self.matrix * x - b;
        let nb = b.norm();
        if nb == 0.0 {
            r.norm()
        } else {
            r.norm() / nb
        }
    }
}

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager's one-norm estimator for ||A^-1||_1, valid for symmetric A.
fn hager_inverse_norm(
    lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
) -> Option<f64> {
    let mut x = DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x)?;
        let new_estimate: f64 = y.iter().map(|v| v.norm()).sum();
        let xi = y.map(|v| {
            let m = v.norm();
            if m == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                v / m
            }
        });
        let z = lu.solve(&xi)?;
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
        let zx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        if new_estimate <= estimate || zmax <= zx.abs() {
            estimate = estimate.max(new_estimate);
            break;
        }
        estimate = new_estimate;
        x = DVector::from_element(n, Complex64::new(0.0, 0.0));
        x[j] = Complex64::new(1.0, 0.0);
    }
    Some(estimate.max(f64::MIN_POSITIVE))
}

fn check_dims(blocks: &ImpedanceBlocks, loads: &LoadNetwork) -> Result<(), ChannelError> {
    let (bt, bs, br) = blocks.dims();
    if loads.z_g.len() != bt
        || loads.z_ris.len() != bs
        || loads.z_l.len() != br
        || loads.v_g.len() != bt
    {
        return Err(ChannelError::DimensionMismatch {
            bt,
            bs,
            br,
            lt: loads.z_g.len(),
            ls: loads.z_ris.len(),
            lr: loads.z_l.len(),
        });
    }
    Ok(())
}

fn coupled_system(blocks: &ImpedanceBlocks, loads: &LoadNetwork) -> DMatrix<Complex64> {
    let mut a = blocks.full_matrix();
    let (nt, ns, _) = blocks.dims();
    for (k, z) in loads.z_g.iter().enumerate() {
        a[(k, k)] += z;
    }
    for (k, z) in loads.z_ris.iter().enumerate() {
        a[(nt + k, nt + k)] += z;
    }
    for (k, z) in loads.z_l.iter().enumerate() {
        a[(nt + ns + k, nt + ns + k)] += z;
    }
    a
}

fn extract_solution(
    blocks: &ImpedanceBlocks,
    system: &FactoredSystem,
    v_g: &[Complex64],
) -> Result<PortSolution, ChannelError> {
    let (nt, ns, nr) = blocks.dims();
    let n = nt + ns + nr;
    let mut b = DVector::zeros(n);
    for (k, v) in v_g.iter().enumerate() {
        b[k] = *v;
    }
    let currents = system.solve(&b, "coupled port system")?;
    let residual = system.residual(&currents, &b);

    let voltages = blocks.full_matrix() * &currents;
    let slice = |v: &DVector<Complex64>, lo: usize, len: usize| v.rows(lo, len).iter().copied().collect::<Vec<_>>();
    Ok(PortSolution {
        i_t: slice(&currents, 0, nt),
        i_s: slice(&currents, nt, ns),
        i_l: slice(&currents, nt + ns, nr),
        v_t: slice(&voltages, 0, nt),
        v_s: slice(&voltages, nt, ns),
        v_l: slice(&voltages, nt + ns, nr),
        residual,
        condition: system.condition,
    })
}

/// Substitutes the three port constraints into V = Z I and solves
/// (Z + diag(Z_G, Z_RIS, Z_L)) I = [V_G; 0; 0] for all currents, then
/// recovers the voltages.
pub fn solve_ports_direct(
    blocks: &ImpedanceBlocks,
    loads: &LoadNetwork,
) -> Result<PortSolution, ChannelError> {
    check_dims(blocks, loads)?;
    let system = FactoredSystem::new(coupled_system(blocks, loads), "coupled port system")?;
    extract_solution(blocks, &system, &loads.v_g)
}

/// Max residual of the two-element constitutive equations
/// V_p = Z_pp I_p + Z_pq I_q, V_q = Z_qp I_p + Z_qq I_q against the given
/// port state. Executable embodiment of the two-antenna lemmas.
pub fn pair_constitutive_check(
    z: &DMatrix<Complex64>,
    v: [Complex64; 2],
    i: [Complex64; 2],
) -> f64 {
    assert_eq!((z.nrows(), z.ncols()), (2, 2), "pair check needs a 2x2 system");
    let r0 = v[0] - (z[(0, 0)] * i[0] + z[(0, 1)] * i[1]);
    let r1 = v[1] - (z[(1, 0)] * i[0] + z[(1, 1)] * i[1]);
    r0.norm().max(r1.norm())
}

/// Port group tags of the block system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupTag {
    Transmit,
    Scatterer,
    Receive,
}

fn block<'a>(blocks: &'a ImpedanceBlocks, x: GroupTag, y: GroupTag) -> &'a DMatrix<Complex64> {
    use GroupTag::*;
    match (x, y) {
        (Transmit, Transmit) => &blocks.z_tt,
        (Transmit, Scatterer) => &blocks.z_ts,
        (Transmit, Receive) => &blocks.z_tr,
        (Scatterer, Transmit) => &blocks.z_st,
        (Scatterer, Scatterer) => &blocks.z_ss,
        (Scatterer, Receive) => &blocks.z_sr,
        (Receive, Transmit) => &blocks.z_rt,
        (Receive, Scatterer) => &blocks.z_rs,
        (Receive, Receive) => &blocks.z_rr,
    }
}

/// The RIS reflection resolvent Phi = (Z_RIS + Z_SS)^-1.
pub fn ris_resolvent(
    blocks: &ImpedanceBlocks,
    z_ris: &[Complex64],
) -> Result<DMatrix<Complex64>, ChannelError> {
    let ns = blocks.z_ss.nrows();
    assert_eq!(z_ris.len(), ns);
    let mut m = blocks.z_ss.clone();
    for (k, z) in z_ris.iter().enumerate() {
        m[(k, k)] += z;
    }
    m.try_inverse().ok_or(ChannelError::Singular("Z_RIS + Z_SS"))
}

/// Coupling kernel P_XSY = Z_XY - Z_XS (Z_RIS + Z_SS)^-1 Z_SY. With no RIS
/// elements this is just Z_XY.
pub fn coupling_kernel_p(
    x: GroupTag,
    y: GroupTag,
    blocks: &ImpedanceBlocks,
    z_ris: &[Complex64],
) -> Result<DMatrix<Complex64>, ChannelError> {
    let z_xy = block(blocks, x, y).clone();
    if blocks.z_ss.nrows() == 0 {
        return Ok(z_xy);
    }
    let phi = ris_resolvent(blocks, z_ris)?;
    let z_xs = block(blocks, x, GroupTag::Scatterer);
    let z_sy = block(blocks, GroupTag::Scatterer, y);
    Ok(z_xy - z_xs * phi * z_sy)
}

/// The RIS-mediated channel term Z_RS (Z_RIS + Z_SS)^-1 Z_ST. With
/// `coupling = false` the off-diagonal of Z_SS is dropped first, the
/// mutual-coupling-unaware model.
pub fn vlos_decomposition(
    blocks: &ImpedanceBlocks,
    loads: &LoadNetwork,
    coupling: bool,
) -> Result<DMatrix<Complex64>, ChannelError> {
    let (nt, ns, nr) = blocks.dims();
    if ns == 0 {
        return Ok(DMatrix::zeros(nr, nt));
    }
    let phi = if coupling {
        ris_resolvent(blocks, &loads.z_ris)?
    } else {
        let mut diag = DMatrix::zeros(ns, ns);
        for k in 0..ns {
            diag[(k, k)] = blocks.z_ss[(k, k)] + loads.z_ris[k];
        }
        diag.try_inverse()
            .ok_or(ChannelError::Singular("diag(Z_RIS + Z_SS)"))?
    };
    Ok(&blocks.z_rs * phi * &blocks.z_st)
}

/// End-to-end channel and its decompositions.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelResult {
    /// N_r x N_t map from generator voltages to receiver load voltages.
    pub h_e2e: DMatrix<Complex64>,
    /// Direct transmitter-receiver impedance term Z_RT.
    pub h_los: DMatrix<Complex64>,
    /// RIS-mediated term Z_RS Phi Z_ST.
    pub h_vlos: DMatrix<Complex64>,
    /// Coupling-unaware variant (diagonal Z_SS).
    pub h_vlos_no_coupling: DMatrix<Complex64>,
    /// The resolvent Phi = (Z_RIS + Z_SS)^-1.
    pub phi: DMatrix<Complex64>,
    /// Far-field SISO front factor; only set by the far-field path.
    pub y0: Option<Complex64>,
    pub metrics: ChannelMetrics,
    /// Condition estimate of the underlying solve (direct path only).
    pub condition: Option<f64>,
}

fn decorate(
    blocks: &ImpedanceBlocks,
    loads: &LoadNetwork,
    h_e2e: DMatrix<Complex64>,
    y0: Option<Complex64>,
    condition: Option<f64>,
) -> Result<ChannelResult, ChannelError> {
    let ns = blocks.z_ss.nrows();
    let phi = if ns == 0 {
        DMatrix::zeros(0, 0)
    } else {
        ris_resolvent(blocks, &loads.z_ris)?
    };
    let h_vlos = vlos_decomposition(blocks, loads, true)?;
    let h_vlos_no_coupling = vlos_decomposition(blocks, loads, false)?;
    let metrics = channel_metrics(&h_e2e);
    Ok(ChannelResult {
        h_los: blocks.z_rt.clone(),
        h_vlos,
        h_vlos_no_coupling,
        phi,
        y0,
        metrics,
        condition,
        h_e2e,
    })
}

/// H_E2E column by column from N_t direct solves with unit-basis generator
/// voltages. The factorization is shared across columns.
pub fn e2e_matrix_direct(
    blocks: &ImpedanceBlocks,
    loads: &LoadNetwork,
) -> Result<ChannelResult, ChannelError> {
    check_dims(blocks, loads)?;
    let (nt, _, nr) = blocks.dims();
    let system = FactoredSystem::new(coupled_system(blocks, loads), "coupled port system")?;
    let mut h = DMatrix::zeros(nr, nt);
    for t in 0..nt {
        let mut v_g = vec![Complex64::new(0.0, 0.0); nt];
        v_g[t] = Complex64::new(1.0, 0.0);
        let sol = extract_solution(blocks, &system, &v_g)?;
        for r in 0..nr {
            // V_L = -Z_L I_L
            h[(r, t)] = -loads.z_l[r] * sol.i_l[r];
        }
    }
    decorate(blocks, loads, h, None, Some(system.condition))
}

/// Block closed form
/// H_E2E = (I + P_RSR Z_L^-1 - P_RST P_GTST^-1 P_TSR Z_L^-1)^-1 P_RST P_GTST^-1.
/// Every inverse failure is reported by name.
pub fn e2e_closed_form(
    blocks: &ImpedanceBlocks,
    loads: &LoadNetwork,
) -> Result<ChannelResult, ChannelError> {
    check_dims(blocks, loads)?;
    let (_, _, nr) = blocks.dims();
    use GroupTag::*;
    let p_tst = coupling_kernel_p(Transmit, Transmit, blocks, &loads.z_ris)?;
    let p_rst = coupling_kernel_p(Receive, Transmit, blocks, &loads.z_ris)?;
    let p_tsr = coupling_kernel_p(Transmit, Receive, blocks, &loads.z_ris)?;
    let p_rsr = coupling_kernel_p(Receive, Receive, blocks, &loads.z_ris)?;

    let mut p_gtst = p_tst;
    for (k, z) in loads.z_g.iter().enumerate() {
        p_gtst[(k, k)] += z;
    }
    let p_gtst_inv = p_gtst.try_inverse().ok_or(ChannelError::Singular("P_GTST"))?;

    let mut z_l_inv = DMatrix::zeros(nr, nr);
    for (k, z) in loads.z_l.iter().enumerate() {
        if *z == Complex64::new(0.0, 0.0) {
            return Err(ChannelError::Singular("Z_L"));
        }
        z_l_inv[(k, k)] = z.inv();
    }

    let rhs = &p_rst * &p_gtst_inv;
    let bracket = DMatrix::identity(nr, nr) + &p_rsr * &z_l_inv - &rhs * &p_tsr * &z_l_inv;
    let bracket_inv = bracket
        .try_inverse()
        .ok_or(ChannelError::Singular("closed-form outer bracket"))?;
    let h = bracket_inv * rhs;
    decorate(blocks, loads, h, None, None)
}

/// Far-field SISO scalar form
/// H_E2E = Y_0 (Z_RT - Z_RS Phi Z_ST), Y_0 = Z_L / ((Z_L + Z_RR)(Z_G + Z_TT)).
pub fn far_field_siso(
    blocks: &ImpedanceBlocks,
    loads: &LoadNetwork,
) -> Result<ChannelResult, ChannelError> {
    check_dims(blocks, loads)?;
    let (nt, _, nr) = blocks.dims();
    if nt != 1 || nr != 1 {
        return Err(ChannelError::NotSiso {
            op: "far-field scalar form",
            nt,
            nr,
        });
    }
    let z_g = loads.z_g[0];
    let z_l = loads.z_l[0];
    let z_tt = blocks.z_tt[(0, 0)];
    let z_rr = blocks.z_rr[(0, 0)];
    let z_rt = blocks.z_rt[(0, 0)];
    let denom = (z_l + z_rr) * (z_g + z_tt);
    if denom.norm() == 0.0 {
        return Err(ChannelError::Singular("(Z_L + Z_RR)(Z_G + Z_TT)"));
    }
    let y0 = z_l / denom;
    let h_vlos = vlos_decomposition(blocks, loads, true)?;
    let h = DMatrix::from_element(1, 1, y0 * (z_rt - h_vlos[(0, 0)]));
    decorate(blocks, loads, h, Some(y0), None)
}

/// Singular values, numerical rank, Frobenius norm, and per-entry received
/// power proxy |H|^2.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelMetrics {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Count of singular values above 1e-10 relative to the largest.
    pub rank: usize,
    pub frobenius: f64,
    pub power: DMatrix<f64>,
}

pub fn channel_metrics(h: &DMatrix<Complex64>) -> ChannelMetrics {
    let mut singular_values: Vec<f64> = if h.nrows() == 0 || h.ncols() == 0 {
        Vec::new()
    } else {
        h.clone().svd(false, false).singular_values.iter().copied().collect()
    };
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max = singular_values.first().copied().unwrap_or(0.0);
    let rank = if max == 0.0 {
        0
    } else {
        singular_values.iter().filter(|s| **s > 1e-10 * max).count()
    };
    let frobenius = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let power = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)].norm_sqr());
    ChannelMetrics {
        singular_values,
        rank,
        frobenius,
        power,
    }
}

//! Circuit models for the generator, receiver, and RIS port terminations.
//!
//! RIS loads follow the PIN-diode models: series R + jwL for forward bias,
//! a parallel RC branch in series with L for reverse bias, or explicit
//! per-element complex impedances.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{RisLoadMode, ScenarioConfig};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("RIS load entry {index} has negative resistance {resistance}")]
    NegativeResistance { index: usize, resistance: f64 },
    #[error("PIN diode parameters must be nonnegative (R={r}, L={l}, C={c})")]
    NegativeCircuitParam { r: f64, l: f64, c: f64 },
    #[error("degenerate parallel branch: need R > 0 or C > 0")]
    DegenerateParallelBranch,
    #[error("angular frequency must be positive, got {0}")]
    NonPositiveOmega(f64),
    #[error("{group} has {elements} elements but {values} {field} values")]
    CountMismatch {
        group: &'static str,
        field: &'static str,
        elements: usize,
        values: usize,
    },
    #[error("[ris.load] mode {0:?} is missing field {1}")]
    MissingField(RisLoadMode, &'static str),
    #[error("[ris.load] override index {0} out of range ({1} elements)")]
    OverrideOutOfRange(usize, usize),
}

/// PIN diode circuit parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinDiodeParams {
    pub resistance: f64,
    pub inductance: f64,
    /// Unused in forward bias.
    pub capacitance: f64,
    pub bias: PinBias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinBias {
    Forward,
    Reverse,
}

impl PinDiodeParams {
    pub fn impedance(&self, omega: f64) -> Result<Complex64, LoadError> {
        if self.resistance < 0.0 || self.inductance < 0.0 || self.capacitance < 0.0 {
            return Err(LoadError::NegativeCircuitParam {
                r: self.resistance,
                l: self.inductance,
                c: self.capacitance,
            });
        }
        match self.bias {
            PinBias::Forward => pin_series(self.resistance, self.inductance, omega),
            PinBias::Reverse => {
                pin_parallel(self.resistance, self.capacitance, self.inductance, omega)
            }
        }
    }
}

/// Forward-bias PIN impedance R + jwL.
pub fn pin_series(r: f64, l: f64, omega: f64) -> Result<Complex64, LoadError> {
    if !(omega > 0.0) {
        return Err(LoadError::NonPositiveOmega(omega));
    }
    if r < 0.0 || l < 0.0 {
        return Err(LoadError::NegativeCircuitParam { r, l, c: 0.0 });
    }
    Ok(Complex64::new(r, omega * l))
}

/// Reverse-bias PIN impedance (1/R + jwC)^-1 + jwL. `R = inf` with `C > 0`
/// gives the ideal series LC limit.
pub fn pin_parallel(r: f64, c: f64, l: f64, omega: f64) -> Result<Complex64, LoadError> {
    if !(omega > 0.0) {
        return Err(LoadError::NonPositiveOmega(omega));
    }
    if (r < 0.0 && !r.is_infinite()) || l < 0.0 || c < 0.0 {
        return Err(LoadError::NegativeCircuitParam { r, l, c });
    }
    if !(r > 0.0) && !(c > 0.0) {
        return Err(LoadError::DegenerateParallelBranch);
    }
    let branch_admittance = Complex64::new(if r.is_infinite() { 0.0 } else { 1.0 / r }, omega * c);
    Ok(branch_admittance.inv() + Complex64::new(0.0, omega * l))
}

/// Builds the diagonal RIS load matrix from per-element impedances, rejecting
/// active (negative-resistance) entries. Off-diagonal entries are exactly
/// zero.
pub fn build_ris_load_matrix(entries: &[Complex64]) -> Result<DMatrix<Complex64>, LoadError> {
    for (index, z) in entries.iter().enumerate() {
        if z.re < 0.0 {
            return Err(LoadError::NegativeResistance {
                index,
                resistance: z.re,
            });
        }
    }
    let n = entries.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, z) in entries.iter().enumerate() {
        m[(i, i)] = *z;
    }
    Ok(m)
}

/// Port terminations and excitation of the whole system: generator impedances
/// Z_G, receiver loads Z_L, RIS tunable loads Z_RIS (all diagonal, stored as
/// their diagonals), and source voltages V_G.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadNetwork {
    pub z_g: Vec<Complex64>,
    pub z_l: Vec<Complex64>,
    pub z_ris: Vec<Complex64>,
    pub v_g: Vec<Complex64>,
}

impl LoadNetwork {
    pub fn z_ris_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.z_ris.clone()))
    }

    pub fn with_ris_loads(&self, z_ris: Vec<Complex64>) -> Self {
        Self {
            z_ris,
            ..self.clone()
        }
    }
}

fn pair_to_complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn per_port(
    group: &'static str,
    field: &'static str,
    n: usize,
    shared: Option<[f64; 2]>,
    per: &Option<Vec<[f64; 2]>>,
    default: Complex64,
) -> Result<Vec<Complex64>, LoadError> {
    if let Some(values) = per {
        if values.len() != n {
            return Err(LoadError::CountMismatch {
                group,
                field,
                elements: n,
                values: values.len(),
            });
        }
        return Ok(values.iter().copied().map(pair_to_complex).collect());
    }
    let z = shared.map(pair_to_complex).unwrap_or(default);
    Ok(vec![z; n])
}

/// Builds the load network from a config against an already-built scenario.
/// V_G defaults to 1 V on transmit port 0 and 0 elsewhere.
pub fn build_load_network(
    config: &ScenarioConfig,
    scenario: &Scenario,
) -> Result<LoadNetwork, LoadError> {
    let omega = scenario.constants.omega;
    let default_z = Complex64::new(50.0, 0.0);

    let nt = scenario.n_transmit();
    let (z_g, v_g) = if let Some(tx) = &config.transmitter {
        let z_g = per_port(
            "transmitter",
            "generator impedance",
            nt,
            tx.generator_impedance,
            &tx.generator_impedances,
            default_z,
        )?;
        let v_g = match &tx.voltages {
            Some(v) => {
                if v.len() != nt {
                    return Err(LoadError::CountMismatch {
                        group: "transmitter",
                        field: "voltage",
                        elements: nt,
                        values: v.len(),
                    });
                }
                v.iter().copied().map(pair_to_complex).collect()
            }
            None => {
                let mut v = vec![Complex64::new(0.0, 0.0); nt];
                if nt > 0 {
                    v[0] = Complex64::new(1.0, 0.0);
                }
                v
            }
        };
        (z_g, v_g)
    } else {
        (Vec::new(), Vec::new())
    };

    let nr = scenario.n_receive();
    let z_l = if let Some(rx) = &config.receiver {
        per_port(
            "receiver",
            "load impedance",
            nr,
            rx.load_impedance,
            &rx.load_impedances,
            default_z,
        )?
    } else {
        Vec::new()
    };

    let ns = scenario.n_ris();
    let z_ris = if let Some(ris) = &config.ris {
        let load = &ris.load;
        let mut entries: Vec<Complex64> = match load.mode {
            RisLoadMode::Series => {
                let r = load
                    .resistance
                    .ok_or(LoadError::MissingField(load.mode, "resistance"))?;
                let l = load
                    .inductance
                    .ok_or(LoadError::MissingField(load.mode, "inductance"))?;
                vec![pin_series(r, l, omega)?; ns]
            }
            RisLoadMode::Parallel => {
                let r = load
                    .resistance
                    .ok_or(LoadError::MissingField(load.mode, "resistance"))?;
                let l = load
                    .inductance
                    .ok_or(LoadError::MissingField(load.mode, "inductance"))?;
                let c = load
                    .capacitance
                    .ok_or(LoadError::MissingField(load.mode, "capacitance"))?;
                vec![pin_parallel(r, c, l, omega)?; ns]
            }
            RisLoadMode::Explicit => {
                let values = load
                    .impedances
                    .as_ref()
                    .ok_or(LoadError::MissingField(load.mode, "impedances"))?;
                if values.len() != ns {
                    return Err(LoadError::CountMismatch {
                        group: "ris",
                        field: "impedance",
                        elements: ns,
                        values: values.len(),
                    });
                }
                values.iter().copied().map(pair_to_complex).collect()
            }
        };
        if let Some(overrides) = &load.overrides {
            for o in overrides {
                if o.index >= ns {
                    return Err(LoadError::OverrideOutOfRange(o.index, ns));
                }
                entries[o.index] = pair_to_complex(o.impedance);
            }
        }
        // passivity check via the matrix constructor
        build_ris_load_matrix(&entries)?;
        entries
    } else {
        Vec::new()
    };

    Ok(LoadNetwork { z_g, z_l, z_ris, v_g })
}

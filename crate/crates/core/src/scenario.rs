//! Geometry and physical-constant layer.
//!
//! Everything downstream (kernels, impedance assembly, the port solver)
//! consumes a validated [`Scenario`]: a set of parallel thin-wire radiators
//! grouped into transmit antennas, RIS scatterers, and receive antennas,
//! together with the constants derived from the operating frequency.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vacuum permittivity (F/m), CODATA 2018.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m), CODATA 2018.
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// Hard upper bound on the radius-to-length ratio of a wire element.
/// Above this the thin-wire current approximation is not trusted.
pub const THIN_WIRE_RATIO_MAX: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("wire length must be positive, got {0} m")]
    NonPositiveLength(f64),
    #[error("wire radius must be positive, got {0} m")]
    NonPositiveRadius(f64),
    #[error("radius/length ratio {ratio} violates the thin-wire bound a/l < {max}")]
    NotThinWire { ratio: f64, max: f64 },
    #[error("RIS grid spacing must be positive, got {0} m")]
    NonPositiveSpacing(f64),
    #[error("RIS grid must have rows >= 1 and cols >= 1, got {rows}x{cols}")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("elements {0} and {1} occupy the same position")]
    CoincidentElements(usize, usize),
    #[error("element coordinate is not finite")]
    NonFiniteCoordinate,
}

/// A point in 3-space, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Distance in the x-y plane only.
    pub fn transverse_distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Frequency-derived constants shared by every numerical kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Operating frequency (Hz).
    pub frequency: f64,
    /// Angular frequency 2*pi*f (rad/s).
    pub omega: f64,
    /// Wavelength c0/f (m).
    pub wavelength: f64,
    /// Wavenumber 2*pi/lambda (1/m).
    pub k0: f64,
    /// Vacuum permittivity (F/m).
    pub epsilon0: f64,
    /// Vacuum permeability (H/m).
    pub mu0: f64,
    /// Characteristic impedance of vacuum sqrt(mu0/eps0) (ohm).
    pub eta0: f64,
    /// Speed of light 1/sqrt(eps0*mu0) (m/s).
    pub c0: f64,
}

impl PhysicalConstants {
    pub fn from_frequency(frequency: f64) -> Result<Self, ScenarioError> {
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(ScenarioError::NonPositiveFrequency(frequency));
        }
        let c0 = 1.0 / (EPSILON_0 * MU_0).sqrt();
        let eta0 = (MU_0 / EPSILON_0).sqrt();
        let omega = 2.0 * std::f64::consts::PI * frequency;
        let wavelength = c0 / frequency;
        let k0 = 2.0 * std::f64::consts::PI / wavelength;
        Ok(Self {
            frequency,
            omega,
            wavelength,
            k0,
            epsilon0: EPSILON_0,
            mu0: MU_0,
            eta0,
            c0,
        })
    }
}

/// Which group a radiating element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Transmit,
    Scatterer,
    Receive,
}

/// One thin-wire radiator, parallel to the z-axis, center-fed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireElement {
    /// Center (feed gap) position (m).
    pub position: Point3,
    /// Full wire length (m); the wire spans z +- length/2.
    pub length: f64,
    /// Wire radius (m).
    pub radius: f64,
    pub role: Role,
    /// Index within the element's group.
    pub index: usize,
}

impl WireElement {
    pub fn new(
        position: Point3,
        length: f64,
        radius: f64,
        role: Role,
        index: usize,
    ) -> Result<Self, ScenarioError> {
        if !position.is_finite() {
            return Err(ScenarioError::NonFiniteCoordinate);
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(ScenarioError::NonPositiveLength(length));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(ScenarioError::NonPositiveRadius(radius));
        }
        let ratio = radius / length;
        if ratio >= THIN_WIRE_RATIO_MAX {
            return Err(ScenarioError::NotThinWire {
                ratio,
                max: THIN_WIRE_RATIO_MAX,
            });
        }
        Ok(Self {
            position,
            length,
            radius,
            role,
            index,
        })
    }

    /// Axial span [z_lo, z_hi] of the wire.
    pub fn span(&self) -> (f64, f64) {
        (
            self.position.z - 0.5 * self.length,
            self.position.z + 0.5 * self.length,
        )
    }
}

/// Full validated geometry: transmit array, RIS grid, receive array.
///
/// Immutable after construction and safe to share across worker threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub constants: PhysicalConstants,
    pub transmit: Vec<WireElement>,
    pub scatterers: Vec<WireElement>,
    pub receive: Vec<WireElement>,
}

impl Scenario {
    pub fn n_transmit(&self) -> usize {
        self.transmit.len()
    }

    pub fn n_ris(&self) -> usize {
        self.scatterers.len()
    }

    pub fn n_receive(&self) -> usize {
        self.receive.len()
    }

    pub fn n_total(&self) -> usize {
        self.transmit.len() + self.scatterers.len() + self.receive.len()
    }

    /// All elements in transmitter, RIS, receiver order. This ordering fixes
    /// the row/column layout of the assembled impedance matrix.
    pub fn elements(&self) -> impl Iterator<Item = &WireElement> {
        self.transmit
            .iter()
            .chain(self.scatterers.iter())
            .chain(self.receive.iter())
    }

    /// Validates that no two elements coincide. Positions are compared
    /// exactly; the grid generator never produces duplicates on its own.
    pub fn check_distinct_positions(&self) -> Result<(), ScenarioError> {
        let all: Vec<&WireElement> = self.elements().collect();
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                if all[i].position == all[j].position {
                    return Err(ScenarioError::CoincidentElements(i, j));
                }
            }
        }
        Ok(())
    }
}

/// Generates the RIS lattice: `rows` x `cols` points in the x-z plane through
/// `center`, rows stacked along x, columns along z, adjacent spacing `spacing`.
/// The lattice is symmetric about `center`.
pub fn ris_grid_positions(
    center: Point3,
    rows: usize,
    cols: usize,
    spacing: f64,
) -> Result<Vec<Point3>, ScenarioError> {
    if rows < 1 || cols < 1 {
        return Err(ScenarioError::EmptyGrid { rows, cols });
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(ScenarioError::NonPositiveSpacing(spacing));
    }
    let mut points = Vec::with_capacity(rows * cols);
    for m in 0..rows {
        let x = center.x + (m as f64 - 0.5 * (rows as f64 - 1.0)) * spacing;
        for n in 0..cols {
            let z = center.z + (n as f64 - 0.5 * (cols as f64 - 1.0)) * spacing;
            points.push(Point3::new(x, center.y, z));
        }
    }
    Ok(points)
}

/// A pair of elements closer than the accuracy threshold of the sinusoidal
/// current approximation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingWarning {
    /// Flat indices into [`Scenario::elements`] order.
    pub pair: (usize, usize),
    pub distance: f64,
    pub threshold: f64,
}

/// Flags every element pair closer than `threshold` (center-to-center).
/// Pass `None` for the default lambda/10. Warnings only; the model stays
/// computable at any spacing.
pub fn validate_spacing(scenario: &Scenario, threshold: Option<f64>) -> Vec<SpacingWarning> {
    let threshold = threshold.unwrap_or(scenario.constants.wavelength / 10.0);
    let all: Vec<&WireElement> = scenario.elements().collect();
    let mut warnings = Vec::new();
    for i in 0..all.len() {
        for j in (i + 1)..all.len() {
            let d = all[i].position.distance(&all[j].position);
            if d < threshold {
                warnings.push(SpacingWarning {
                    pair: (i, j),
                    distance: d,
                    threshold,
                });
            }
        }
    }
    warnings
}

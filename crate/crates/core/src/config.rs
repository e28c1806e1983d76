//! Scenario configuration files.
//!
//! The on-disk format is TOML with sections `[system]`, `[transmitter]`,
//! `[receiver]`, and `[ris]`. Unknown keys are hard errors. Lengths may be
//! given in meters (bare number) or in wavelength multiples (string with a
//! `lambda` suffix, e.g. `"0.03125 lambda"`), resolved against the configured
//! frequency at build time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{
    ris_grid_positions, PhysicalConstants, Point3, Role, Scenario, ScenarioError, WireElement,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid length {0:?}: expected meters (number) or \"<value> lambda\"")]
    BadLength(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// A length that is either absolute meters or a wavelength multiple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Meters(f64),
    /// String form, e.g. `"0.5 lambda"` or `"0.010707m"`.
    Tagged(TaggedLength),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TaggedLength {
    pub value: f64,
    pub in_wavelengths: bool,
}

impl TryFrom<String> for TaggedLength {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        let t = s.trim();
        let (num, in_wavelengths) = if let Some(stripped) = t.strip_suffix("lambda") {
            (stripped, true)
        } else if let Some(stripped) = t.strip_suffix('m') {
            (stripped, false)
        } else {
            return Err(format!("length {s:?} must end in \"lambda\" or \"m\""));
        };
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| format!("bad numeric value in length {s:?}"))?;
        Ok(Self {
            value,
            in_wavelengths,
        })
    }
}

impl From<TaggedLength> for String {
    fn from(t: TaggedLength) -> String {
        if t.in_wavelengths {
            format!("{} lambda", t.value)
        } else {
            format!("{} m", t.value)
        }
    }
}

impl Length {
    /// Resolves to meters against the given wavelength.
    pub fn resolve(&self, wavelength: f64) -> f64 {
        match *self {
            Length::Meters(v) => v,
            Length::Tagged(t) => {
                if t.in_wavelengths {
                    t.value * wavelength
                } else {
                    t.value
                }
            }
        }
    }

    /// Parses a CLI-style length literal: bare number = meters, otherwise the
    /// same suffix forms the config file accepts.
    pub fn parse(s: &str) -> Result<Length, ConfigError> {
        if let Ok(v) = s.trim().parse::<f64>() {
            return Ok(Length::Meters(v));
        }
        TaggedLength::try_from(s.to_string())
            .map(Length::Tagged)
            .map_err(|_| ConfigError::BadLength(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmitter: Option<TransmitterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<ReceiverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ris: Option<RisConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterConfig {
    /// Explicit per-element feed positions (m).
    pub positions: Vec<[f64; 3]>,
    pub length: Length,
    pub radius: Length,
    /// Generator internal impedance, one `[re, im]` pair shared by all ports
    /// unless `generator_impedances` lists one per port.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_impedance: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_impedances: Option<Vec<[f64; 2]>>,
    /// Source voltages, `[re, im]` per port. Defaults to 1 V on port 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltages: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    pub positions: Vec<[f64; 3]>,
    pub length: Length,
    pub radius: Length,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_impedance: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_impedances: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RisConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing: Length,
    pub center: [f64; 3],
    pub length: Length,
    pub radius: Length,
    pub load: RisLoadConfig,
}

/// Tunable-load model for the RIS elements. `mode` selects the circuit:
/// `"series"` is R + jwL, `"parallel"` is (1/R + jwC)^-1 + jwL, `"explicit"`
/// takes per-element complex impedances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RisLoadConfig {
    pub mode: RisLoadMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resistance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inductance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacitance: Option<f64>,
    /// Per-element impedances for `mode = "explicit"`, `[re, im]`, in element
    /// index order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impedances: Option<Vec<[f64; 2]>>,
    /// Sparse per-element overrides applied after the bulk model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<Vec<RisLoadOverride>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RisLoadOverride {
    pub index: usize,
    pub impedance: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisLoadMode {
    Series,
    Parallel,
    Explicit,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }
}

/// Builds a validated [`Scenario`] from a config. Deterministic: the same
/// config always produces an identical scenario.
pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    let constants = PhysicalConstants::from_frequency(config.system.frequency_hz)
        .map_err(ScenarioError::from)
        .map_err(ConfigError::from)?;
    let lambda = constants.wavelength;

    let mut transmit = Vec::new();
    if let Some(tx) = &config.transmitter {
        let l = tx.length.resolve(lambda);
        let a = tx.radius.resolve(lambda);
        for (i, pos) in tx.positions.iter().enumerate() {
            transmit.push(WireElement::new(Point3::from(*pos), l, a, Role::Transmit, i)?);
        }
    }

    let mut scatterers = Vec::new();
    if let Some(ris) = &config.ris {
        let l = ris.length.resolve(lambda);
        let a = ris.radius.resolve(lambda);
        let d = ris.spacing.resolve(lambda);
        if !(d > 0.0) || !d.is_finite() {
            return Err(ScenarioError::NonPositiveSpacing(d).into());
        }
        let points = ris_grid_positions(Point3::from(ris.center), ris.rows, ris.cols, d)?;
        for (i, p) in points.into_iter().enumerate() {
            scatterers.push(WireElement::new(p, l, a, Role::Scatterer, i)?);
        }
    }

    let mut receive = Vec::new();
    if let Some(rx) = &config.receiver {
        let l = rx.length.resolve(lambda);
        let a = rx.radius.resolve(lambda);
        for (i, pos) in rx.positions.iter().enumerate() {
            receive.push(WireElement::new(Point3::from(*pos), l, a, Role::Receive, i)?);
        }
    }

    let scenario = Scenario {
        constants,
        transmit,
        scatterers,
        receive,
    };
    scenario.check_distinct_positions()?;
    Ok(scenario)
}

//! `sweep`: evaluate the scenario across a list of values of one parameter
//! and record coupled vs coupling-unaware surface-path power per point.
//!
//! Points run concurrently up to the worker budget; rows are written in
//! sweep order regardless of completion order. A failing point becomes a row
//! with an error column and the sweep continues.

use std::time::Instant;

use clap::{Args, ValueEnum};
use rayon::prelude::*;

use riswire::config::Length;
use riswire::scenario::{Point3, WireElement};
use riswire::{Scenario, ScenarioConfig};

use crate::common::{csv_escape, fmt_f64, obtain_blocks, CliError, Context};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVariable {
    /// Grid spacing of the surface elements.
    RisSpacing,
    /// Number of surface elements; square grids only, so every value must be
    /// a perfect square.
    RisCount,
    /// Operating frequency in Hz.
    Frequency,
    /// Transmitter-receiver separation; both groups are moved along their
    /// connecting line, keeping the midpoint fixed.
    TxRxDistance,
}

#[derive(Args, Debug)]
pub struct SweepOpts {
    /// Which parameter to sweep.
    #[arg(long, value_enum)]
    pub variable: SweepVariable,
    /// Comma-separated values. Lengths accept meters (bare number) or
    /// wavelength multiples ("0.125 lambda"); frequency is Hz; counts are
    /// integers.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
}

/// One sweep value, carried both as parsed input and resolved number.
enum SweepValue {
    Len(Length),
    Count(usize),
    Freq(f64),
}

fn parse_values(opts: &SweepOpts) -> Result<Vec<SweepValue>, CliError> {
    if opts.values.is_empty() {
        return Err(CliError::usage("sweep needs at least one value"));
    }
    opts.values
        .iter()
        .map(|raw| {
            let raw = raw.trim();
            match opts.variable {
                SweepVariable::RisSpacing | SweepVariable::TxRxDistance => Length::parse(raw)
                    .map(SweepValue::Len)
                    .map_err(|_| bad_value(raw, "a length in meters or \"x lambda\"")),
                SweepVariable::RisCount => {
                    let n: usize = raw
                        .parse()
                        .map_err(|_| bad_value(raw, "a positive integer"))?;
                    let side = (n as f64).sqrt().round() as usize;
                    if n == 0 || side * side != n {
                        return Err(bad_value(raw, "a positive perfect square (square grid)"));
                    }
                    Ok(SweepValue::Count(n))
                }
                SweepVariable::Frequency => {
                    let f: f64 = raw.parse().map_err(|_| bad_value(raw, "a frequency in Hz"))?;
                    if !(f > 0.0) || !f.is_finite() {
                        return Err(bad_value(raw, "a positive frequency in Hz"));
                    }
                    Ok(SweepValue::Freq(f))
                }
            }
        })
        .collect()
}

fn bad_value(raw: &str, wanted: &str) -> CliError {
    CliError::new(
        "SWEEP_INVALID",
        format!("sweep value {raw:?} is not {wanted}"),
    )
}

/// Moves the transmit and receive groups along their connecting line so the
/// centroid separation equals `distance`, midpoint fixed.
fn with_tx_rx_distance(base: &Scenario, distance: f64) -> Result<Scenario, CliError> {
    if base.transmit.is_empty() || base.receive.is_empty() {
        return Err(CliError::new(
            "SWEEP_INVALID",
            "tx-rx-distance sweep needs both a transmitter and a receiver",
        ));
    }
    if !(distance > 0.0) {
        return Err(CliError::new(
            "SWEEP_INVALID",
            format!("tx-rx distance must be positive, got {distance}"),
        ));
    }
    let centroid = |group: &[WireElement]| {
        let n = group.len() as f64;
        let (x, y, z) = group.iter().fold((0.0, 0.0, 0.0), |acc, e| {
            (
                acc.0 + e.position.x,
                acc.1 + e.position.y,
                acc.2 + e.position.z,
            )
        });
        Point3::new(x / n, y / n, z / n)
    };
    let ct = centroid(&base.transmit);
    let cr = centroid(&base.receive);
    let sep = ct.distance(&cr);
    if sep == 0.0 {
        return Err(CliError::new(
            "SWEEP_INVALID",
            "transmitter and receiver centroids coincide; no sweep axis",
        ));
    }
    let ux = (cr.x - ct.x) / sep;
    let uy = (cr.y - ct.y) / sep;
    let uz = (cr.z - ct.z) / sep;
    let mx = 0.5 * (ct.x + cr.x);
    let my = 0.5 * (ct.y + cr.y);
    let mz = 0.5 * (ct.z + cr.z);
    let shift = |group: &[WireElement], center: &Point3, sign: f64| {
        group
            .iter()
            .map(|e| {
                let p = Point3::new(
                    e.position.x - center.x + mx + sign * 0.5 * distance * ux,
                    e.position.y - center.y + my + sign * 0.5 * distance * uy,
                    e.position.z - center.z + mz + sign * 0.5 * distance * uz,
                );
                WireElement::new(p, e.length, e.radius, e.role, e.index)
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let transmit = shift(&base.transmit, &ct, -1.0)?;
    let receive = shift(&base.receive, &cr, 1.0)?;
    let scenario = Scenario {
        constants: base.constants,
        transmit,
        scatterers: base.scatterers.clone(),
        receive,
    };
    scenario.check_distinct_positions()?;
    Ok(scenario)
}

/// Builds the scenario and load network for one sweep point.
fn point_setup(
    ctx: &Context,
    variable: SweepVariable,
    value: &SweepValue,
) -> Result<(ScenarioConfig, Scenario, f64), CliError> {
    let mut config = ctx.config.clone();
    match (variable, value) {
        (SweepVariable::RisSpacing, SweepValue::Len(len)) => {
            let ris = config.ris.as_mut().ok_or_else(|| {
                CliError::new("SWEEP_INVALID", "ris-spacing sweep needs a [ris] section")
            })?;
            ris.spacing = *len;
            let scenario = riswire::config::build_scenario(&config)?;
            let meters = len.resolve(scenario.constants.wavelength);
            Ok((config, scenario, meters))
        }
        (SweepVariable::RisCount, SweepValue::Count(n)) => {
            let ris = config.ris.as_mut().ok_or_else(|| {
                CliError::new("SWEEP_INVALID", "ris-count sweep needs a [ris] section")
            })?;
            let side = (*n as f64).sqrt().round() as usize;
            ris.rows = side;
            ris.cols = side;
            let scenario = riswire::config::build_scenario(&config)?;
            Ok((config, scenario, *n as f64))
        }
        (SweepVariable::Frequency, SweepValue::Freq(f)) => {
            config.system.frequency_hz = *f;
            let scenario = riswire::config::build_scenario(&config)?;
            Ok((config, scenario, *f))
        }
        (SweepVariable::TxRxDistance, SweepValue::Len(len)) => {
            let base = riswire::config::build_scenario(&config)?;
            let meters = len.resolve(base.constants.wavelength);
            let scenario = with_tx_rx_distance(&base, meters)?;
            Ok((config, scenario, meters))
        }
        _ => unreachable!("value parsed against the same variable"),
    }
}

struct PointRow {
    value: f64,
    n_ris: usize,
    coupled: Option<f64>,
    uncoupled: Option<f64>,
    wall_ms: f64,
    error: Option<String>,
}

fn run_point(ctx: &Context, variable: SweepVariable, value: &SweepValue) -> PointRow {
    let start = Instant::now();
    let attempt = || -> Result<(usize, f64, f64, f64), CliError> {
        let (config, scenario, resolved) = point_setup(ctx, variable, value)?;
        let loads = riswire::build_load_network(&config, &scenario)?;
        let outcome = obtain_blocks(&scenario, &ctx.quad, ctx.cache_dir.as_deref())?;
        let coupled = riswire::channel::vlos_decomposition(&outcome.blocks, &loads, true)?;
        let uncoupled = riswire::channel::vlos_decomposition(&outcome.blocks, &loads, false)?;
        let power = |m: &nalgebra::DMatrix<num_complex::Complex64>| {
            m.iter().map(|z| z.norm_sqr()).sum::<f64>()
        };
        Ok((
            scenario.n_ris(),
            resolved,
            power(&coupled),
            power(&uncoupled),
        ))
    };
    match attempt() {
        Ok((n_ris, resolved, coupled, uncoupled)) => PointRow {
            value: resolved,
            n_ris,
            coupled: Some(coupled),
            uncoupled: Some(uncoupled),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            error: None,
        },
        Err(e) => PointRow {
            value: match value {
                SweepValue::Len(_) => f64::NAN,
                SweepValue::Count(n) => *n as f64,
                SweepValue::Freq(f) => *f,
            },
            n_ris: 0,
            coupled: None,
            uncoupled: None,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            error: Some(e.to_string()),
        },
    }
}

pub fn run(ctx: &Context, opts: &SweepOpts) -> Result<(), CliError> {
    let values = parse_values(opts)?;

    // par_iter keeps index order on collect, so rows land in sweep order no
    // matter which point finishes first.
    let rows: Vec<PointRow> = values
        .par_iter()
        .map(|v| run_point(ctx, opts.variable, v))
        .collect();

    let mut csv =
        String::from("value,n_ris,h_vlos_sq_coupled,h_vlos_sq_uncoupled,wall_ms,error\n");
    let mut failures = 0usize;
    for row in &rows {
        let opt = |v: &Option<f64>| v.map(fmt_f64).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(row.value),
            row.n_ris,
            opt(&row.coupled),
            opt(&row.uncoupled),
            format_args!("{:.3}", row.wall_ms),
            csv_escape(row.error.as_deref().unwrap_or("")),
        ));
        failures += row.error.is_some() as usize;
    }
    let path = ctx.out.join("sweep.csv");
    std::fs::write(&path, csv)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    println!(
        "swept {} point(s) ({failures} failed) -> {}",
        rows.len(),
        path.display()
    );
    Ok(())
}

//! Shared plumbing: error records, scenario loading, impedance block
//! acquisition with the on-disk cache, and deterministic CSV/JSON output.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use riswire::{
    cache, ChannelError, ConfigError, ImpedanceBlocks, ImpedanceError, LoadError, LoadNetwork,
    OptimizerError, QuadratureSpec, Scenario, ScenarioConfig, ScenarioError,
};

use crate::GlobalOpts;

/// A failure that maps to one machine-parsable error record. The code set is
/// part of the CLI contract; see the README's exit-code table.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("USAGE", message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new("OUTPUT_IO", message)
    }

    /// Prints the single-line JSON error record to stderr.
    pub fn emit(&self) {
        eprintln!(
            "{}",
            serde_json::json!({ "error": { "code": self.code, "message": self.message } })
        );
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let code = match &e {
            ConfigError::Io(_) => "CONFIG_IO",
            ConfigError::Parse(_) | ConfigError::BadLength(_) => "CONFIG_PARSE",
            ConfigError::Scenario(_) => "SCENARIO_INVALID",
        };
        Self::new(code, e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        Self::new("SCENARIO_INVALID", e.to_string())
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        Self::new("LOAD_INVALID", e.to_string())
    }
}

impl From<ImpedanceError> for CliError {
    fn from(e: ImpedanceError) -> Self {
        Self::new("QUADRATURE", e.to_string())
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        Self::new("CHANNEL_SINGULAR", e.to_string())
    }
}

impl From<cache::CacheError> for CliError {
    fn from(e: cache::CacheError) -> Self {
        Self::new("CACHE_IO", e.to_string())
    }
}

impl From<OptimizerError> for CliError {
    fn from(e: OptimizerError) -> Self {
        match &e {
            OptimizerError::NoFeasibleStart(_) => {
                Self::new("OPT_NO_FEASIBLE_START", e.to_string())
            }
            OptimizerError::Channel(_) => Self::new("CHANNEL_SINGULAR", e.to_string()),
            _ => Self::new("OPT_INVALID", e.to_string()),
        }
    }
}

/// Everything a subcommand needs: the parsed config, the built scenario,
/// quadrature settings, and output/cache locations.
pub struct Context {
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    pub quad: QuadratureSpec,
    pub out: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Context {
    pub fn new(global: &GlobalOpts) -> Result<Self, CliError> {
        let path = global
            .config
            .as_ref()
            .ok_or_else(|| CliError::usage("--config is required (or set RISWIRE_CONFIG)"))?;
        let config = ScenarioConfig::from_path(path).map_err(|e| match &e {
            // A missing/unreadable file is an I/O problem, not a syntax one.
            ConfigError::Io(io) => CliError::new(
                "CONFIG_IO",
                format!("cannot read config {}: {io}", path.display()),
            ),
            _ => CliError::from(e),
        })?;
        let scenario = riswire::config::build_scenario(&config)?;
        let mut quad = QuadratureSpec::default();
        if let Some(tol) = global.quad_tol {
            quad.rel_tol = tol;
        }
        Ok(Self {
            config,
            scenario,
            quad,
            out: global.out.clone(),
            cache_dir: global.cache_dir.clone(),
            seed: global.seed,
        })
    }
}

/// Assembled blocks plus where they came from.
pub struct BlocksOutcome {
    pub blocks: ImpedanceBlocks,
    pub key: String,
    pub cache_hit: bool,
    /// Present only when the blocks were integrated this run.
    pub pairs: Option<usize>,
    pub classes: Option<usize>,
    pub max_est_error: Option<f64>,
}

/// Loads the blocks from the cache when available, otherwise integrates them
/// and (when a cache directory is configured) stores them for the next run.
pub fn obtain_blocks(
    scenario: &Scenario,
    quad: &QuadratureSpec,
    cache_dir: Option<&Path>,
) -> Result<BlocksOutcome, CliError> {
    let key = cache::geometry_hash(scenario, quad);
    if let Some(dir) = cache_dir {
        if let Some((blocks, _meta)) = cache::load(dir, &key)? {
            return Ok(BlocksOutcome {
                blocks,
                key,
                cache_hit: true,
                pairs: None,
                classes: None,
                max_est_error: None,
            });
        }
    }
    let (blocks, report) = riswire::assemble_impedance_blocks(scenario, quad)?;
    if let Some(dir) = cache_dir {
        cache::store(dir, &key, scenario.constants.frequency, &blocks)?;
    }
    Ok(BlocksOutcome {
        blocks,
        key,
        cache_hit: false,
        pairs: Some(report.pairs),
        classes: Some(report.classes),
        max_est_error: Some(report.max_est_error),
    })
}

pub fn load_network(ctx: &Context) -> Result<LoadNetwork, CliError> {
    Ok(riswire::build_load_network(&ctx.config, &ctx.scenario)?)
}

/// 17-significant-digit float form; stable across runs for reproducibility
/// diffs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a complex matrix as `row,col,re,im` CSV.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<Complex64>) -> Result<(), CliError> {
    let mut s = String::from("row,col,re,im\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            s.push_str(&format!("{i},{j},{},{}\n", fmt_f64(z.re), fmt_f64(z.im)));
        }
    }
    std::fs::write(path, s)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::io(format!("cannot serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// Escapes a CSV field: quoted when it contains a comma, quote, or newline.
pub fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

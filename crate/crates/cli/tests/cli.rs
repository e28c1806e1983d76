//! End-to-end tests of the `riswire` binary: every subcommand is exercised
//! through a real process, checking outputs, error records, exit codes, and
//! rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riswire"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, body).unwrap();
    path
}

/// One transmitter, a single-element surface, one receiver; short elements
/// keep the quadrature fast.
const SMALL_111: &str = r#"
[system]
frequency_hz = 28e9

[transmitter]
positions = [[0.5, -0.5, 0.3]]
length = "0.03125 lambda"
radius = "0.002 lambda"
generator_impedance = [50.0, 0.0]

[receiver]
positions = [[0.5, 0.5, 0.1]]
length = "0.03125 lambda"
radius = "0.002 lambda"
load_impedance = [50.0, 0.0]

[ris]
rows = 1
cols = 1
spacing = "0.125 lambda"
center = [0.0, 0.0, 0.0]
length = "0.03125 lambda"
radius = "0.002 lambda"

[ris.load]
mode = "series"
resistance = 1.0
inductance = 1e-9
"#;

/// 2x2 surface for coupled-vs-uncoupled contrast.
const GRID_2X2: &str = r#"
[system]
frequency_hz = 28e9

[transmitter]
positions = [[0.5, -0.5, 0.3]]
length = "0.03125 lambda"
radius = "0.002 lambda"

[receiver]
positions = [[0.5, 0.5, 0.1]]
length = "0.03125 lambda"
radius = "0.002 lambda"

[ris]
rows = 2
cols = 2
spacing = "0.0625 lambda"
center = [0.0, 0.0, 0.0]
length = "0.03125 lambda"
radius = "0.002 lambda"

[ris.load]
mode = "series"
resistance = 1.0
inductance = 1e-9
"#;

/// Quarter-wave single scatterer between close transmitter and receiver: its
/// self reactance is moderate, so the optimal reactance is interior to the
/// box and analytically -Im(Z_SS).
const OPT_SINGLE: &str = r#"
[system]
frequency_hz = 28e9

[transmitter]
positions = [[0.0, -0.0214137, 0.0]]
length = "0.25 lambda"
radius = "0.002 lambda"

[receiver]
positions = [[0.0, 0.0214137, 0.0]]
length = "0.25 lambda"
radius = "0.002 lambda"

[ris]
rows = 1
cols = 1
spacing = "0.125 lambda"
center = [0.0, 0.0, 0.0]
length = "0.25 lambda"
radius = "0.002 lambda"

[ris.load]
mode = "series"
resistance = 1.0
inductance = 1e-9
"#;

fn run_ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn error_record(out: &Output) -> Value {
    assert!(
        !out.status.success(),
        "expected failure, got success\nstdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no error record on stderr: {stderr}"));
    serde_json::from_str(line).expect("error record must be valid JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn impedance_exports_blocks_and_is_rerun_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_111);
    let out_dir = tmp.path().join("out");

    run_ok(bin()
        .args(["--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .arg("impedance")
        .output()
        .unwrap());

    let names = [
        "z_tt", "z_ts", "z_tr", "z_st", "z_ss", "z_sr", "z_rt", "z_rs", "z_rr",
    ];
    let mut first = Vec::new();
    for n in names {
        let p = out_dir.join(format!("{n}.csv"));
        assert!(p.exists(), "missing {n}.csv");
        first.push(std::fs::read(p).unwrap());
    }
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["cache_hit"], Value::Bool(false));
    assert!(manifest["geometry_hash"].as_str().unwrap().len() == 64);
    assert_eq!(manifest["n_ris"], 1);

    // Second run: identical CSV bytes, cache hit recorded.
    run_ok(bin()
        .args(["--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .arg("impedance")
        .output()
        .unwrap());
    for (n, before) in names.iter().zip(&first) {
        let after = std::fs::read(out_dir.join(format!("{n}.csv"))).unwrap();
        assert_eq!(&after, before, "{n}.csv changed between identical runs");
    }
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["cache_hit"], Value::Bool(true));
}

#[test]
fn unreadable_config_yields_config_io_record() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--config", "/nonexistent/nowhere.toml"])
        .args(["--out", tmp.path().join("out").to_str().unwrap()])
        .arg("impedance")
        .output()
        .unwrap();
    let record = error_record(&out);
    assert_eq!(record["error"]["code"], "CONFIG_IO");
}

#[test]
fn config_env_var_override_works() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_111);
    let out_dir = tmp.path().join("out");
    run_ok(bin()
        .env("RISWIRE_CONFIG", &config)
        .args(["--out", out_dir.to_str().unwrap()])
        .args(["channel", "--far-field"])
        .output()
        .unwrap());
    assert!(out_dir.join("channel_far_field.json").exists());
}

#[test]
fn channel_far_field_writes_scalar_decomposition() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_111);
    let out_dir = tmp.path().join("out");
    run_ok(bin()
        .args(["--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .args(["channel", "--far-field"])
        .output()
        .unwrap());
    let result = read_json(&out_dir.join("channel_far_field.json"));
    // 1x1 matrices and the front factor are all present.
    assert!(result["y0"].is_array() || result["y0"].is_object());
    for key in ["h_e2e", "h_los", "h_vlos"] {
        assert!(!result[key].is_null(), "missing {key}");
    }
}

#[test]
fn channel_far_field_rejects_multiport() {
    let tmp = tempfile::tempdir().unwrap();
    let two_tx = SMALL_111.replace(
        "positions = [[0.5, -0.5, 0.3]]",
        "positions = [[0.5, -0.5, 0.3], [0.5, -0.5, 0.35]]",
    );
    let config = write_config(tmp.path(), &two_tx);
    let out = bin()
        .args(["--config", config.to_str().unwrap()])
        .args(["--out", tmp.path().join("out").to_str().unwrap()])
        .args(["channel", "--far-field"])
        .output()
        .unwrap();
    let record = error_record(&out);
    assert_eq!(record["error"]["code"], "USAGE");
}

#[test]
fn channel_direct_and_closed_form_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), GRID_2X2);
    let out_dir = tmp.path().join("out");
    run_ok(bin()
        .args(["--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .args(["channel", "--direct", "--closed-form"])
        .output()
        .unwrap());
    let summary = read_json(&out_dir.join("channel_summary.json"));
    let gap = summary["max_rel_discrepancy"].as_f64().unwrap();
    assert!(gap < 1e-10, "direct vs closed form disagree: {gap}");
}

#[test]
fn sweep_single_point_yields_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_111);
    let out_dir = tmp.path().join("out");
    run_ok(bin()
        .args(["--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .args(["sweep", "--variable", "ris-spacing", "--values", "0.125 lambda"])
        .output()
        .unwrap());
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.trim().lines().collect();
    assert_eq!(lines.len(), 2, "header plus one data row, got:\n{csv}");
    assert!(lines[0].starts_with("value,n_ris,h_vlos_sq_coupled"));
    assert!(lines[1].ends_with(','), "single good row has empty error column");
}

#[test]
fn sweep_reports_coupling_contrast_and_survives_bad_points() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), GRID_2X2);
    let out_dir = tmp.path().join("out");
    // 0 is not a valid spacing: that point must fail as a row while the
    // other completes.
    run_ok(bin()
        .args(["--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .args(["sweep", "--variable", "ris-spacing"])
        .args(["--values", "0.0625 lambda,0"])
        .output()
        .unwrap());
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.trim().lines().collect();
    assert_eq!(lines.len(), 3);

    let fields: Vec<&str> = lines[1].split(',').collect();
    let coupled: f64 = fields[2].parse().unwrap();
    let uncoupled: f64 = fields[3].parse().unwrap();
    assert!(coupled > 0.0 && uncoupled > 0.0);
    let contrast = (coupled - uncoupled).abs() / coupled.max(uncoupled);
    assert!(
        contrast > 1e-6,
        "coupled and unaware powers should differ at tight spacing: {coupled} vs {uncoupled}"
    );

    assert!(
        lines[2].contains("spacing"),
        "failed point should carry an error message: {}",
        lines[2]
    );
}

#[test]
fn sweep_rejects_non_square_count() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_111);
    let out = bin()
        .args(["--config", config.to_str().unwrap()])
        .args(["--out", tmp.path().join("out").to_str().unwrap()])
        .args(["sweep", "--variable", "ris-count", "--values", "5"])
        .output()
        .unwrap();
    let record = error_record(&out);
    assert_eq!(record["error"]["code"], "SWEEP_INVALID");
}

#[test]
fn optimize_single_element_recovers_conjugate_reactance() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), OPT_SINGLE);
    let out_dir = tmp.path().join("out");
    let cache = tmp.path().join("cache");

    // Export the blocks first so the test can read Im(Z_SS) independently,
    // and so the optimize run hits the cache.
    run_ok(bin()
        .args(["--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .args(["--cache-dir", cache.to_str().unwrap()])
        .arg("impedance")
        .output()
        .unwrap());
    let z_ss = std::fs::read_to_string(out_dir.join("z_ss.csv")).unwrap();
    let im_zss: f64 = z_ss.trim().lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();

    run_ok(bin()
        .args(["--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .args(["--cache-dir", cache.to_str().unwrap(), "--seed", "7"])
        .args(["optimize", "--step-tolerance", "1e-10", "--max-iterations", "20000"])
        .output()
        .unwrap());
    let report = read_json(&out_dir.join("optimize_report.json"));
    let x = report["result"]["reactances"][0].as_f64().unwrap();
    assert!(
        (x + im_zss).abs() < 1e-5,
        "optimum should cancel the self reactance: X*={x}, Im(Z_SS)={im_zss}"
    );

    let trajectory: Vec<f64> = report["result"]["trajectory"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(
        trajectory.windows(2).all(|w| w[1] >= w[0]),
        "objective trajectory must be non-decreasing"
    );
}

#[test]
fn optimize_same_seed_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_111);
    let cache = tmp.path().join("cache");
    let mut reports = Vec::new();
    for run in 0..2 {
        let out_dir = tmp.path().join(format!("out{run}"));
        run_ok(bin()
            .args(["--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
            .args(["--cache-dir", cache.to_str().unwrap(), "--seed", "42"])
            .args(["optimize", "--starts", "4"])
            .output()
            .unwrap());
        let mut report = read_json(&out_dir.join("optimize_report.json"));
        report.as_object_mut().unwrap().remove("wall_ms");
        reports.push(report);
    }
    assert_eq!(reports[0], reports[1], "same seed must reproduce the report");
}

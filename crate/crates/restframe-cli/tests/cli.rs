use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_restframe"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn report(path: &Path) -> toml::Table {
    fs::read_to_string(path).unwrap().parse().unwrap()
}

fn float(t: &toml::Table, key: &str) -> f64 {
    t[key].as_float().unwrap_or_else(|| panic!("{key} is not a float"))
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|f| f.parse().unwrap()).collect()).collect();
    (header, rows)
}

const PAIR: &str = r#"
[[particles]]
mass = 1.0
charge = 3.5449077018110318
eta = [0.4, -0.2, 0.3]
kappa = [0.3, 0.5, -0.2]

[[particles]]
mass = 1.7
charge = -3.5449077018110318
eta = [-0.5, 0.3, -0.1]
kappa = [-0.2, 0.1, 0.4]
"#;

#[test]
fn free_pair_moves_on_straight_lines() {
    let dir = TempDir::new().unwrap();
    let out = run(&["simulate"], &example("free_pair.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = report(&dir.path().join("summary.toml"));
    for key in ["energy_drift", "radiation_energy_drift", "momentum_drift", "angular_momentum_drift"] {
        assert!(float(&s, key) < 1e-10, "{key}");
    }
    let (header, rows) = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(header.len(), 1 + 12 + 2 + 9);
    assert_eq!(rows.len(), 51);
    // c = 1: dη/dτ = κ/√(m² + κ²)
    let v1 = 0.5 / (1.0f64 + 0.25).sqrt();
    let v2 = -0.5 / (4.0f64 + 0.25).sqrt();
    for r in &rows {
        let tau = r[0];
        assert!((r[1] - 1.0).abs() < 1e-12 && (r[2] - v1 * tau).abs() < 1e-12);
        assert!((r[4] + 0.5).abs() < 1e-12 && (r[5] - v2 * tau).abs() < 1e-12);
    }
}

#[test]
fn bound_pair_reports_small_drift() {
    let dir = TempDir::new().unwrap();
    let out = run(&["simulate"], &example("bound_pair.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let s = report(&dir.path().join("summary.toml"));
    assert!(float(&s, "energy_drift") < 1e-10);
    assert!(float(&s, "angular_momentum_drift") < 1e-9);
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "c = 1.0\n[[particles]]\nmass = 1.0\ncharge = oops\n");
    let out_dir = dir.path().join("out");
    let out = run(&["simulate"], &config, &out_dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let config = write_config(&dir, "c = -1.0\n");
    assert_eq!(run(&["simulate"], &config, &out_dir).status.code(), Some(1));
    let config = write_config(&dir, "c = 1.0\nspeed = 2.0\n");
    assert_eq!(run(&["simulate"], &config, &out_dir).status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn bad_mode_file_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("modes.csv"), "# k, w, a\n1, 0, 0, 0.5, 0.1, 0, 0\n").unwrap();
    let config = write_config(&dir, "c = 1.0\n[radiation]\nmodes = \"modes.csv\"\n");
    let out = run(&["decompose"], &config, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2: expected 8 columns"));
}

#[test]
fn verify_lw_on_defaults_passes() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "c = 1.0\n");
    let out = run(&["verify", "--suite", "lw", "--suite", "tetrads", "--suite", "grassmann"], &config, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&dir.path().join("verify_report.toml"));
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 9);
    for c in checks {
        assert_eq!(c["pass"].as_bool(), Some(true));
        assert!(c["residual"].as_float().unwrap() < 1e-12);
    }
}

#[test]
fn canonicity_needs_nilpotent_charges() {
    let dir = TempDir::new().unwrap();
    let grid = "[grid]\nk_min = 0.4\nk_max = 2.5\nn_radial = 2\nn_polar = 3\nn_azimuth = 6\n[radiation]\namplitude = 0.1\n";
    let config = write_config(&dir, &format!("c = 1.3\nseed = 3\n{grid}{PAIR}"));
    let out = run(&["verify", "--suite", "canonicity"], &config, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["verify", "--suite", "canonicity", "--commuting-charges"], &config, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let r = report(&dir.path().join("verify_report.toml"));
    let c = &r["checks"].as_array().unwrap()[0];
    assert!(c["residual"].as_float().unwrap() > 1e-4);
}

#[test]
fn generators_and_limits_suites_pass() {
    let dir = TempDir::new().unwrap();
    let out = run(&["verify", "--suite", "generators", "--suite", "limits"], &example("verify.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&dir.path().join("verify_report.toml"));
    assert_eq!(r["checks"].as_array().unwrap().len(), 7);
}

#[test]
fn decompose_pure_radiation() {
    let dir = TempDir::new().unwrap();
    let grid = "[grid]\nk_min = 0.4\nk_max = 2.5\nn_radial = 2\nn_polar = 4\nn_azimuth = 8\n";
    let config = write_config(&dir, &format!("c = 1.0\nseed = 4\n{grid}[radiation]\namplitude = 0.3\n[decompose]\ntau = 2.5\n"));
    let out = run(&["decompose"], &config, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&dir.path().join("decompose_report.toml"));
    assert_eq!(r["modes"].as_integer(), Some(64));
    assert!(float(&r, "max_residual") < 1e-12);
}

#[test]
fn decompose_radiation_and_one_particle() {
    let dir = TempDir::new().unwrap();
    let out = run(&["decompose"], &example("decompose.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&dir.path().join("decompose_report.toml"));
    assert!(float(&r, "max_residual") < 1e-2);
    let (_, rows) = csv_rows(&dir.path().join("spectrum.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][..4], [1.0, 0.0, 0.0, 0.5]);
}

#[test]
fn decompose_empty_state() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "c = 1.0\n");
    let out = run(&["decompose"], &config, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&dir.path().join("spectrum.csv"));
    assert_eq!(header.len(), 9);
    assert!(rows.is_empty());
}

#[test]
fn limits_fit_second_order() {
    let dir = TempDir::new().unwrap();
    let out = run(&["limits"], &example("verify.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&dir.path().join("limits_report.toml"));
    for q in ["energy", "darwin", "boost"] {
        let o = r[q]["order"].as_float().unwrap();
        assert!((o + 2.0).abs() < 0.1, "{q}: {o}");
    }
    let (_, rows) = csv_rows(&dir.path().join("limits.csv"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn limits_without_charges_skip_the_darwin_term() {
    let dir = TempDir::new().unwrap();
    let out = run(&["limits"], &example("free_pair.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&dir.path().join("limits_report.toml"));
    assert_eq!(r["darwin"]["applicable"].as_bool(), Some(false));
    assert!(r["darwin"].get("order").is_none());
    assert_eq!(r["energy"]["applicable"].as_bool(), Some(true));
}

#[test]
fn identical_runs_are_bit_identical() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        &format!(
            "c = 1.3\nseed = 11\n[grid]\nk_min = 0.4\nk_max = 2.5\nn_radial = 2\nn_polar = 4\nn_azimuth = 8\n\
             [radiation]\namplitude = 0.1\n[integration]\ndt = 0.02\ntau_span = 1.0\nsamples = 10\nproject = true\n{PAIR}"
        ),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["simulate", "--threads", "1"], &config, &a).status.code(), Some(0));
    assert_eq!(run(&["simulate", "--threads", "4"], &config, &b).status.code(), Some(0));
    for f in ["trajectory.csv", "summary.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn head_on_collision_is_singular() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        "c = 2.0\ncharges = \"commuting\"\n\
         [[particles]]\nmass = 1.0\ncharge = 3.0\neta = [0.5, 0.0, 0.0]\nkappa = [0.0, 0.0, 0.0]\n\
         [[particles]]\nmass = 1.0\ncharge = -3.0\neta = [-0.5, 0.0, 0.0]\nkappa = [0.0, 0.0, 0.0]\n\
         [integration]\ndt = 0.01\ntau_span = 50.0\nmin_separation = 0.05\n",
    );
    let out = run(&["simulate"], &config, dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn coarse_step_violates_drift_tolerance() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(example("bound_pair.toml")).unwrap().replace("dt = 0.005", "dt = 0.5");
    let config = write_config(&dir, &format!("{text}\n[tolerances]\nenergy_drift = 1e-12\n"));
    let out = run(&["simulate"], &config, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let s = report(&dir.path().join("summary.toml"));
    assert_eq!(s["pass"].as_bool(), Some(false));
    assert!(float(&s, "energy_drift") > 1e-12);
}

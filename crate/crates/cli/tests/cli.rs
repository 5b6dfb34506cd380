use std::path::Path;
use std::process::{Command, Output};

use plasmon_dbr::analysis::{FluxSplit, ModeRecord};
use plasmon_dbr::experiments::{PointReport, PointStatus, SweepAxis};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plasmon-dbr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

/// Bragg period for a lossless Drude metal, written out independently.
fn period_oracle(energy_ev: f64) -> f64 {
    let (wp_ev, eps_d) = (8.8, 12.25);
    let eps_m = 1.0 - (wp_ev / energy_ev).powi(2);
    let n_sp = (eps_m * eps_d / (eps_m + eps_d)).sqrt();
    let lambda_nm = 1239.841984 / energy_ev;
    lambda_nm / (2.0 * n_sp)
}

#[test]
fn dispersion_single_energy() {
    let o = run(&["dispersion", "--energy-ev", "1.2"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 1);
    let a: f64 = r[0][6].parse().unwrap();
    assert!((a - period_oracle(1.2)).abs() / a < 1e-6, "a = {a}");
    assert!((a - 129.3).abs() < 0.1);
}

#[test]
fn dispersion_band_is_monotone() {
    let o = run(&["dispersion", "--from-ev", "0.8", "--to-ev", "1.6", "--points", "9"]);
    assert!(o.status.success());
    let n: Vec<f64> = rows(&stdout(&o)).iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(n.len(), 9);
    assert!(n.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn dispersion_across_the_plasmon_resonance_flags_rows() {
    let o = run(&["dispersion", "--from-ev", "2.0", "--to-ev", "3.0", "--points", "5"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert!(r.iter().any(|row| row[7] == "design"));
    assert!(r.iter().any(|row| row[7].is_empty()));
    assert!(stderr(&o).contains("warning"));
    let quiet = run(&["--quiet", "dispersion", "--from-ev", "2.0", "--to-ev", "3.0", "--points", "5"]);
    assert!(quiet.status.success());
    assert!(stderr(&quiet).is_empty());
}

#[test]
fn dry_run_touches_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["simulate", "--dry-run", "--output", out.to_str().unwrap(), "--geometry.dx-nm", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("grid"));
    assert!(stdout(&o).contains("MiB"));
    assert!(!out.exists());
}

#[test]
fn broken_config_exits_2_with_path() {
    let o = run(&["simulate", "--dry-run", "--geometry.groove-width-nm", "130"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["path"], "geometry.groove_width_nm");
}

#[test]
fn unknown_key_in_file_is_reported_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "version = \"1\"\n[geometry]\nperiod_nm = 116.0\ngroove_wdith_nm = 20.0\n").unwrap();
    let o = run(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("geometry.groove_wdith_nm"));
}

#[test]
fn defaults_round_trip_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["config", "dump-defaults"]);
    assert!(o.status.success());
    let path = dir.path().join("defaults.toml");
    std::fs::write(&path, o.stdout).unwrap();
    let v = run(&["validate", "--config", path.to_str().unwrap()]);
    assert!(v.status.success(), "{}", stderr(&v));
    assert!(stdout(&v).starts_with("ok"));
}

#[test]
fn report_on_missing_dir_exits_3() {
    let o = run(&["report", "/definitely/not/here"]);
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn missing_config_file_exits_3() {
    let o = run(&["validate", "--config", "/no/such/config.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_rejects_nonmonotone_values() {
    let o = run(&["sweep", "--axis", "cavity-length", "--values", "300,200,250"]);
    assert_eq!(o.status.code(), Some(2));
}

fn mode(l: f64, q: f64) -> ModeRecord {
    ModeRecord {
        omega0: 1.9e15,
        omega0_ev: 1.25,
        omega0_over_omega_p: 1.25 / 8.8,
        cavity_length_nm: l,
        q_total: q,
        q_rad: q * 1.01,
        q_abs: q * 101.0,
        q_ringdown: q,
        energy_u: 1.0,
        p_rad: 1.0,
        p_abs: 0.01,
        flux_split: FluxSplit { down: 0.5, up: 0.0, lateral: 0.5 },
        cavity_energy_fraction: 0.4,
        v_mode_per_width_nm2: 5000.0,
        decay_z_nm: Some(36.0),
        peak_count: 3,
        symmetry_rms: 0.0,
        flags: Vec::new(),
    }
}

fn write_point(dir: &Path, axis: SweepAxis, value: f64, q: f64) {
    let report = PointReport {
        axis,
        value,
        config_hash: format!("h{value}"),
        simulation_hash: format!("s{value}"),
        status: PointStatus::Ok,
        error: None,
        xi: 2000.0,
        temperature_k: None,
        candidates: Vec::new(),
        mode: Some(mode(value, q)),
        volume: None,
        cqed: None,
        emitter_node: None,
        mode_lost: false,
        perturbed: None,
    };
    let points = dir.join("points");
    std::fs::create_dir_all(&points).unwrap();
    std::fs::write(points.join(format!("h{value}.json")), serde_json::to_string(&report).unwrap()).unwrap();
}

#[test]
fn report_regenerates_length_tables() {
    let dir = tempfile::tempdir().unwrap();
    for (l, q) in [(300.0, 200.0), (320.0, 310.0), (340.0, 250.0)] {
        write_point(dir.path(), SweepAxis::CavityLength, l, q);
    }
    let o = run(&["report", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b = std::fs::read_to_string(dir.path().join("fig2b.csv")).unwrap();
    assert!(b.starts_with("cavity_length_nm,q\n"));
    let r = rows(&b);
    assert_eq!(r.len(), 3);
    assert_eq!(r[1], ["320", "310"]);
    assert!(dir.path().join("fig2a.csv").exists());
    assert!(dir.path().join("sweep.csv").exists());
}

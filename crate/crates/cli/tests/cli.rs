//! End-to-end runs of the `cbap` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cbap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbap")).args(args).output().expect("run cbap")
}

fn density_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/density.conf")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_overrides_to_a_single_point() {
    let cfg = density_config();
    let out = cbap(&["solve", "-c", cfg.to_str().unwrap(), "--lambda", "0.01", "--nu", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");
}

#[test]
fn sweep_writes_csv_with_empty_simulation_cells_when_disabled() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let cfg = density_config();
    let out = cbap(&["sweep", "-c", cfg.to_str().unwrap(), "--no-sim", "--nu", "1", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    let sim_col = headers.iter().position(|h| h == "sim_throughput_bps").unwrap();
    let model_col = headers.iter().position(|h| h == "model_throughput_bps").unwrap();
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 15);
    for r in &rows {
        assert!(r[sim_col].is_empty());
        assert!(r[model_col].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn sweep_to_stdout_when_no_destination() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.conf",
        "edca.w0 = 16\nedca.m = 6\nedca.m_prime = 6\ndti.t_bi = 0.1\ndti.t_bhi = 0.002\ndti.nu = 0.5\n\
         geometry.n_ap_sectors = 12\ngeometry.n_sta_sectors = 8\ngeometry.coverage_radius = 23.5\n\
         network.lambda = 0.01\nsim.n_reps = 2\nsim.n_bis = 3\nsim.warmup_bis = 1\n",
    );
    let out = cbap(&["sweep", "-c", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("lambda,nu,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn missing_key_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", "edca.w0 = 16\nedca.m = 6\n");
    let out = cbap(&["solve", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("edca.m_prime"));
}

#[test]
fn areas_partition_the_disk() {
    let cfg = density_config();
    let out = cbap(&["areas", "-c", cfg.to_str().unwrap(), "--nu", "1", "--lambda", "0.02"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let (r, total) = (row[2], row[8]);
    assert!((row[4..8].iter().sum::<f64>() - total).abs() < 1e-9 * total);
    assert!((total - std::f64::consts::PI * r * r).abs() < 1e-9 * total);
}

#[test]
fn geometry_validation_runs() {
    let out = cbap(&["validate-geometry", "--tuples", "3", "--samples", "20000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("checks"));
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = density_config();
    let run = |name: &str, seed: &str| {
        let csv = dir.path().join(name);
        let out = cbap(&["sweep", "-c", cfg.to_str().unwrap(), "--nu", "1", "--lambda", "0.02", "--reps", "2", "--seed", seed, "--out", csv.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(csv).unwrap()
    };
    let a = run("a.csv", "5");
    assert_eq!(a, run("b.csv", "5"));
    assert_ne!(a, run("c.csv", "6"));
}

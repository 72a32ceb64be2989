//! Grid evaluation and CSV output.

use std::fmt::Write as _;
use std::path::Path;

use cbap_core::analytical::{collision_system, metrics, ModelError};
use cbap_core::geometry::{group_counts, region_areas};
use cbap_core::simulator::{derive_seed, replicate, Estimate, SimConfig, TopologySource};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{GridPoint, SweepSpec};

/// Errors that abort a sweep (per-point failures are recorded instead).
#[derive(Debug, Error)]
pub enum SweepError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("CSV encoding failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot start the worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Analytical outputs at one grid point; fields are `None` when the solve failed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelRecord {
    pub converged: bool,
    pub iterations: Option<usize>,
    pub throughput_bps: Option<f64>,
    pub delay_s: Option<f64>,
    pub drop_rate: Option<f64>,
    pub p: Option<f64>,
    pub p_c1: Option<f64>,
    pub p_c2: Option<f64>,
    pub p_t: Option<f64>,
    pub error: Option<String>,
}

/// Simulated outputs (mean and 95% half-width over replications).
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub reps: usize,
    pub throughput_bps: Estimate,
    pub delay_s: Estimate,
    pub drop_rate: Estimate,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub point: GridPoint,
    pub n_sp: u32,
    pub p_e: f64,
    pub coverage_radius: Option<f64>,
    pub model: ModelRecord,
    pub sim: Option<SimRecord>,
}

/// All rows, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
}

/// Runtime options not stored in the spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

fn model_error_text(e: &ModelError) -> String {
    e.to_string()
}

/// Evaluates one grid point.
pub fn evaluate_point(spec: &SweepSpec, point: &GridPoint) -> SweepRecord {
    let mut record = SweepRecord {
        point: *point,
        n_sp: spec.n_sp,
        p_e: spec.p_e,
        coverage_radius: None,
        model: ModelRecord::default(),
        sim: None,
    };
    let dti = match spec.dti(point) {
        Ok(d) => d,
        Err(e) => {
            record.model.error = Some(model_error_text(&e));
            return record;
        }
    };
    let geo = match spec.geometry(point) {
        Ok(g) => g,
        Err(e) => {
            record.model.error = Some(e.to_string());
            return record;
        }
    };
    record.coverage_radius = Some(geo.coverage_radius);

    match region_areas(&geo) {
        Err(e) => record.model.error = Some(e.to_string()),
        Ok(areas) => {
            let counts = group_counts(point.lambda, &areas);
            match collision_system(&counts, &dti, &spec.params, spec.p_e, &spec.model) {
                Err(e) => record.model.error = Some(model_error_text(&e)),
                Ok(sol) => {
                    let m = &mut record.model;
                    m.converged = sol.converged;
                    m.iterations = Some(sol.iterations);
                    m.p = Some(sol.p);
                    m.p_c1 = Some(sol.p_c1);
                    m.p_c2 = Some(sol.p_c2);
                    m.p_t = Some(sol.p_t);
                    match metrics(&sol, &counts, &spec.params, spec.model.throughput_form) {
                        Ok(x) => {
                            m.throughput_bps = Some(x.throughput_bps);
                            m.delay_s = Some(x.delay_s);
                            m.drop_rate = Some(x.drop_rate);
                        }
                        Err(e) => m.error = Some(model_error_text(&e)),
                    }
                }
            }
        }
    }

    if spec.sim.enabled {
        let cfg = SimConfig { n_bis: spec.sim.n_bis, warmup_bis: spec.sim.warmup_bis, ..SimConfig::new(spec.params, dti, spec.p_e) };
        let seed = derive_seed(spec.sim.base_seed, point.index as u64);
        let r = replicate(TopologySource::Poisson { lambda: point.lambda, geo: &geo }, &cfg, spec.sim.n_reps, seed);
        record.sim = Some(SimRecord { reps: spec.sim.n_reps, throughput_bps: r.throughput_bps, delay_s: r.delay_s, drop_rate: r.drop_rate });
    }
    record
}

/// Evaluates the whole grid on a worker pool; rows come back in grid order
/// regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec, opts: RunOptions) -> Result<SweepResult, SweepError> {
    let grid = spec.grid();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.workers).build()?;
    let mut records: Vec<SweepRecord> = pool.install(|| grid.par_iter().map(|p| evaluate_point(spec, p)).collect());
    records.sort_by_key(|r| r.point.index);
    Ok(SweepResult { records })
}

/// CSV header, in output order.
pub const CSV_COLUMNS: [&str; 26] = [
    "lambda",
    "nu",
    "n_cbap",
    "n_sp",
    "n_ap_sectors",
    "n_sta_sectors",
    "p_e",
    "coverage_radius_m",
    "model_converged",
    "model_iterations",
    "model_throughput_bps",
    "model_delay_s",
    "model_drop_rate",
    "model_p",
    "model_p_c1",
    "model_p_c2",
    "model_p_t",
    "model_error",
    "sim_reps",
    "sim_throughput_bps",
    "sim_throughput_hw",
    "sim_delay_s",
    "sim_delay_hw",
    "sim_drop_rate",
    "sim_drop_hw",
    "sim_delay_samples",
];

/// Fixed numeric formatting: shortest round-trip decimal, no locale, empty
/// for missing or non-finite values.
fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => String::new(),
    }
}

fn row(r: &SweepRecord) -> Vec<String> {
    let m = &r.model;
    let mut out = vec![
        num(Some(r.point.lambda)),
        num(Some(r.point.nu)),
        r.point.n_cbap.to_string(),
        r.n_sp.to_string(),
        r.point.n_ap_sectors.to_string(),
        r.point.n_sta_sectors.to_string(),
        num(Some(r.p_e)),
        num(r.coverage_radius),
        m.converged.to_string(),
        m.iterations.map(|i| i.to_string()).unwrap_or_default(),
        num(m.throughput_bps),
        num(m.delay_s),
        num(m.drop_rate),
        num(m.p),
        num(m.p_c1),
        num(m.p_c2),
        num(m.p_t),
        m.error.clone().unwrap_or_default(),
    ];
    match &r.sim {
        Some(s) => out.extend([
            s.reps.to_string(),
            num(Some(s.throughput_bps.mean)),
            num(Some(s.throughput_bps.half_width)),
            num(Some(s.delay_s.mean)),
            num(Some(s.delay_s.half_width)),
            num(Some(s.drop_rate.mean)),
            num(Some(s.drop_rate.half_width)),
            s.delay_s.samples.to_string(),
        ]),
        None => out.extend(std::iter::repeat_n(String::new(), 8)),
    }
    out
}

/// Writes the result as CSV to any writer.
pub fn write_csv<W: std::io::Write>(result: &SweepResult, out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in &result.records {
        w.write_record(row(r))?;
    }
    w.flush().map_err(|source| SweepError::Io { path: "<csv>".into(), source })?;
    Ok(())
}

/// The CSV as a string.
pub fn to_csv_string(result: &SweepResult) -> Result<String, SweepError> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Writes the CSV to `path`.
pub fn write_csv_file(result: &SweepResult, path: &Path) -> Result<(), SweepError> {
    let file = std::fs::File::create(path).map_err(|source| SweepError::Io { path: path.display().to_string(), source })?;
    write_csv(result, std::io::BufWriter::new(file))
}

fn rel(a: Option<f64>, b: f64) -> String {
    match a {
        Some(a) if b.is_finite() && b != 0.0 => format!("{:+.1}%", (a / b - 1.0) * 100.0),
        _ => "-".into(),
    }
}

/// Human-readable model-vs-simulation table: one line per grid point with
/// throughput (Mb/s), delay (ms) and drop rate from both sides and the
/// model's relative deviation from the simulation.
pub fn comparison_report(result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8} {:>5} {:>4} {:>4} {:>4} | {:>9} {:>9} {:>7} | {:>8} {:>8} {:>7} | {:>7} {:>7} {:>7}",
        "lambda", "nu", "ncb", "nap", "ns", "S_model", "S_sim", "dS", "D_model", "D_sim", "dD", "drop_m", "drop_s", "dDrop"
    );
    for r in &result.records {
        let m = &r.model;
        let (ss, ds, dr) = match &r.sim {
            Some(x) => (x.throughput_bps.mean, x.delay_s.mean, x.drop_rate.mean),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        let f = |v: Option<f64>, scale: f64, prec: usize| v.map(|x| format!("{:.*}", prec, x * scale)).unwrap_or_else(|| "-".into());
        let g = |v: f64, scale: f64, prec: usize| if v.is_finite() { format!("{:.*}", prec, v * scale) } else { "-".into() };
        let _ = writeln!(
            s,
            "{:>8} {:>5} {:>4} {:>4} {:>4} | {:>9} {:>9} {:>7} | {:>8} {:>8} {:>7} | {:>7} {:>7} {:>7}{}",
            r.point.lambda,
            r.point.nu,
            r.point.n_cbap,
            r.point.n_ap_sectors,
            r.point.n_sta_sectors,
            f(m.throughput_bps, 1e-6, 1),
            g(ss, 1e-6, 1),
            rel(m.throughput_bps, ss),
            f(m.delay_s, 1e3, 3),
            g(ds, 1e3, 3),
            rel(m.delay_s, ds),
            f(m.drop_rate, 1.0, 4),
            g(dr, 1.0, 4),
            rel(m.drop_rate, dr),
            m.error.as_ref().map(|e| format!("  [{e}]")).unwrap_or_default(),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const BASE: &str = "
        edca.w0 = 16
        edca.m = 6
        edca.m_prime = 6
        dti.t_bi = 0.1
        dti.t_bhi = 0.002
        geometry.n_ap_sectors = 12
        geometry.n_sta_sectors = 8
        geometry.coverage_radius = 23.5
        sim.n_reps = 2
        sim.n_bis = 3
        sim.warmup_bis = 1
    ";

    #[test]
    fn single_point_gives_one_row() {
        let spec = parse_config(&format!("{BASE}\nnetwork.lambda = 0.01\ndti.nu = 0.5")).unwrap();
        let r = run_sweep(&spec, RunOptions { workers: 1 }).unwrap();
        assert_eq!(r.records.len(), 1);
        let csv = to_csv_string(&r).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let spec = parse_config(&format!("{BASE}\nsweep.lambda = 0.005, 0.02\nsweep.nu = 0.25, 1")).unwrap();
        let a = to_csv_string(&run_sweep(&spec, RunOptions { workers: 1 }).unwrap()).unwrap();
        let b = to_csv_string(&run_sweep(&spec, RunOptions { workers: 4 }).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn disabling_the_simulator_keeps_analytical_columns() {
        let text = format!("{BASE}\nsweep.lambda = 0.005, 0.02\ndti.nu = 0.5");
        let with = run_sweep(&parse_config(&text).unwrap(), RunOptions::default()).unwrap();
        let without = run_sweep(&parse_config(&format!("{text}\nsim.enabled = false")).unwrap(), RunOptions::default()).unwrap();
        let csv_a = to_csv_string(&with).unwrap();
        let csv_b = to_csv_string(&without).unwrap();
        for (a, b) in csv_a.lines().zip(csv_b.lines()).skip(1) {
            let a: Vec<&str> = a.split(',').collect();
            let b: Vec<&str> = b.split(',').collect();
            assert_eq!(a[..18], b[..18]);
            assert!(b[18..].iter().all(|c| c.is_empty()));
        }
    }

    #[test]
    fn failed_points_are_kept() {
        let mut spec = parse_config(&format!("{BASE}\nnetwork.lambda = 0.01\ndti.nu = 0.5\nsim.enabled = false")).unwrap();
        spec.model.max_iterations = 1;
        let r = run_sweep(&spec, RunOptions::default()).unwrap();
        assert_eq!(r.records.len(), 1);
        assert!(!r.records[0].model.converged);
        assert!(r.records[0].model.error.as_deref().unwrap().contains("converge"));
        assert!(to_csv_string(&r).unwrap().contains("false"));
    }
}

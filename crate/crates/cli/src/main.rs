use std::path::PathBuf;
use std::process::ExitCode;

use cbap_cli::config::{load_config, validate, Axis, SweepSpec};
use cbap_cli::sweep::{comparison_report, run_sweep, to_csv_string, write_csv_file, RunOptions};
use cbap_core::geometry::oracle::{validate_suite, SuiteOptions};
use cbap_core::geometry::{group_counts, region_areas};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cbap", version, about = "Directional CBAP analytical model, simulator and sweep driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long, short)]
    config: PathBuf,
    /// Override the station density (single value, stations per m²).
    #[arg(long)]
    lambda: Option<f64>,
    /// Override the CBAP share of the DTI (single value).
    #[arg(long)]
    nu: Option<f64>,
    /// Override the simulator base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of simulator replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Skip the simulator.
    #[arg(long)]
    no_sim: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytical model over the configured grid (no simulation).
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Run the simulator (and the model) over the configured grid and print a comparison.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full sweep and write CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// CSV destination; defaults to `output.path`, else stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also print the model-vs-simulation table to stderr.
        #[arg(long)]
        report: bool,
    },
    /// Print the overhearing region areas and expected group sizes.
    Areas {
        #[command(flatten)]
        common: Common,
    },
    /// Check the closed-form areas against quadrature and Monte Carlo.
    ValidateGeometry {
        #[arg(long, default_value_t = 50)]
        tuples: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = SuiteOptions::default().seed)]
        seed: u64,
    },
}

fn prepare(c: &Common, force_no_sim: bool) -> Result<SweepSpec, String> {
    let mut spec = load_config(&c.config).map_err(|e| e.to_string())?;
    if let Some(l) = c.lambda {
        spec.axes.insert(Axis::Lambda, vec![l]);
    }
    if let Some(n) = c.nu {
        spec.axes.insert(Axis::Nu, vec![n]);
    }
    if let Some(s) = c.seed {
        spec.sim.base_seed = s;
    }
    if let Some(r) = c.reps {
        spec.sim.n_reps = r;
    }
    if c.no_sim || force_no_sim {
        spec.sim.enabled = false;
    }
    validate(&spec).map_err(|e| e.to_string())?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Solve { common } => {
            let spec = prepare(&common, true)?;
            let result = run_sweep(&spec, RunOptions { workers: common.workers }).map_err(|e| e.to_string())?;
            print!("{}", comparison_report(&result));
        }
        Command::Simulate { common } => {
            let spec = prepare(&common, false)?;
            let result = run_sweep(&spec, RunOptions { workers: common.workers }).map_err(|e| e.to_string())?;
            print!("{}", comparison_report(&result));
        }
        Command::Sweep { common, out, report } => {
            let spec = prepare(&common, false)?;
            let result = run_sweep(&spec, RunOptions { workers: common.workers }).map_err(|e| e.to_string())?;
            if report {
                eprint!("{}", comparison_report(&result));
            }
            match out.or(spec.output.clone()) {
                Some(path) => {
                    write_csv_file(&result, &path).map_err(|e| e.to_string())?;
                    eprintln!("wrote {} rows to {}", result.records.len(), path.display());
                }
                None => print!("{}", to_csv_string(&result).map_err(|e| e.to_string())?),
            }
        }
        Command::Areas { common } => {
            let spec = prepare(&common, true)?;
            println!("n_ap_sectors,n_sta_sectors,radius_m,lambda,r1,r2,r3,r4,total,n_i1,n_i2,n_i3,n_i4");
            for p in spec.grid() {
                let geo = spec.geometry(&p).map_err(|e| e.to_string())?;
                let a = region_areas(&geo).map_err(|e| e.to_string())?;
                let g = group_counts(p.lambda, &a);
                println!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    p.n_ap_sectors, p.n_sta_sectors, geo.coverage_radius, p.lambda, a.r1, a.r2, a.r3, a.r4, a.total, g.n_i1, g.n_i2, g.n_i3, g.n_i4
                );
            }
        }
        Command::ValidateGeometry { tuples, samples, seed } => {
            let report = validate_suite(SuiteOptions { tuples, mc_samples: samples, seed, ..SuiteOptions::default() });
            for f in report.failures() {
                println!("FAIL {} tuple {}: closed {} reference {} score {:e}", f.name, f.tuple, f.closed_form, f.reference, f.score);
            }
            println!(
                "{} checks, worst quadrature rel. error {:e}, worst |z| {:.2}, retests {}",
                report.checks.len(),
                report.worst_quadrature(),
                report.worst_z(),
                report.retests()
            );
            if !report.all_passed() {
                return Err("geometry validation failed".into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

//! Command-line front end for the CBAP model and simulator: configuration
//! files, parameter sweeps over (λ, ν, N_CBAP, sector counts) and CSV output.

pub mod config;
pub mod sweep;

pub use config::{load_config, parse_config, Axis, ConfigError, GridPoint, SweepSpec};
pub use sweep::{comparison_report, run_sweep, to_csv_string, write_csv_file, RunOptions, SweepResult};

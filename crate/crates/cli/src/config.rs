//! Sweep configuration files.
//!
//! The format is line-oriented `key = value` text. Keys carry a dotted
//! section prefix (`edca.w0`, `dti.t_bi`, …); `#` starts a comment. Every key
//! may appear at most once and unknown keys are rejected. List-valued axes
//! (`sweep.*`) accept comma-separated values or an inclusive range
//! `start:stop:step`.
//!
//! | key | required | default | meaning |
//! |-----|----------|---------|---------|
//! | `edca.w0`, `edca.m`, `edca.m_prime` | yes | | contention window and stages |
//! | `edca.slot`, `edca.sifs`, `edca.difs`, `edca.delta` | no | reference values | s |
//! | `edca.t_rts`, `edca.t_cts`, `edca.t_ack`, `edca.t_payload` | no | reference values | frame durations, s |
//! | `edca.payload_bits` | no | reference value | bits per packet |
//! | `dti.t_bi`, `dti.t_bhi` | yes | | s |
//! | `dti.nu` | unless `sweep.nu` | | CBAP share of the DTI |
//! | `dti.n_cbap`, `dti.n_sp` | no | 3, 3 | allocation counts |
//! | `geometry.n_ap_sectors`, `geometry.n_sta_sectors` | yes | | sector counts |
//! | `geometry.coverage_radius` | unless `link.*` | | m |
//! | `link.tx_power_sta`, `link.tx_power_ap`, `link.pathloss_exponent`, `link.pathloss_norm`, `link.noise_power`, `link.snr_threshold` | all or none | | W, W, –, –, W, linear |
//! | `network.lambda` | unless `sweep.lambda` | | stations per m² |
//! | `model.p_e` | no | 0 | packet error probability |
//! | `model.damping`, `model.max_iterations`, `model.tolerance` | no | 0.5, 100000, 1e-12 | fixed-point solver |
//! | `model.ntx_form` | no | `whole_slot` | `whole_slot` or `printed` |
//! | `model.throughput_form` | no | `renewal` | `renewal` or `printed` |
//! | `sim.enabled` | no | true | run the simulator |
//! | `sim.n_reps`, `sim.seed` | no | 20, 1 | replications and base seed |
//! | `sim.n_bis`, `sim.warmup_bis` | no | 12, 2 | simulated and discarded BIs |
//! | `sweep.lambda`, `sweep.nu`, `sweep.n_cbap`, `sweep.n_ap_sectors`, `sweep.n_sta_sectors` | no | | axes |
//! | `sweep.max_points` | no | 100000 | cap on the grid size |
//! | `output.path` | no | | CSV destination |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use cbap_core::analytical::{DtiConfig, EdcaParams, ModelOptions, NtxForm, ThroughputForm};
use cbap_core::geometry::{LinkBudget, BeamGeometry};
use thiserror::Error;

/// Errors raised while loading a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

/// A sweepable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Axis {
    NApSectors,
    NStaSectors,
    NCbap,
    Nu,
    Lambda,
}

impl Axis {
    /// Axes in nesting order, outermost first.
    pub const ALL: [Axis; 5] = [Axis::NApSectors, Axis::NStaSectors, Axis::NCbap, Axis::Nu, Axis::Lambda];

    pub fn key(self) -> &'static str {
        match self {
            Axis::NApSectors => "n_ap_sectors",
            Axis::NStaSectors => "n_sta_sectors",
            Axis::NCbap => "n_cbap",
            Axis::Nu => "nu",
            Axis::Lambda => "lambda",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, Axis::NApSectors | Axis::NStaSectors | Axis::NCbap)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// How the coverage radius is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusSource {
    Fixed(f64),
    /// Derived per grid point from the link budget and sector counts.
    Budget(LinkBudget),
}

/// Base values of the swept parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasePoint {
    pub lambda: Option<f64>,
    pub nu: Option<f64>,
    pub n_cbap: u32,
    pub n_ap_sectors: u32,
    pub n_sta_sectors: u32,
}

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub enabled: bool,
    pub n_reps: usize,
    pub base_seed: u64,
    pub n_bis: u32,
    pub warmup_bis: u32,
}

/// A fully validated sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub params: EdcaParams,
    pub t_bi: f64,
    pub t_bhi: f64,
    pub n_sp: u32,
    pub radius: RadiusSource,
    pub p_e: f64,
    pub model: ModelOptions,
    pub base: BasePoint,
    /// Axis values; axes not listed take the base value.
    pub axes: BTreeMap<Axis, Vec<f64>>,
    pub max_points: usize,
    pub sim: SimSettings,
    pub output: Option<PathBuf>,
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub lambda: f64,
    pub nu: f64,
    pub n_cbap: u32,
    pub n_ap_sectors: u32,
    pub n_sta_sectors: u32,
}

impl SweepSpec {
    /// Values taken by `axis` (the base value if the axis is not swept).
    pub fn axis_values(&self, axis: Axis) -> Vec<f64> {
        if let Some(v) = self.axes.get(&axis) {
            return v.clone();
        }
        let base = match axis {
            Axis::Lambda => self.base.lambda,
            Axis::Nu => self.base.nu,
            Axis::NCbap => Some(self.base.n_cbap as f64),
            Axis::NApSectors => Some(self.base.n_ap_sectors as f64),
            Axis::NStaSectors => Some(self.base.n_sta_sectors as f64),
        };
        base.into_iter().collect()
    }

    /// Number of grid points.
    pub fn grid_size(&self) -> usize {
        Axis::ALL.iter().map(|&a| self.axis_values(a).len()).product()
    }

    /// The cartesian grid, `lambda` varying fastest.
    pub fn grid(&self) -> Vec<GridPoint> {
        let values: Vec<Vec<f64>> = Axis::ALL.iter().map(|&a| self.axis_values(a)).collect();
        let mut out = Vec::with_capacity(self.grid_size());
        let mut idx = [0usize; 5];
        if values.iter().any(|v| v.is_empty()) {
            return out;
        }
        loop {
            let v = |k: usize| values[k][idx[k]];
            out.push(GridPoint {
                index: out.len(),
                n_ap_sectors: v(0) as u32,
                n_sta_sectors: v(1) as u32,
                n_cbap: v(2) as u32,
                nu: v(3),
                lambda: v(4),
            });
            let mut k = 4;
            loop {
                idx[k] += 1;
                if idx[k] < values[k].len() {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    return out;
                }
                k -= 1;
            }
        }
    }

    /// DTI layout at a grid point.
    pub fn dti(&self, point: &GridPoint) -> Result<DtiConfig, cbap_core::analytical::ModelError> {
        DtiConfig::from_nu(self.t_bi, self.t_bhi, point.nu, point.n_cbap, self.n_sp)
    }

    /// Beam geometry at a grid point.
    pub fn geometry(&self, point: &GridPoint) -> Result<BeamGeometry, cbap_core::geometry::GeometryError> {
        let radius = match self.radius {
            RadiusSource::Fixed(r) => r,
            RadiusSource::Budget(b) => cbap_core::geometry::coverage_radius(&b, point.n_ap_sectors, point.n_sta_sectors)?,
        };
        BeamGeometry::new(point.n_ap_sectors, point.n_sta_sectors, radius)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "edca.w0",
    "edca.m",
    "edca.m_prime",
    "edca.slot",
    "edca.sifs",
    "edca.difs",
    "edca.delta",
    "edca.t_rts",
    "edca.t_cts",
    "edca.t_ack",
    "edca.t_payload",
    "edca.payload_bits",
    "dti.t_bi",
    "dti.t_bhi",
    "dti.nu",
    "dti.n_cbap",
    "dti.n_sp",
    "geometry.n_ap_sectors",
    "geometry.n_sta_sectors",
    "geometry.coverage_radius",
    "link.tx_power_sta",
    "link.tx_power_ap",
    "link.pathloss_exponent",
    "link.pathloss_norm",
    "link.noise_power",
    "link.snr_threshold",
    "network.lambda",
    "model.p_e",
    "model.damping",
    "model.max_iterations",
    "model.tolerance",
    "model.ntx_form",
    "model.throughput_form",
    "sim.enabled",
    "sim.n_reps",
    "sim.seed",
    "sim.n_bis",
    "sim.warmup_bis",
    "sweep.lambda",
    "sweep.nu",
    "sweep.n_cbap",
    "sweep.n_ap_sectors",
    "sweep.n_sta_sectors",
    "sweep.max_points",
    "output.path",
];

const LINK_KEYS: [&str; 6] = [
    "link.tx_power_sta",
    "link.tx_power_ap",
    "link.pathloss_exponent",
    "link.pathloss_norm",
    "link.noise_power",
    "link.snr_threshold",
];

/// Raw `key → value` pairs.
struct Raw(BTreeMap<String, String>);

impl Raw {
    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| ConfigError::InvalidValue { key: key.to_string(), message: format!("`{v}`: {e}") }),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }
}

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax { line: line_no, message: format!("expected `key = value`, got `{content}`") });
        };
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(ConfigError::Syntax { line: line_no, message: format!("key `{key}` has no value") });
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { line: line_no, key: key.to_string() });
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::DuplicateKey { line: line_no, key: key.to_string() });
        }
    }
    Ok(Raw(map))
}

/// Parses an axis: `a, b, c` or `start:stop:step` (inclusive of `stop` up to
/// rounding).
pub fn parse_axis(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |message: String| ConfigError::InvalidValue { key: key.to_string(), message };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("`{}`: {e}", s.trim())));
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(bad(format!("range `{value}` needs step > 0 and stop ≥ start")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Values are start + k·step, rounded to 12 significant decimals so that
        // e.g. 0.005:0.055:0.01 yields 0.015 rather than 0.015000000000000001.
        return Ok((0..=n).map(|k| round_sig(start + k as f64 * step)).collect());
    }
    if parts.len() != 1 {
        return Err(bad(format!("`{value}` is neither a list nor start:stop:step")));
    }
    value.split(',').map(num).collect()
}

fn round_sig(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let digits = 12 - x.abs().log10().ceil() as i32;
    let scale = 10f64.powi(digits);
    (x * scale).round() / scale
}

fn parse_form<T>(raw: &Raw, key: &str, options: &[(&str, T)], default: T) -> Result<T, ConfigError>
where
    T: Copy,
{
    match raw.str(key) {
        None => Ok(default),
        Some(v) => options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| ConfigError::InvalidValue {
            key: key.to_string(),
            message: format!("`{v}`: expected one of {}", options.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")),
        }),
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<SweepSpec, ConfigError> {
    let raw = tokenize(text)?;
    let reference = EdcaParams::reference();
    let params = EdcaParams {
        w0: raw.required("edca.w0")?,
        m: raw.required("edca.m")?,
        m_prime: raw.required("edca.m_prime")?,
        slot_sigma: raw.or("edca.slot", reference.slot_sigma)?,
        sifs: raw.or("edca.sifs", reference.sifs)?,
        difs: raw.or("edca.difs", reference.difs)?,
        delta: raw.or("edca.delta", reference.delta)?,
        t_rts: raw.or("edca.t_rts", reference.t_rts)?,
        t_cts: raw.or("edca.t_cts", reference.t_cts)?,
        t_ack: raw.or("edca.t_ack", reference.t_ack)?,
        t_payload: raw.or("edca.t_payload", reference.t_payload)?,
        payload_bits: raw.or("edca.payload_bits", reference.payload_bits)?,
    };
    let t_bi: f64 = raw.required("dti.t_bi")?;
    let t_bhi: f64 = raw.required("dti.t_bhi")?;
    let n_ap_sectors: u32 = raw.required("geometry.n_ap_sectors")?;
    let n_sta_sectors: u32 = raw.required("geometry.n_sta_sectors")?;

    let link_given: Vec<&str> = LINK_KEYS.iter().copied().filter(|k| raw.str(k).is_some()).collect();
    let radius = match (raw.parse::<f64>("geometry.coverage_radius")?, link_given.len()) {
        (Some(r), 0) => RadiusSource::Fixed(r),
        (None, n) if n == LINK_KEYS.len() => RadiusSource::Budget(LinkBudget {
            tx_power_sta: raw.required("link.tx_power_sta")?,
            tx_power_ap: raw.required("link.tx_power_ap")?,
            pathloss_exponent: raw.required("link.pathloss_exponent")?,
            pathloss_norm: raw.required("link.pathloss_norm")?,
            noise_power: raw.required("link.noise_power")?,
            snr_threshold: raw.required("link.snr_threshold")?,
        }),
        (Some(_), _) => {
            return Err(ConfigError::Validation(vec![
                "give either geometry.coverage_radius or the link budget, not both".to_string(),
            ]))
        }
        (None, 0) => return Err(ConfigError::MissingKey("geometry.coverage_radius".to_string())),
        (None, _) => {
            let missing = LINK_KEYS.iter().find(|k| raw.str(k).is_none()).expect("partial budget");
            return Err(ConfigError::MissingKey(missing.to_string()));
        }
    };

    let model = ModelOptions {
        damping: raw.or("model.damping", 0.5)?,
        max_iterations: raw.or("model.max_iterations", 100_000)?,
        tolerance: raw.or("model.tolerance", 1e-12)?,
        ntx_form: parse_form(&raw, "model.ntx_form", &[("whole_slot", NtxForm::WholeSlotFreeze), ("printed", NtxForm::Printed)], NtxForm::WholeSlotFreeze)?,
        throughput_form: parse_form(
            &raw,
            "model.throughput_form",
            &[("renewal", ThroughputForm::Renewal), ("printed", ThroughputForm::Printed)],
            ThroughputForm::Renewal,
        )?,
    };

    let mut axes = BTreeMap::new();
    for axis in Axis::ALL {
        let key = format!("sweep.{}", axis.key());
        if let Some(v) = raw.str(&key) {
            axes.insert(axis, parse_axis(&key, v)?);
        }
    }

    let spec = SweepSpec {
        params,
        t_bi,
        t_bhi,
        n_sp: raw.or("dti.n_sp", 3)?,
        radius,
        p_e: raw.or("model.p_e", 0.0)?,
        model,
        base: BasePoint {
            lambda: raw.parse("network.lambda")?,
            nu: raw.parse("dti.nu")?,
            n_cbap: raw.or("dti.n_cbap", 3)?,
            n_ap_sectors,
            n_sta_sectors,
        },
        axes,
        max_points: raw.or("sweep.max_points", 100_000)?,
        sim: SimSettings {
            enabled: raw.or("sim.enabled", true)?,
            n_reps: raw.or("sim.n_reps", 20)?,
            base_seed: raw.or("sim.seed", 1)?,
            n_bis: raw.or("sim.n_bis", 12)?,
            warmup_bis: raw.or("sim.warmup_bis", 2)?,
        },
        output: raw.str("output.path").map(PathBuf::from),
    };
    validate(&spec)?;
    Ok(spec)
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<SweepSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

/// Checks every invariant and reports all violations together.
pub fn validate(spec: &SweepSpec) -> Result<(), ConfigError> {
    let mut errors = Vec::new();
    if let Err(e) = spec.params.validate() {
        errors.push(format!("EdcaParams: {e}"));
    }
    if !(spec.t_bi > 0.0 && spec.t_bhi >= 0.0 && spec.t_bhi < spec.t_bi) {
        errors.push(format!("DtiConfig: need 0 ≤ t_bhi < t_bi (got t_bi = {}, t_bhi = {})", spec.t_bi, spec.t_bhi));
    }
    if !(0.0..1.0).contains(&spec.p_e) {
        errors.push(format!("model.p_e must lie in [0, 1) (got {})", spec.p_e));
    }
    if !(spec.model.damping > 0.0 && spec.model.damping <= 1.0) {
        errors.push(format!("model.damping must lie in (0, 1] (got {})", spec.model.damping));
    }
    if !(spec.model.tolerance > 0.0) || spec.model.max_iterations == 0 {
        errors.push("model.tolerance and model.max_iterations must be positive".to_string());
    }
    match spec.radius {
        RadiusSource::Fixed(r) if !(r > 0.0 && r.is_finite()) => {
            errors.push(format!("geometry.coverage_radius must be positive (got {r})"))
        }
        RadiusSource::Budget(b) => {
            if let Err(e) = b.validate() {
                errors.push(format!("LinkBudget: {e}"));
            }
        }
        _ => {}
    }
    if spec.axis_values(Axis::Lambda).is_empty() {
        errors.push("no station density: set network.lambda or sweep.lambda".to_string());
    }
    if spec.axis_values(Axis::Nu).is_empty() {
        errors.push("no CBAP share: set dti.nu or sweep.nu".to_string());
    }
    for axis in Axis::ALL {
        for v in spec.axis_values(axis) {
            let ok = match axis {
                Axis::Lambda => v >= 0.0 && v.is_finite(),
                Axis::Nu => v > 0.0 && v <= 1.0,
                Axis::NCbap => v >= 1.0,
                Axis::NApSectors | Axis::NStaSectors => v >= 2.0,
            };
            if !ok || (axis.is_integer() && v.fract() != 0.0) {
                errors.push(format!("{axis} value {v} is out of range"));
            }
        }
    }
    // DTI invariant at every ν (t_cbap = ν·(t_bi − t_bhi) ≤ t_bi − t_bhi).
    if errors.is_empty() {
        for nu in spec.axis_values(Axis::Nu) {
            for n_cbap in spec.axis_values(Axis::NCbap) {
                if let Err(e) = DtiConfig::from_nu(spec.t_bi, spec.t_bhi, nu, n_cbap as u32, spec.n_sp) {
                    errors.push(format!("DtiConfig at nu = {nu}: {e}"));
                }
            }
        }
    }
    if spec.sim.enabled && spec.sim.n_reps < 2 {
        errors.push(format!("sim.n_reps must be at least 2 (got {})", spec.sim.n_reps));
    }
    if spec.sim.n_bis <= spec.sim.warmup_bis {
        errors.push(format!("sim.n_bis ({}) must exceed sim.warmup_bis ({})", spec.sim.n_bis, spec.sim.warmup_bis));
    }
    let size = spec.grid_size();
    if size == 0 {
        errors.push("the sweep grid is empty".to_string());
    }
    if size > spec.max_points {
        errors.push(format!("grid has {size} points, above sweep.max_points = {}", spec.max_points));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Validation(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = "
        edca.w0 = 16
        edca.m = 6
        edca.m_prime = 6
        dti.t_bi = 0.1
        dti.t_bhi = 0.002
        dti.nu = 0.5
        geometry.n_ap_sectors = 12
        geometry.n_sta_sectors = 8
        geometry.coverage_radius = 23.5
        network.lambda = 0.01
    ";

    #[test]
    fn minimal_file_echoes_reference_values() {
        let spec = parse_config(MINIMAL).unwrap();
        assert_eq!(spec.params, EdcaParams::reference());
        assert_eq!(spec.dti(&spec.grid()[0]).unwrap(), DtiConfig::reference(0.5));
        assert_eq!(spec.p_e, 0.0);
        assert_eq!(spec.sim.n_reps, 20);
        assert_eq!(spec.model.damping, 0.5);
        assert_eq!(spec.grid_size(), 1);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("edca.m_prime = 6", "");
        match parse_config(&text) {
            Err(ConfigError::MissingKey(k)) => assert_eq!(k, "edca.m_prime"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(matches!(parse_config(&format!("{MINIMAL}\nedca.cw = 3")), Err(ConfigError::UnknownKey { key, .. }) if key == "edca.cw"));
        assert!(matches!(parse_config(&format!("{MINIMAL}\nedca.w0 = 8")), Err(ConfigError::DuplicateKey { .. })));
        assert!(matches!(parse_config(&format!("{MINIMAL}\njunk")), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn dti_violation_names_the_invariant_and_all_errors_are_listed() {
        let text = MINIMAL.replace("dti.nu = 0.5", "dti.nu = 1.2").replace("edca.w0 = 16", "edca.w0 = 1");
        match parse_config(&text) {
            Err(ConfigError::Validation(errs)) => {
                assert!(errs.iter().any(|e| e.contains("w0")), "{errs:?}");
                assert!(errs.iter().any(|e| e.contains("nu")), "{errs:?}");
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("dti.t_bhi = 0.002", "dti.t_bhi = 0.0").replace("dti.nu = 0.5", "dti.nu = 1.0000001");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("nu"), "{err}");
    }

    #[test]
    fn axes_and_grid_order() {
        let text = format!("{MINIMAL}\nsweep.lambda = 0.005:0.055:0.01\nsweep.nu = 0.25, 0.5, 0.75, 1");
        let spec = parse_config(&text).unwrap();
        let grid = spec.grid();
        assert_eq!(grid.len(), 24);
        assert_eq!(spec.axis_values(Axis::Lambda), vec![0.005, 0.015, 0.025, 0.035, 0.045, 0.055]);
        assert_eq!((grid[0].nu, grid[0].lambda), (0.25, 0.005));
        assert_eq!((grid[1].nu, grid[1].lambda), (0.25, 0.015));
        assert_eq!((grid[6].nu, grid[6].lambda), (0.5, 0.005));
        assert!(grid.iter().enumerate().all(|(k, p)| p.index == k));
    }

    #[test]
    fn link_budget_must_be_complete() {
        let text = MINIMAL.replace("geometry.coverage_radius = 23.5", "link.tx_power_sta = 0.01");
        assert!(matches!(parse_config(&text), Err(ConfigError::MissingKey(k)) if k == "link.tx_power_ap"));
    }

    #[test]
    fn grid_cap_is_enforced() {
        let text = format!("{MINIMAL}\nsweep.lambda = 0.001:0.1:0.001\nsweep.max_points = 50");
        assert!(matches!(parse_config(&text), Err(ConfigError::Validation(_))));
    }
}

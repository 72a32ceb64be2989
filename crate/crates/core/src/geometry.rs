//! Directional-beam interference geometry.
//!
//! The AP sits at the origin of a disk of radius `R`. Every station points a
//! single "pizza-slice" beam of width `θ_S` at the AP; the AP listens
//! quasi-omnidirectionally and answers through one of `N_AP` sectors of width
//! `θ_AP`. Two stations hear each other's uplink frames only when each lies in
//! the other's main lobe, which reduces to the angular condition
//! `φ ∈ [φ_lim, 2π − φ_lim]` in the frame where the target sits at phase 0.
//!
//! Hearing is purely angular inside the disk: path-loss attenuation within a
//! beam is not used to classify hearers.
//!
//! Closed forms are provided for every area; [`oracle`] holds the independent
//! quadrature and Monte Carlo paths they are checked against.

pub mod oracle;

use std::f64::consts::{PI, TAU};

use thiserror::Error;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Errors raised by geometry constructors and evaluators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("sector count {name} = {value} must be at least 2")]
    SectorCount { name: &'static str, value: u32 },
    #[error("{name} must be strictly positive and finite (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("beam width {name} = {value} exceeds π")]
    WidthTooLarge { name: &'static str, value: f64 },
    #[error("path-loss exponent must be at least 2 (got {0})")]
    PathLossExponent(f64),
    #[error("target and other station both coincide with the AP")]
    DegenerateTarget,
    #[error("region {name} is negative ({value:e} m²): inconsistent area integration")]
    NegativeRegion { name: &'static str, value: f64 },
}

/// Antenna sectorisation of the AP and the stations plus the coverage radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    /// Number of AP sectors `N_AP`.
    pub n_ap_sectors: u32,
    /// Number of station sectors `N_S`.
    pub n_sta_sectors: u32,
    /// AP beam width `θ_AP = 2π/N_AP`.
    pub theta_ap: f64,
    /// Station beam width `θ_S = 2π/N_S`.
    pub theta_s: f64,
    /// Coverage radius `R` in meters.
    pub coverage_radius: f64,
}

impl BeamGeometry {
    /// Builds a geometry from sector counts and a coverage radius.
    pub fn new(n_ap_sectors: u32, n_sta_sectors: u32, coverage_radius: f64) -> Result<Self, GeometryError> {
        if n_ap_sectors < 2 {
            return Err(GeometryError::SectorCount { name: "n_ap_sectors", value: n_ap_sectors });
        }
        if n_sta_sectors < 2 {
            return Err(GeometryError::SectorCount { name: "n_sta_sectors", value: n_sta_sectors });
        }
        check_positive("coverage_radius", coverage_radius)?;
        Ok(Self {
            n_ap_sectors,
            n_sta_sectors,
            theta_ap: TAU / n_ap_sectors as f64,
            theta_s: TAU / n_sta_sectors as f64,
            coverage_radius,
        })
    }

    /// Builds a geometry directly from beam widths in `(0, π]`.
    ///
    /// Sector counts are set to the nominal `round(2π/θ)`; they only enter
    /// antenna gains, while every area uses the widths given here. This is
    /// used to sweep continuous widths in oracle checks.
    pub fn from_widths(theta_ap: f64, theta_s: f64, coverage_radius: f64) -> Result<Self, GeometryError> {
        check_positive("theta_ap", theta_ap)?;
        check_positive("theta_s", theta_s)?;
        check_positive("coverage_radius", coverage_radius)?;
        for (name, v) in [("theta_ap", theta_ap), ("theta_s", theta_s)] {
            if v > PI + 1e-12 {
                return Err(GeometryError::WidthTooLarge { name, value: v });
            }
        }
        let nominal = |t: f64| ((TAU / t).round() as u32).max(2);
        Ok(Self {
            n_ap_sectors: nominal(theta_ap),
            n_sta_sectors: nominal(theta_s),
            theta_ap: theta_ap.min(PI),
            theta_s: theta_s.min(PI),
            coverage_radius,
        })
    }

    /// Main-lobe gain of a station antenna (sector count).
    pub fn sta_gain(&self) -> f64 {
        self.n_sta_sectors as f64
    }

    /// Main-lobe gain of the AP antenna when transmitting directionally.
    pub fn ap_gain(&self) -> f64 {
        self.n_ap_sectors as f64
    }

    /// Area of the coverage disk, `πR²`.
    pub fn disk_area(&self) -> f64 {
        PI * self.coverage_radius * self.coverage_radius
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), GeometryError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::NonPositive { name, value })
    }
}

/// Transmit powers and propagation/noise terms of the link budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Station transmit power, W.
    pub tx_power_sta: f64,
    /// AP transmit power, W.
    pub tx_power_ap: f64,
    /// Path-loss exponent `η`.
    pub pathloss_exponent: f64,
    /// Path-loss normalisation `A`.
    pub pathloss_norm: f64,
    /// Noise power `N = k·T₀·F·W`, W.
    pub noise_power: f64,
    /// Linear SNR decoding threshold `γ_th`.
    pub snr_threshold: f64,
}

impl LinkBudget {
    /// Validates the budget invariants.
    pub fn validate(&self) -> Result<(), GeometryError> {
        check_positive("tx_power_sta", self.tx_power_sta)?;
        check_positive("tx_power_ap", self.tx_power_ap)?;
        check_positive("pathloss_norm", self.pathloss_norm)?;
        check_positive("noise_power", self.noise_power)?;
        check_positive("snr_threshold", self.snr_threshold)?;
        if !(self.pathloss_exponent >= 2.0 && self.pathloss_exponent.is_finite()) {
            return Err(GeometryError::PathLossExponent(self.pathloss_exponent));
        }
        Ok(())
    }

    /// Uplink `P_tx·g_tx·g_rx`: station beam towards an AP listening with unit gain.
    fn uplink_product(&self, n_sta_sectors: u32) -> f64 {
        self.tx_power_sta * n_sta_sectors as f64
    }

    /// Downlink `P_tx·g_tx·g_rx`: AP sector towards a station beam.
    fn downlink_product(&self, n_ap_sectors: u32, n_sta_sectors: u32) -> f64 {
        self.tx_power_ap * n_ap_sectors as f64 * n_sta_sectors as f64
    }
}

/// Thermal noise power `k·T₀·F·W` for a noise figure in dB and a bandwidth in Hz.
pub fn noise_power(noise_figure_db: f64, bandwidth_hz: f64, temperature_k: f64) -> f64 {
    BOLTZMANN * temperature_k * 10f64.powf(noise_figure_db / 10.0) * bandwidth_hz
}

/// Maximum range for one link direction, `(P_tx·g_tx·g_rx / (γ_th·A·N))^{1/η}`.
fn range_for(product: f64, budget: &LinkBudget) -> Result<f64, GeometryError> {
    let arg = product / (budget.snr_threshold * budget.pathloss_norm * budget.noise_power);
    check_positive("range radicand", arg)?;
    Ok(arg.powf(1.0 / budget.pathloss_exponent))
}

/// Coverage radius: the most stringent of the uplink and downlink ranges.
pub fn coverage_radius(budget: &LinkBudget, n_ap_sectors: u32, n_sta_sectors: u32) -> Result<f64, GeometryError> {
    budget.validate()?;
    let up = range_for(budget.uplink_product(n_sta_sectors), budget)?;
    let down = range_for(budget.downlink_product(n_ap_sectors, n_sta_sectors), budget)?;
    Ok(up.min(down))
}

/// Back-solves the SNR threshold that makes [`coverage_radius`] equal `radius`.
///
/// `budget.snr_threshold` is ignored. The limiting direction is the one with
/// the smaller `P_tx·g_tx·g_rx` product.
pub fn snr_threshold_for_radius(
    budget: &LinkBudget,
    n_ap_sectors: u32,
    n_sta_sectors: u32,
    radius: f64,
) -> Result<f64, GeometryError> {
    check_positive("radius", radius)?;
    let product = budget
        .uplink_product(n_sta_sectors)
        .min(budget.downlink_product(n_ap_sectors, n_sta_sectors));
    let gamma = product / (budget.pathloss_norm * budget.noise_power * radius.powf(budget.pathloss_exponent));
    check_positive("snr_threshold", gamma)?;
    Ok(gamma)
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Minimum phase at which a station at distance `d_i` shares beams with a
/// target at `(d_t, 0)`: `π − θ_S/2 − asin((min/max)·sin(θ_S/2))`.
pub fn phi_lim(d_i: f64, d_t: f64, theta_s: f64) -> Result<f64, GeometryError> {
    let lo = d_i.min(d_t);
    let hi = d_i.max(d_t);
    if hi <= 0.0 {
        return Err(GeometryError::DegenerateTarget);
    }
    Ok(phi_lim_unchecked(lo / hi, theta_s))
}

/// [`phi_lim`] from the distance ratio `min/max ∈ [0, 1]`.
#[inline]
fn phi_lim_unchecked(ratio: f64, theta_s: f64) -> f64 {
    let half = 0.5 * theta_s;
    PI - half - (ratio * half.sin()).clamp(-1.0, 1.0).asin()
}

/// Whether a station at polar `(d_i, φ)` overhears the uplink of a target at
/// `(d_t, 0)` (and, by symmetry, vice versa).
pub fn hears_uplink(d_t: f64, d_i: f64, phi: f64, theta_s: f64) -> Result<bool, GeometryError> {
    let lim = phi_lim(d_i, d_t, theta_s)?;
    let phi = normalize_angle(phi);
    Ok(phi >= lim && phi <= TAU - lim)
}

/// Whether a station at phase `φ` (target frame) lies in the AP sector
/// `[φ_AP − θ_AP, φ_AP]` that covers the target.
pub fn hears_downlink(phi_ap: f64, phi: f64, theta_ap: f64) -> bool {
    let rel = normalize_angle(phi - (phi_ap - theta_ap));
    rel <= theta_ap
}

/// Antiderivative of `r·asin(a·r)`.
fn prim_inner(r: f64, a: f64) -> f64 {
    let ar = (a * r).min(1.0);
    (0.5 * r * r - 0.25 / (a * a)) * ar.asin() + r / (4.0 * a) * (1.0 - ar * ar).max(0.0).sqrt()
}

/// Antiderivative of `r·asin(c/r)` for `r ≥ c`.
fn prim_outer(r: f64, c: f64) -> f64 {
    let q = (c / r).min(1.0);
    0.5 * r * r * q.asin() + 0.5 * c * (r * r - c * c).max(0.0).sqrt()
}

/// Area (m²) of the disk whose stations overhear the uplink of a target at
/// distance `d_t`: `πR² − 2∫₀ᴿ φ_lim(r)·r dr`, evaluated in closed form.
pub fn area_uplink(d_t: f64, radius: f64, theta_s: f64) -> f64 {
    let s = (0.5 * theta_s).sin();
    let a = s / d_t;
    // Inner part r < d_t: integrand asin(r·s/d_t)·r; outer part r > d_t: asin(d_t·s/r)·r.
    let inner = prim_inner(d_t, a) - prim_inner(0.0, a);
    let outer = prim_outer(radius, d_t * s) - prim_outer(d_t, d_t * s);
    let area = 0.5 * theta_s * radius * radius + 2.0 * (inner + outer);
    area.clamp(0.0, PI * radius * radius)
}

/// Expected uplink-hearing area with the target uniform on the disk,
/// `R²·(θ_S − θ_S/(4 sin²(θ_S/2)) + cos(θ_S/2)/(2 sin(θ_S/2)))`.
pub fn expected_area_uplink(radius: f64, theta_s: f64) -> f64 {
    let half = 0.5 * theta_s;
    let s = half.sin();
    radius * radius * (theta_s - theta_s / (4.0 * s * s) + half.cos() / (2.0 * s))
}

/// Downlink-hearing area: the AP sector covering the target, `θ_AP·R²/2`.
pub fn area_downlink(radius: f64, theta_ap: f64) -> f64 {
    0.5 * theta_ap * radius * radius
}

/// One half of the both-directions overlap: `∫₀ᴿ max(0, φ − φ_lim(r))·r dr`
/// where `φ` is the angular extent of the AP sector on one side of the target.
fn overlap_half(d_t: f64, phi: f64, radius: f64, theta_s: f64) -> f64 {
    let half = 0.5 * theta_s;
    let s = half.sin();
    // The integrand is asin(ratio·s) − c2 where positive.
    let c2 = PI - half - phi;
    if c2 >= half {
        return 0.0;
    }
    let c3 = c2.sin() / s;
    let lo = (d_t * c3).max(0.0);
    let hi = if c3 > 0.0 { (d_t / c3).min(radius) } else { radius };
    let a = s / d_t;
    let c = d_t * s;
    let inner = prim_inner(d_t, a) - prim_inner(lo, a);
    let outer = prim_outer(hi, c) - prim_outer(d_t, c);
    (inner + outer - 0.5 * c2 * (hi * hi - lo * lo)).max(0.0)
}

/// Area (m²) of stations overhearing both the target's uplink and the AP's
/// downlink towards it, for a target at distance `d_t` and in-sector phase
/// `φ_AP ∈ [0, θ_AP]`.
pub fn area_both(d_t: f64, phi_ap: f64, radius: f64, geo: &BeamGeometry) -> f64 {
    overlap_half(d_t, phi_ap, radius, geo.theta_s) + overlap_half(d_t, geo.theta_ap - phi_ap, radius, geo.theta_s)
}

/// Expected both-directions area with the target uniform on the disk and
/// `φ_AP` uniform on `[0, θ_AP]`.
///
/// Exchanging the order of integration reduces the triple average to
/// `(R²/θ_AP)∫₀¹ t·max(0, θ_AP − π + θ_S/2 + asin(t·sin(θ_S/2)))² dt`
/// (both sub-integrals contribute equally), which integrates in closed form.
pub fn expected_area_both(radius: f64, geo: &BeamGeometry) -> f64 {
    let half = 0.5 * geo.theta_s;
    let s = half.sin();
    let c = PI - half - geo.theta_ap;
    if c >= half {
        return 0.0;
    }
    let w0 = c.max(0.0);
    // Substituting w = asin(t·s): ∫ sin(2w)/2·(w − c)² dw / s².
    let g = |w: f64| {
        let y = w - c;
        let (s2, c2) = (2.0 * w).sin_cos();
        -0.25 * c2 * y * y + 0.25 * s2 * y + 0.125 * c2
    };
    (radius * radius / geo.theta_ap * (g(half) - g(w0)) / (s * s)).max(0.0)
}

/// Expected areas of the four overhearing regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionAreas {
    /// Overhear uplink only.
    pub r1: f64,
    /// Overhear downlink only.
    pub r2: f64,
    /// Overhear both.
    pub r3: f64,
    /// Overhear neither.
    pub r4: f64,
    /// Disk area `πR²`.
    pub total: f64,
}

impl RegionAreas {
    /// Components as an array `[r1, r2, r3, r4]`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.r1, self.r2, self.r3, self.r4]
    }
}

/// Absolute slack (relative to `πR²`) below which a negative region is
/// treated as round-off and clipped to zero.
const REGION_SLACK: f64 = 1e-9;

/// Decomposes the disk into the four overhearing regions.
pub fn region_areas(geo: &BeamGeometry) -> Result<RegionAreas, GeometryError> {
    let radius = geo.coverage_radius;
    let total = geo.disk_area();
    let e_up = expected_area_uplink(radius, geo.theta_s);
    let down = area_downlink(radius, geo.theta_ap);
    let both = expected_area_both(radius, geo);
    let raw = [e_up - both, down - both, both, total - e_up - down + both];
    let names = ["r1", "r2", "r3", "r4"];
    let mut r = [0.0; 4];
    for k in 0..4 {
        if raw[k] < -REGION_SLACK * total {
            return Err(GeometryError::NegativeRegion { name: names[k], value: raw[k] });
        }
        r[k] = raw[k].max(0.0);
    }
    Ok(RegionAreas { r1: r[0], r2: r[1], r3: r[2], r4: total - r[0] - r[1] - r[2], total })
}

/// Expected numbers of other stations in each overhearing group.
///
/// Under a Poisson point process the reduced Palm distribution equals the
/// original one, so the counts are `λ·r_ℓ` with no self-exclusion term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupCounts {
    /// Hear the target's uplink only.
    pub n_i1: f64,
    /// Hear the downlink towards the target only.
    pub n_i2: f64,
    /// Hear both directions.
    pub n_i3: f64,
    /// Hear neither.
    pub n_i4: f64,
    /// Expected total station count entering the same-slot access term.
    pub n_total: f64,
}

impl GroupCounts {
    /// Counts for a fixed population of `n` stations that all hear each other.
    pub fn full_hearing(n: u32) -> Self {
        Self { n_i3: n.saturating_sub(1) as f64, n_total: n as f64, ..Self::default() }
    }

    /// Counts for a lone station.
    pub fn lone() -> Self {
        Self { n_total: 1.0, ..Self::default() }
    }

    /// Sum of the four group counts.
    pub fn others(&self) -> f64 {
        self.n_i1 + self.n_i2 + self.n_i3 + self.n_i4
    }
}

/// Group counts `n_{I,ℓ} = λ·r_ℓ` with total `λπR²`.
pub fn group_counts(lambda: f64, areas: &RegionAreas) -> GroupCounts {
    GroupCounts {
        n_i1: lambda * areas.r1,
        n_i2: lambda * areas.r2,
        n_i3: lambda * areas.r3,
        n_i4: lambda * areas.r4,
        n_total: lambda * areas.total,
    }
}

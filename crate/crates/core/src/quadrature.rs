//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Used as the independent reference path for every closed-form area in
//! [`crate::geometry`]. The integrator repeatedly bisects the subinterval
//! with the largest error estimate, so kinks in the integrand (the
//! `max(0, ·)` clips of the overlap integrals) are resolved by refinement
//! rather than by knowing where they are.

/// Gauss–Kronrod 15-point abscissae on [0, 1] (symmetric about 0).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

/// Kronrod weights matching [`XGK`].
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss 7-point weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Absolute error target.
    pub abs_tol: f64,
    /// Relative error target (relative to the integral estimate).
    pub rel_tol: f64,
    /// Maximum number of subintervals kept by the global refinement.
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

/// One 15-point Kronrod evaluation on [a, b]; returns (estimate, error).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integrates `f` over [a, b] by globally adaptive bisection.
///
/// The interval with the largest error estimate is bisected until the summed
/// error falls below `max(abs_tol, rel_tol·|I|)` or the interval budget is
/// exhausted (in which case the best estimate is returned).
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> f64 {
    if a == b {
        return 0.0;
    }
    // Start from four panels so a single lucky panel cannot hide structure.
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|k| {
            let lo = a + (b - a) * k as f64 / 4.0;
            let hi = a + (b - a) * (k + 1) as f64 / 4.0;
            let (v, e) = gk15(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) || parts.len() >= opts.max_intervals {
            return total;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = parts[idx];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return total;
        }
        let (lv, le) = gk15(&mut f, lo, mid);
        let (rv, re) = gk15(&mut f, mid, hi);
        parts[idx] = (lo, mid, lv, le);
        parts.push((mid, hi, rv, re));
    }
}

/// [`integrate`] with default options.
pub fn integrate_default<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    integrate(f, a, b, QuadOptions::default())
}

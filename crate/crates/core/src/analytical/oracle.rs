//! Independent reference computations for the analytical model.
//!
//! The closed forms in [`crate::analytical`] rely on the structure of the two
//! chains (geometric stage weights, linear counter profiles, visit counts per
//! cycle). The oracles here make no such use: they build the explicit
//! transition matrices and solve `πP = π, Σπ = 1` with a dense LU
//! factorisation, or enumerate series term by term.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    delay, macro_chain, stage_delay, transmission_chain, EdcaParams, ModelError, ModelSolution, TxChain,
};

/// Stationary distribution of the row-stochastic matrix `p`.
///
/// Solves `(Pᵀ − I)π = 0` with the last equation replaced by `Σπ = 1`.
pub fn stationary(p: &DMatrix<f64>) -> DVector<f64> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    a.lu().solve(&rhs).expect("irreducible chain has a unique stationary vector")
}

/// State layout of the explicit backoff chain: `(i, k)` ↦ flat index.
fn macro_offsets(params: &EdcaParams) -> Vec<usize> {
    let mut off = Vec::with_capacity(params.m as usize + 2);
    let mut acc = 0;
    for i in 0..=params.m {
        off.push(acc);
        acc += params.window(i) as usize;
    }
    off.push(acc);
    off
}

/// Explicit backoff chain over states `(i, k)`:
/// - `(i, k) → (i, k − 1)` for `k ≥ 1`;
/// - from `(i, 0)`: with probability `p_t` a new counter is drawn uniformly in
///   stage `i`; otherwise the station transmits and either fails (`p`: uniform
///   counter in stage `i + 1`, or back to stage 0 after stage `m`) or succeeds
///   (`1 − p`: uniform counter in stage 0).
pub fn explicit_macro_matrix(p: f64, p_t: f64, params: &EdcaParams) -> DMatrix<f64> {
    let off = macro_offsets(params);
    let n = off[params.m as usize + 1];
    let mut mat = DMatrix::zeros(n, n);
    let spread = |mat: &mut DMatrix<f64>, from: usize, stage: u32, prob: f64| {
        let w = params.window(stage) as usize;
        for k in 0..w {
            mat[(from, off[stage as usize] + k)] += prob / w as f64;
        }
    };
    for i in 0..=params.m {
        let base = off[i as usize];
        for k in 1..params.window(i) as usize {
            mat[(base + k, base + k - 1)] = 1.0;
        }
        spread(&mut mat, base, i, p_t);
        let next = if i < params.m { i + 1 } else { 0 };
        spread(&mut mat, base, next, (1.0 - p_t) * p);
        spread(&mut mat, base, 0, (1.0 - p_t) * (1.0 - p));
    }
    mat
}

/// `(b00, τ)` from the stationary vector of [`explicit_macro_matrix`], with
/// `τ = (1 − p_t)·Σ_i b_{i,0}`.
pub fn explicit_macro(p: f64, p_t: f64, params: &EdcaParams) -> (f64, f64) {
    let pi = stationary(&explicit_macro_matrix(p, p_t, params));
    let off = macro_offsets(params);
    let zeros: f64 = (0..=params.m as usize).map(|i| pi[off[i]]).sum();
    (pi[0], (1.0 - p_t) * zeros)
}

/// Explicit transmission chain over `[A, Rc, Rv, O, F, S]` with `F` and `S`
/// returning to `A`.
pub fn explicit_tx_matrix(p_c1: f64, p_c2: f64, p_e: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(6, 6);
    let (a, rc, rv, o, f, s) = (0, 1, 2, 3, 4, 5);
    m[(a, rc)] = p_c1;
    m[(a, rv)] = 1.0 - p_c1;
    m[(rc, f)] = 1.0;
    m[(rv, f)] = p_c2;
    m[(rv, o)] = 1.0 - p_c2;
    m[(o, f)] = p_e;
    m[(o, s)] = 1.0 - p_e;
    m[(f, a)] = 1.0;
    m[(s, a)] = 1.0;
    m
}

/// Embedded and time-weighted stationary vectors of [`explicit_tx_matrix`].
pub fn explicit_tx(p_c1: f64, p_c2: f64, p_e: f64, times: &[f64; 6]) -> TxChain {
    let pi = stationary(&explicit_tx_matrix(p_c1, p_c2, p_e));
    let b: [f64; 6] = std::array::from_fn(|j| pi[j]);
    let w: [f64; 6] = std::array::from_fn(|j| b[j] * times[j]);
    let total: f64 = w.iter().sum();
    TxChain { b, pi: w.map(|x| x / total) }
}

/// Stage delay with the backoff term enumerated as
/// `Σ_{j≤i} Σ_{ℓ<terms} p_t^ℓ Σ_k (k + 1)/W_j`.
pub fn stage_delay_by_enumeration(sol: &ModelSolution, params: &EdcaParams, stage: u32, terms: usize) -> f64 {
    let mut slots = 0.0;
    for j in 0..=stage {
        let w = params.window(j);
        let per_draw: f64 = (0..w).map(|k| (k as f64 + 1.0) / w as f64).sum();
        let mut geometric = 0.0;
        let mut pl = 1.0;
        for _ in 0..terms {
            geometric += pl;
            pl *= sol.p_t;
        }
        slots += per_draw * geometric;
    }
    stage as f64 * sol.t_collision + sol.t_success + sol.e_t_ntx * slots
}

/// Mean delay with explicit stage weights `(1 − p)p^i/(1 − p^{m+1})` and
/// enumerated stage delays.
pub fn delay_by_enumeration(sol: &ModelSolution, params: &EdcaParams, terms: usize) -> f64 {
    let stages = params.m + 1;
    let raw: Vec<f64> = (0..stages).map(|i| (1.0 - sol.p) * sol.p.powi(i as i32)).collect();
    let total: f64 = raw.iter().sum();
    (0..stages).map(|i| raw[i as usize] / total * stage_delay_by_enumeration(sol, params, i, terms)).sum()
}

/// One randomised chain-oracle comparison.
#[derive(Debug, Clone)]
pub struct ChainCheck {
    pub w0: u32,
    pub m: u32,
    pub m_prime: u32,
    pub p: f64,
    pub p_t: f64,
    pub p_c1: f64,
    pub p_c2: f64,
    pub p_e: f64,
    /// Largest absolute difference over `b00` and `τ`.
    pub macro_error: f64,
    /// Largest absolute difference over the embedded and time-weighted vectors.
    pub tx_error: f64,
    /// Relative difference between closed-form and enumerated delay.
    pub delay_error: f64,
}

/// Randomised parameters for [`chain_suite`]: `W_0 ∈ [2, 32]`, `m ∈ [0, 5]`,
/// `m′ ∈ [0, m + 1]` (state count kept below ~1000 for the dense solve),
/// probabilities uniform in `[0, 1)` except `p_t ∈ [0, 0.5)`.
pub fn random_check(rng: &mut ChaCha8Rng) -> ChainCheck {
    loop {
        let w0 = rng.random_range(2..=32u32);
        let m = rng.random_range(0..=5u32);
        let m_prime = rng.random_range(0..=m + 1);
        let params = EdcaParams { w0, m, m_prime, ..EdcaParams::reference() };
        let states: u64 = (0..=m).map(|i| params.window(i)).sum();
        if states > 1000 {
            continue;
        }
        return ChainCheck {
            w0,
            m,
            m_prime,
            p: rng.random(),
            p_t: 0.5 * rng.random::<f64>(),
            p_c1: rng.random(),
            p_c2: rng.random(),
            p_e: rng.random(),
            macro_error: f64::NAN,
            tx_error: f64::NAN,
            delay_error: f64::NAN,
        };
    }
}

/// Runs `n` randomised comparisons of the closed-form chains and delay
/// against the explicit oracles.
pub fn chain_suite(n: usize, seed: u64) -> Result<Vec<ChainCheck>, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut c = random_check(&mut rng);
        let params = EdcaParams { w0: c.w0, m: c.m, m_prime: c.m_prime, ..EdcaParams::reference() };
        let closed = macro_chain(c.p, c.p_t, &params);
        let (b00, tau) = explicit_macro(c.p, c.p_t, &params);
        c.macro_error = (closed.b00 - b00).abs().max((closed.tau - tau).abs());

        let times = params.state_times();
        let closed = transmission_chain(c.p_c1, c.p_c2, c.p_e, &times);
        let explicit = explicit_tx(c.p_c1, c.p_c2, c.p_e, &times);
        c.tx_error = (0..6)
            .map(|j| (closed.b[j] - explicit.b[j]).abs().max((closed.pi[j] - explicit.pi[j]).abs()))
            .fold(0.0, f64::max);

        let sol = synthetic_solution(&params, c.p, c.p_t);
        let d = delay(&sol, &params)?;
        let e = delay_by_enumeration(&sol, &params, 10_000);
        c.delay_error = (d / e - 1.0).abs();
        // Every stage delay individually as well.
        for i in 0..=params.m {
            let a = stage_delay(&sol, &params, i)?;
            let b = stage_delay_by_enumeration(&sol, &params, i, 10_000);
            c.delay_error = c.delay_error.max((a / b - 1.0).abs());
        }
        out.push(c);
    }
    Ok(out)
}

/// A solution carrying only what the delay formulas read.
fn synthetic_solution(params: &EdcaParams, p: f64, p_t: f64) -> ModelSolution {
    let inputs = super::ModelInputs {
        counts: crate::geometry::GroupCounts::lone(),
        dti: super::DtiConfig::reference(0.5),
        params: *params,
        p_e: 0.0,
        ntx_form: super::NtxForm::default(),
    };
    let (mut sol, _) = inputs.evaluate([0.0, 0.0, 0.1]);
    sol.p = p;
    sol.p_t = p_t;
    sol
}

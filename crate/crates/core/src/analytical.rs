//! Markov-chain model of saturated directional EDCA inside CBAPs.
//!
//! Two coupled chains describe a tagged station:
//! - the *macro* chain: backoff states `(i, k)` for stage `i ∈ [0, m]` and
//!   counter `k ∈ [0, W_i − 1]`, plus one transmission state per stage;
//! - the *transmission* chain: access `A`, RTS that collides (`R_c`) or is
//!   vulnerable (`R_v`), ongoing exchange `O`, failure `F`, success `S`.
//!
//! Collision probabilities depend on what other stations are doing, which in
//! turn depends on the chains, so the model is solved as a fixed point in
//! `(p_c1, p_c2, π_tx)` by damped Picard iteration.
//!
//! Two expressions admit a printed form and a renewal-consistent form, selected
//! through [`ModelOptions`]: the non-transmission step duration
//! ([`NtxForm`]) and the throughput normalisation ([`ThroughputForm`]).

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::GroupCounts;

pub mod oracle;

/// Errors raised by the analytical model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("delay diverges: a successful exchange never fits in a CBAP allocation (p_t = 1)")]
    DelayDivergence,
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter { name, reason: reason.into() }
}

/// EDCA timing and backoff parameters of a single access category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdcaParams {
    /// Minimum contention window `W_0` (slots).
    pub w0: u32,
    /// Window doubling limit `m′`: the maximum window is `2^{m′}·W_0`.
    pub m_prime: u32,
    /// Retransmission limit `m`: a packet is dropped after `m + 1` failures.
    pub m: u32,
    /// Slot time `σ`, s.
    pub slot_sigma: f64,
    pub sifs: f64,
    pub difs: f64,
    /// Propagation delay `δ`, s.
    pub delta: f64,
    pub t_rts: f64,
    pub t_cts: f64,
    pub t_ack: f64,
    /// Data frame airtime `E[T_L]`, s.
    pub t_payload: f64,
    /// Mean payload `E[L]`, bits.
    pub payload_bits: f64,
}

/// Control-frame PHY rate of the reference configuration, b/s.
pub const CONTROL_RATE: f64 = 27.5e6;
/// Data PHY rate of the reference configuration, b/s.
pub const DATA_RATE: f64 = 1251.25e6;
/// MAC header, bits.
pub const MAC_HEADER_BITS: f64 = 320.0;
/// PHY header, bits.
pub const PHY_HEADER_BITS: f64 = 64.0;

impl EdcaParams {
    /// Reference DMG configuration: `W_0 = 16`, `m = m′ = 6`, `σ = 5 µs`,
    /// `SIFS = 3 µs`, `DIFS = 13 µs`, `δ = 100 ns`, 7995-byte MPDUs with a
    /// 320-bit MAC header, 160-bit RTS/CTS and 112-bit ACK at 27.5 Mb/s,
    /// data at 1251.25 Mb/s, and a 64-bit PHY header on every frame.
    pub fn reference() -> Self {
        let payload_bits = 7995.0 * 8.0 - MAC_HEADER_BITS;
        Self {
            w0: 16,
            m_prime: 6,
            m: 6,
            slot_sigma: 5e-6,
            sifs: 3e-6,
            difs: 13e-6,
            delta: 100e-9,
            t_rts: (160.0 + PHY_HEADER_BITS) / CONTROL_RATE,
            t_cts: (160.0 + PHY_HEADER_BITS) / CONTROL_RATE,
            t_ack: (112.0 + PHY_HEADER_BITS) / CONTROL_RATE,
            t_payload: (payload_bits + MAC_HEADER_BITS + PHY_HEADER_BITS) / DATA_RATE,
            payload_bits,
        }
    }

    /// Checks the parameter invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.w0 < 2 {
            return Err(invalid("w0", format!("must be at least 2 (got {})", self.w0)));
        }
        if self.m_prime > 20 || self.m > 64 {
            return Err(invalid("m/m_prime", "unreasonably large backoff stage count"));
        }
        for (name, v) in [
            ("slot_sigma", self.slot_sigma),
            ("sifs", self.sifs),
            ("difs", self.difs),
            ("delta", self.delta),
            ("t_rts", self.t_rts),
            ("t_cts", self.t_cts),
            ("t_ack", self.t_ack),
            ("t_payload", self.t_payload),
            ("payload_bits", self.payload_bits),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive (got {v})")));
            }
        }
        Ok(())
    }

    /// Contention window of stage `i`, `min(2^i, 2^{m′})·W_0`.
    pub fn window(&self, stage: u32) -> u64 {
        (self.w0 as u64) << stage.min(self.m_prime)
    }

    /// Successful exchange duration `T_s = RTS + CTS + E[T_L] + ACK + 3·SIFS + 4δ`.
    pub fn t_success(&self) -> f64 {
        self.t_rts + self.t_cts + self.t_payload + self.t_ack + 3.0 * self.sifs + 4.0 * self.delta
    }

    /// Failed attempt duration `T_c = RTS + DIFS + δ`.
    pub fn t_collision(&self) -> f64 {
        self.t_rts + self.difs + self.delta
    }

    /// Durations of the transmission-chain states `[T_A, T_Rc, T_Rv, T_O, T_F, T_S]`.
    pub fn state_times(&self) -> [f64; 6] {
        [
            self.delta,
            self.t_rts,
            self.t_rts,
            self.t_cts + self.t_payload + self.t_ack + 3.0 * self.sifs + 3.0 * self.delta,
            self.difs,
            self.difs,
        ]
    }
}

/// Packet error probability for a per-bit error rate: `1 − (1 − ε)^L`.
pub fn packet_error_from_ber(ber: f64, payload_bits: f64) -> f64 {
    1.0 - (1.0 - ber).powf(payload_bits)
}

/// Layout of the beacon interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtiConfig {
    /// Beacon interval `T_BI`, s.
    pub t_bi: f64,
    /// Beacon header interval `T_BHI`, s.
    pub t_bhi: f64,
    /// Total CBAP time per BI, s.
    pub t_cbap: f64,
    /// Number of CBAP allocations (equal length).
    pub n_cbap: u32,
    /// Number of SP allocations.
    pub n_sp: u32,
}

impl DtiConfig {
    /// Builds a configuration from the CBAP share `ν = T_CBAP/(T_BI − T_BHI)`.
    pub fn from_nu(t_bi: f64, t_bhi: f64, nu: f64, n_cbap: u32, n_sp: u32) -> Result<Self, ModelError> {
        let cfg = Self { t_bi, t_bhi, t_cbap: nu * (t_bi - t_bhi), n_cbap, n_sp };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reference layout: 100 ms BI, 2 ms BHI, `N_CBAP = N_SP = 3`.
    pub fn reference(nu: f64) -> Self {
        Self::from_nu(0.1, 0.002, nu, 3, 3).expect("reference layout is valid for ν ∈ (0, 1]")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.t_bi > 0.0 && self.t_bhi >= 0.0 && self.t_bhi < self.t_bi) {
            return Err(invalid("t_bi/t_bhi", "need 0 ≤ t_bhi < t_bi"));
        }
        if !(self.t_cbap > 0.0) {
            return Err(invalid("t_cbap", "must be positive"));
        }
        if self.t_cbap > (self.t_bi - self.t_bhi) * (1.0 + 1e-12) {
            return Err(invalid("t_cbap", "t_cbap ≤ t_bi − t_bhi violated"));
        }
        if self.n_cbap < 1 {
            return Err(invalid("n_cbap", "at least one CBAP allocation required"));
        }
        Ok(())
    }

    /// CBAP share of the DTI, `ν`.
    pub fn nu(&self) -> f64 {
        self.t_cbap / (self.t_bi - self.t_bhi)
    }

    /// Total SP time, `T_BI − T_BHI − T_CBAP`.
    pub fn t_sp(&self) -> f64 {
        (self.t_bi - self.t_bhi - self.t_cbap).max(0.0)
    }

    /// Length of one CBAP allocation.
    pub fn cbap_len(&self) -> f64 {
        self.t_cbap / self.n_cbap as f64
    }

    /// Fraction of the BI in which EDCA runs, `T_CBAP/T_BI`.
    pub fn cbap_fraction(&self) -> f64 {
        self.t_cbap / self.t_bi
    }
}

/// Probability that a counter expiry finds too little time left in the
/// allocation: `p_t = T_L/(T_CBAP/N_CBAP)`, clamped to 1.
///
/// Returns the probability and whether clamping occurred (a single exchange
/// does not fit in one allocation).
pub fn compute_p_t(t_exchange: f64, dti: &DtiConfig) -> (f64, bool) {
    let p = t_exchange / dti.cbap_len();
    if p > 1.0 {
        (1.0, true)
    } else {
        (p.max(0.0), false)
    }
}

/// Stationary solution of the backoff chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroChain {
    /// `b_{0,0}`.
    pub b00: f64,
    /// Probability of being in a transmission state, `τ`.
    pub tau: f64,
}

/// Solves the backoff chain for failure probability `p` and time-out
/// probability `p_t`.
///
/// `b_{i,0} = p^i·b_{0,0}`, `b_{i,k} = (W_i − k)/W_i·b_{i,0}`, so normalisation
/// gives `b_{0,0} = [Σ_i p^i (W_i + 1)/2]^{-1}` and
/// `τ = Σ_i p^i·(1 − p_t)·b_{0,0}`. The sums are evaluated directly, which
/// also covers `p = 1`.
pub fn macro_chain(p: f64, p_t: f64, params: &EdcaParams) -> MacroChain {
    let mut norm = 0.0;
    let mut geo = 0.0;
    let mut pi = 1.0;
    for i in 0..=params.m {
        norm += pi * (params.window(i) as f64 + 1.0) / 2.0;
        geo += pi;
        pi *= p;
    }
    let b00 = 1.0 / norm;
    MacroChain { b00, tau: geo * (1.0 - p_t) * b00 }
}

/// Index of each transmission-chain state in arrays.
pub const STATE_NAMES: [&str; 6] = ["A", "Rc", "Rv", "O", "F", "S"];

/// Stationary distribution of the transmission chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxChain {
    /// Embedded-chain probabilities `b_j` (normalised to one).
    pub b: [f64; 6],
    /// Time-weighted probabilities `π_j = T_j b_j / Σ T_k b_k`.
    pub pi: [f64; 6],
}

/// Normaliser printed alongside the transmission-chain probabilities,
/// `3 + p_e(1 − p_c1)(1 − p_c2)`. Kept for reference; the chain's visit
/// counts actually sum to `3 + (1 − p_c1)(1 − p_c2)`, see [`transmission_chain`].
pub fn printed_b_tx(p_c1: f64, p_c2: f64, p_e: f64) -> f64 {
    3.0 + p_e * (1.0 - p_c1) * (1.0 - p_c2)
}

/// Solves the transmission chain.
///
/// Per cycle (entering at `A`): `A` is visited once, `R_c` with probability
/// `p_c1`, `R_v` with `1 − p_c1`, `O` with `X = (1 − p_c1)(1 − p_c2)`, `S` with
/// `X(1 − p_e)` and `F` with `1 − X(1 − p_e)`. The visit counts sum to `3 + X`.
pub fn transmission_chain(p_c1: f64, p_c2: f64, p_e: f64, times: &[f64; 6]) -> TxChain {
    let x = (1.0 - p_c1) * (1.0 - p_c2);
    let visits = [1.0, p_c1, 1.0 - p_c1, x, 1.0 - x * (1.0 - p_e), x * (1.0 - p_e)];
    let total: f64 = visits.iter().sum();
    let b = visits.map(|v| v / total);
    let mut weighted = [0.0; 6];
    for j in 0..6 {
        weighted[j] = times[j] * b[j];
    }
    let wsum: f64 = weighted.iter().sum();
    TxChain { b, pi: weighted.map(|w| w / wsum) }
}

/// Mean duration of one pass through the transmission chain (sum over the chain paths).
pub fn expected_t_tx(p_c1: f64, p_c2: f64, p_e: f64, times: &[f64; 6]) -> f64 {
    let [ta, trc, trv, to, tf, ts] = *times;
    (ta + trc + tf) * p_c1
        + (ta + trv + tf) * (1.0 - p_c1) * p_c2
        + (ta + trv + to + tf) * (1.0 - p_c1) * (1.0 - p_c2) * p_e
        + (ta + trv + to + ts) * (1.0 - p_c1) * (1.0 - p_c2) * (1.0 - p_e)
}

/// How the freezing outside CBAPs enters the mean non-transmission step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NtxForm {
    /// `(σ + (1 − p_i)·E[T_tx]) / (1 − p_f)`: the whole backoff step, idle slot
    /// and busy period alike, only advances during CBAPs.
    #[default]
    WholeSlotFreeze,
    /// `σ + (1 − p_i)·E[T_tx]/(1 − p_f)` as printed: only the busy period is
    /// stretched by the freeze.
    Printed,
}

/// Throughput normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThroughputForm {
    /// Renewal-reward over macro-chain steps:
    /// `n·τ(1 − p)E[L] / (τ·E[T_tx] + (1 − τ)·E[T_ntx])`.
    #[default]
    Renewal,
    /// `n·π_tx(1 − p)E[L] / (π_tx·E[T_tx] + (1 − π_tx)·E[T_ntx])` as printed.
    Printed,
}

/// Mean non-transmission step `E[T_ntx]`.
pub fn expected_t_ntx(sigma: f64, p_i: f64, p_f: f64, e_t_tx: f64, form: NtxForm) -> f64 {
    match form {
        NtxForm::WholeSlotFreeze => (sigma + (1.0 - p_i) * e_t_tx) / (1.0 - p_f),
        NtxForm::Printed => sigma + (1.0 - p_i) * e_t_tx / (1.0 - p_f),
    }
}

/// Solver and formula options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    /// Damping factor `α` of `x ← (1 − α)x + α·F(x)`.
    pub damping: f64,
    pub max_iterations: usize,
    /// Convergence threshold on `max|F(x) − x|`.
    pub tolerance: f64,
    pub ntx_form: NtxForm,
    pub throughput_form: ThroughputForm,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iterations: 100_000,
            tolerance: 1e-12,
            ntx_form: NtxForm::default(),
            throughput_form: ThroughputForm::default(),
        }
    }
}

/// Full state of the model at a point `(p_c1, p_c2, π_tx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSolution {
    pub p_t: f64,
    pub p_f: f64,
    pub p_i: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub p_c1: f64,
    pub p_c2: f64,
    pub p_e: f64,
    /// Failure probability `1 − (1 − p_c1)(1 − p_c2)(1 − p_e)`.
    pub p: f64,
    pub tau: f64,
    pub pi_tx: f64,
    pub b00: f64,
    pub pi_a: f64,
    pub pi_rc: f64,
    pub pi_rv: f64,
    pub pi_o: f64,
    pub pi_f: f64,
    pub pi_s: f64,
    pub t_a: f64,
    pub t_rc: f64,
    pub t_rv: f64,
    pub t_o: f64,
    pub t_f: f64,
    pub t_s_state: f64,
    pub e_t_tx: f64,
    pub e_t_ntx: f64,
    /// `T_s`.
    pub t_success: f64,
    /// `T_c`.
    pub t_collision: f64,
    /// Probability that a station is accessing, `π_A·π_tx`.
    pub p_acc: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `max|F(x) − x|` at the returned point.
    pub residual: f64,
}

impl ModelSolution {
    /// Time-weighted transmission-chain probabilities in [`STATE_NAMES`] order.
    pub fn pi_states(&self) -> [f64; 6] {
        [self.pi_a, self.pi_rc, self.pi_rv, self.pi_o, self.pi_f, self.pi_s]
    }

    /// All quantities that must be probabilities, with their names.
    pub fn probabilities(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("p_t", self.p_t),
            ("p_f", self.p_f),
            ("p_i", self.p_i),
            ("q1", self.q1),
            ("q2", self.q2),
            ("q3", self.q3),
            ("p_c1", self.p_c1),
            ("p_c2", self.p_c2),
            ("p_e", self.p_e),
            ("p", self.p),
            ("tau", self.tau),
            ("pi_tx", self.pi_tx),
            ("b00", self.b00),
            ("pi_a", self.pi_a),
            ("pi_rc", self.pi_rc),
            ("pi_rv", self.pi_rv),
            ("pi_o", self.pi_o),
            ("pi_f", self.pi_f),
            ("pi_s", self.pi_s),
            ("p_acc", self.p_acc),
        ]
    }

    /// Fixed-point unknowns `(p_c1, p_c2, π_tx)`.
    pub fn unknowns(&self) -> [f64; 3] {
        [self.p_c1, self.p_c2, self.pi_tx]
    }
}

/// Everything the fixed-point map needs besides the unknowns.
#[derive(Debug, Clone, Copy)]
pub struct ModelInputs {
    pub counts: GroupCounts,
    pub dti: DtiConfig,
    pub params: EdcaParams,
    pub p_e: f64,
    pub ntx_form: NtxForm,
}

impl ModelInputs {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.params.validate()?;
        self.dti.validate()?;
        if !(0.0..1.0).contains(&self.p_e) {
            return Err(invalid("p_e", format!("must lie in [0, 1) (got {})", self.p_e)));
        }
        let c = &self.counts;
        for (name, v) in [("n_i1", c.n_i1), ("n_i2", c.n_i2), ("n_i3", c.n_i3), ("n_i4", c.n_i4), ("n_total", c.n_total)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("group count must be non-negative (got {v})")));
            }
        }
        Ok(())
    }

    /// Evaluates every model quantity at the point `x = (p_c1, p_c2, π_tx)`
    /// and returns it together with the image `F(x)`.
    ///
    /// Group counts enter as real-valued exponents; `q2`, `q3` and `p_c2` are
    /// clamped to 1 because the division by `T_CBAP/T_BI` can otherwise push
    /// them above one at small CBAP shares.
    pub fn evaluate(&self, x: [f64; 3]) -> (ModelSolution, [f64; 3]) {
        let [p_c1, p_c2, pi_tx] = x;
        let params = &self.params;
        let c = &self.counts;
        let p_e = self.p_e;
        let times = params.state_times();
        let t_success = params.t_success();
        let (p_t, _) = compute_p_t(t_success, &self.dti);
        let frac = self.dti.cbap_fraction();
        let p_f = 1.0 - frac;

        let p = failure_probability(p_c1, p_c2, p_e);
        let mc = macro_chain(p, p_t, params);
        let tx = transmission_chain(p_c1, p_c2, p_e, &times);
        let [pi_a, pi_rc, pi_rv, pi_o, pi_f, pi_s] = tx.pi;
        let e_t_tx = expected_t_tx(p_c1, p_c2, p_e, &times);

        let p_acc = pi_a * pi_tx;
        let p_i = (1.0 - pi_tx * (pi_a + pi_rc + pi_rv + pi_o)).powf(c.n_i1 + c.n_i3) * (1.0 - pi_tx * pi_o).powf(c.n_i2);
        let e_t_ntx = expected_t_ntx(params.slot_sigma, p_i, p_f, e_t_tx, self.ntx_form);
        let pi_tx_next = mc.tau * e_t_tx / (mc.tau * e_t_tx + (1.0 - mc.tau) * e_t_ntx);

        let q1 = same_slot_access(p_acc, c.n_total);
        let q2 = ((1.0 - (1.0 - pi_tx * (pi_rv + pi_rc)).powf(c.n_i2)) / frac).min(1.0);
        let q3 = ((1.0 - (1.0 - pi_tx * (pi_rv + pi_rc + pi_o)).powf(c.n_i4)) / frac).min(1.0);
        let p_c1_next = 1.0 - (1.0 - q1) * (1.0 - q2) * (1.0 - q3);
        let exponent = (c.n_i2 + c.n_i4) * times[2] / times[0];
        let p_c2_next = ((1.0 - (1.0 - p_acc).powf(exponent)) / frac).min(1.0);

        let sol = ModelSolution {
            p_t,
            p_f,
            p_i,
            q1,
            q2,
            q3,
            p_c1,
            p_c2,
            p_e,
            p,
            tau: mc.tau,
            pi_tx,
            b00: mc.b00,
            pi_a,
            pi_rc,
            pi_rv,
            pi_o,
            pi_f,
            pi_s,
            t_a: times[0],
            t_rc: times[1],
            t_rv: times[2],
            t_o: times[3],
            t_f: times[4],
            t_s_state: times[5],
            e_t_tx,
            e_t_ntx,
            t_success,
            t_collision: params.t_collision(),
            p_acc,
            converged: false,
            iterations: 0,
            residual: f64::NAN,
        };
        (sol, [p_c1_next, p_c2_next, pi_tx_next])
    }

    /// `max|F(x) − x|`, evaluated from scratch.
    pub fn residual(&self, x: [f64; 3]) -> f64 {
        let (_, fx) = self.evaluate(x);
        (0..3).map(|k| (fx[k] - x[k]).abs()).fold(0.0, f64::max)
    }
}

/// `p = 1 − (1 − p_c1)(1 − p_c2)(1 − p_e)`, arranged as
/// `p_e + (1 − p_e)·[1 − (1 − p_c1)(1 − p_c2)]` so that collision-free
/// operation returns `p_e` bit-exactly.
pub fn failure_probability(p_c1: f64, p_c2: f64, p_e: f64) -> f64 {
    p_e + (1.0 - p_e) * (1.0 - (1.0 - p_c1) * (1.0 - p_c2))
}

/// Probability that, given the tagged station accesses, at least one other
/// station accesses at the same time:
/// `[1 − (1 − p_acc)^n − n·p_acc(1 − p_acc)^{n−1}] / p_acc`, with its
/// `p_acc → 0` limit 0 and clamped to `[0, 1]`.
fn same_slot_access(p_acc: f64, n: f64) -> f64 {
    if p_acc <= 0.0 || n <= 1.0 {
        return 0.0;
    }
    let q = 1.0 - p_acc;
    let v = (1.0 - q.powf(n) - n * p_acc * q.powf(n - 1.0)) / p_acc;
    v.clamp(0.0, 1.0)
}

/// Solves the coupled chains for the given interference groups.
pub fn collision_system(
    counts: &GroupCounts,
    dti: &DtiConfig,
    params: &EdcaParams,
    p_e: f64,
    opts: &ModelOptions,
) -> Result<ModelSolution, ModelError> {
    let inputs = ModelInputs { counts: *counts, dti: *dti, params: *params, p_e, ntx_form: opts.ntx_form };
    inputs.validate()?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(invalid("damping", format!("must lie in (0, 1] (got {})", opts.damping)));
    }
    let alpha = opts.damping;
    let mut x = [0.0, 0.0, 0.1];
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let (_, fx) = inputs.evaluate(x);
        residual = (0..3).map(|k| (fx[k] - x[k]).abs()).fold(0.0, f64::max);
        if residual < opts.tolerance {
            let (mut sol, _) = inputs.evaluate(x);
            sol.converged = true;
            sol.iterations = it;
            sol.residual = residual;
            return Ok(sol);
        }
        for k in 0..3 {
            x[k] = (1.0 - alpha) * x[k] + alpha * fx[k];
        }
    }
    Err(ModelError::NotConverged { iterations: opts.max_iterations, residual })
}

/// Aggregate throughput in bits/second.
pub fn throughput(sol: &ModelSolution, n: f64, payload_bits: f64, form: ThroughputForm) -> f64 {
    let w = match form {
        ThroughputForm::Renewal => sol.tau,
        ThroughputForm::Printed => sol.pi_tx,
    };
    let denom = w * sol.e_t_tx + (1.0 - w) * sol.e_t_ntx;
    if denom <= 0.0 {
        return 0.0;
    }
    (n * w * (1.0 - sol.p) * payload_bits / denom).max(0.0)
}

/// Mean backoff-plus-exchange delay of a packet that finishes at stage `i`:
/// `i·T_c + T_s + E[T_ntx]/(1 − p_t)·Σ_{j≤i}(W_j + 1)/2`.
pub fn stage_delay(sol: &ModelSolution, params: &EdcaParams, stage: u32) -> Result<f64, ModelError> {
    if sol.p_t >= 1.0 {
        return Err(ModelError::DelayDivergence);
    }
    let slots: f64 = (0..=stage).map(|j| (params.window(j) as f64 + 1.0) / 2.0).sum();
    Ok(stage as f64 * sol.t_collision + sol.t_success + sol.e_t_ntx / (1.0 - sol.p_t) * slots)
}

/// Mean delay of successfully delivered packets, s.
pub fn delay(sol: &ModelSolution, params: &EdcaParams) -> Result<f64, ModelError> {
    let p = sol.p;
    let m = params.m;
    // Weights (1 − p)p^i / (1 − p^{m+1}); at p = 1 they tend to 1/(m + 1).
    let weights: Vec<f64> = if p >= 1.0 {
        vec![1.0 / (m as f64 + 1.0); m as usize + 1]
    } else {
        let norm = 1.0 - p.powi(m as i32 + 1);
        (0..=m).map(|i| (1.0 - p) * p.powi(i as i32) / norm).collect()
    };
    let mut total = 0.0;
    for i in 0..=m {
        total += weights[i as usize] * stage_delay(sol, params, i)?;
    }
    Ok(total)
}

/// Packet drop probability after `m + 1` failed attempts, `p^{m+1}`.
pub fn drop_rate(p: f64, m: u32) -> f64 {
    p.powi(m as i32 + 1)
}

/// Aggregate performance figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub throughput_bps: f64,
    pub delay_s: f64,
    pub drop_rate: f64,
}

/// Throughput, delay and drop rate of a solved model.
pub fn metrics(sol: &ModelSolution, counts: &GroupCounts, params: &EdcaParams, form: ThroughputForm) -> Result<Metrics, ModelError> {
    Ok(Metrics {
        throughput_bps: throughput(sol, counts.n_total, params.payload_bits, form),
        delay_s: delay(sol, params)?,
        drop_rate: drop_rate(sol.p, params.m),
    })
}

/// Throughput of a single station with no channel errors, from its renewal
/// cycle: a successful exchange `T_s`, the DIFS deferral and a mean backoff of
/// `σ(W_0 − 1)/2`, with the cycle only running during the CBAP share
/// `T_CBAP/T_BI` of the beacon interval.
///
/// This is the lone-station reference the simulator is checked against;
/// [`throughput`] does not reduce to it because its freezing term only
/// stretches idle backoff slots, not the exchanges themselves.
pub fn lone_station_throughput(params: &EdcaParams, dti: &DtiConfig) -> f64 {
    let backoff = params.slot_sigma * (params.w0 as f64 - 1.0) / 2.0;
    let cycle = params.t_success() + params.difs + backoff;
    dti.cbap_fraction() * params.payload_bits / cycle
}

/// Convenience: region areas → group counts → solve → metrics for a PPP of
/// intensity `lambda` on the coverage disk.
pub fn solve_point(
    lambda: f64,
    geo: &crate::geometry::BeamGeometry,
    dti: &DtiConfig,
    params: &EdcaParams,
    p_e: f64,
    opts: &ModelOptions,
) -> Result<(ModelSolution, Metrics, GroupCounts), ModelError> {
    let areas = crate::geometry::region_areas(geo).map_err(|e| invalid("geometry", e.to_string()))?;
    let counts = crate::geometry::group_counts(lambda, &areas);
    let sol = collision_system(&counts, dti, params, p_e, opts)?;
    let m = metrics(&sol, &counts, params, opts.throughput_form)?;
    Ok((sol, m, counts))
}

/// Expected station count on a disk of radius `r` for intensity `lambda`.
pub fn expected_station_count(lambda: f64, radius: f64) -> f64 {
    lambda * PI * radius * radius
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_durations() {
        let p = EdcaParams::reference();
        assert!((p.t_rts - 224.0 / 27.5e6).abs() < 1e-18);
        assert!((p.t_ack - 176.0 / 27.5e6).abs() < 1e-18);
        assert!((p.payload_bits - 63_640.0).abs() < 1e-9);
        assert!((p.t_payload - 64_024.0 / 1251.25e6).abs() < 1e-18);
        // Hand sum: 8.145454 + 8.145454 + 51.168032 + 6.4 + 9 + 0.4 µs.
        assert!((p.t_success() - 83.258_941e-6).abs() < 1e-12, "{}", p.t_success());
        assert_eq!(p.window(0), 16);
        assert_eq!(p.window(6), 1024);
        assert_eq!(p.window(9), 1024);
    }

    #[test]
    fn p_t_examples() {
        let dti = DtiConfig::reference(0.5);
        assert_eq!(compute_p_t(0.0, &dti), (0.0, false));
        assert_eq!(compute_p_t(dti.cbap_len(), &dti), (1.0, false));
        assert_eq!(compute_p_t(2.0 * dti.cbap_len(), &dti), (1.0, true));
        // ν = 0.5: T_CBAP = 49 ms, three allocations of 16.333 ms.
        let ts = EdcaParams::reference().t_success();
        let (pt, _) = compute_p_t(ts, &dti);
        assert!((pt - ts / (0.049 / 3.0)).abs() < 1e-15);
        assert!((pt - 5.0974e-3).abs() < 1e-6, "{pt}");
    }

    #[test]
    fn macro_chain_limits() {
        let p = EdcaParams::reference();
        let mc = macro_chain(0.0, 0.0, &p);
        assert!((mc.b00 - 2.0 / 17.0).abs() < 1e-15);
        assert!((mc.tau - mc.b00).abs() < 1e-15);
        let mc1 = macro_chain(1.0, 0.0, &p);
        let norm: f64 = (0..=6).map(|i| (p.window(i) as f64 + 1.0) / 2.0).sum();
        assert!((mc1.b00 - 1.0 / norm).abs() < 1e-15);
        assert!((mc1.tau - 7.0 / norm).abs() < 1e-15);
    }

    #[test]
    fn transmission_chain_limits() {
        let t = EdcaParams::reference().state_times();
        let c = transmission_chain(1.0, 0.3, 0.1, &t);
        assert_eq!(c.b[3], 0.0);
        assert_eq!(c.b[5], 0.0);
        let c = transmission_chain(0.0, 0.0, 0.0, &t);
        assert_eq!(c.b[4], 0.0);
        assert_eq!(c.b[5], c.b[0]);
        assert_eq!(c.b[3], c.b[0]);
        assert_eq!(c.b[2], c.b[0]);
        assert!((c.pi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expected_times_limits() {
        let t = EdcaParams::reference().state_times();
        assert!((expected_t_tx(1.0, 0.4, 0.2, &t) - (t[0] + t[1] + t[4])).abs() < 1e-18);
        let p = EdcaParams::reference();
        // All-success path: T_A + T_Rv + T_O + T_S = T_s − SIFS-free remainder check.
        let success = expected_t_tx(0.0, 0.0, 0.0, &t);
        assert!((success - (p.t_success() + p.difs)).abs() < 1e-15);
        for form in [NtxForm::WholeSlotFreeze, NtxForm::Printed] {
            assert_eq!(expected_t_ntx(5e-6, 1.0, 0.0, 1e-4, form), 5e-6);
        }
    }

    #[test]
    fn drop_limits() {
        assert_eq!(drop_rate(0.0, 6), 0.0);
        assert_eq!(drop_rate(1.0, 6), 1.0);
        assert!((drop_rate(0.5, 2) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn lone_station_is_collision_free() {
        let p = EdcaParams::reference();
        let dti = DtiConfig::reference(0.5);
        for p_e in [0.0, 0.05] {
            let sol = collision_system(&GroupCounts::lone(), &dti, &p, p_e, &ModelOptions::default()).unwrap();
            assert_eq!(sol.q1, 0.0);
            assert_eq!(sol.q2, 0.0);
            assert_eq!(sol.q3, 0.0);
            assert_eq!(sol.p_c2, 0.0);
            assert_eq!(sol.p, p_e);
        }
    }

    #[test]
    fn lone_station_throughput_by_hand() {
        let p = EdcaParams::reference();
        let dti = DtiConfig::reference(1.0);
        // 0.98 · 63 640 payload bits / (83.258941 + 13 + 37.5) µs
        let hand = 0.98 * 63_640.0 / 133.758_941e-6;
        assert!((lone_station_throughput(&p, &dti) / hand - 1.0).abs() < 1e-6);
    }

    #[test]
    fn delay_single_stage_limit() {
        let p = EdcaParams::reference();
        let dti = DtiConfig::reference(1.0);
        let sol = collision_system(&GroupCounts::lone(), &dti, &p, 0.0, &ModelOptions::default()).unwrap();
        let mut s = sol;
        s.p_t = 0.0;
        let d = delay(&s, &p).unwrap();
        assert!((d - (s.t_success + s.e_t_ntx * 17.0 / 2.0)).abs() < 1e-15);
        s.p_t = 1.0;
        assert_eq!(delay(&s, &p), Err(ModelError::DelayDivergence));
    }

    #[test]
    fn invalid_inputs_are_named() {
        let p = EdcaParams { w0: 1, ..EdcaParams::reference() };
        let err = collision_system(&GroupCounts::lone(), &DtiConfig::reference(0.5), &p, 0.0, &ModelOptions::default());
        assert!(matches!(err, Err(ModelError::InvalidParameter { name: "w0", .. })));
        let err = DtiConfig::from_nu(0.1, 0.002, 1.5, 3, 3);
        assert!(matches!(err, Err(ModelError::InvalidParameter { name: "t_cbap", .. })));
    }
}

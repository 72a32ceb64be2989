//! Slot-level Monte Carlo simulator of saturated directional EDCA.
//!
//! Backoff is slotted: a station counts down in slots of length `σ` while it
//! senses the medium idle, with slot boundaries anchored where its idle
//! period began (after DIFS) or at the start of the CBAP allocation. Outside
//! CBAPs every counter is frozen. Frame exchanges are timed in integer
//! nanoseconds so that exchange durations are not distorted by rounding to
//! whole slots.
//!
//! Carrier sensing follows the hearing matrices of the [`Topology`]:
//! - a station hearing `j`'s uplink is busy from `j`'s RTS start until the end
//!   of `j`'s exchange (or the end of the RTS if it failed), which covers the
//!   virtual carrier sense set by the RTS;
//! - a station hearing the AP's downlink towards `j` is busy from the CTS
//!   start until the end of `j`'s exchange;
//! - either way it then defers DIFS before counting down again.
//!
//! Collisions are resolved at the AP, which is where an uplink RTS is decoded:
//! - an RTS fails if any other RTS overlaps it in time (same-slot access,
//!   an access during a hidden station's RTS, or a hidden access during the
//!   vulnerable RTS window);
//! - an RTS fails if the AP is already engaged in another exchange when it
//!   starts; the ongoing exchange is unaffected.
//!
//! Once its RTS succeeds an exchange completes; only the channel error `p_e`
//! can still make it fail. After any attempt the station waits DIFS before
//! re-entering backoff.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::analytical::{DtiConfig, EdcaParams};
use crate::geometry::{hears_downlink, hears_uplink, BeamGeometry};

/// Nanoseconds per second.
const NS: f64 = 1e9;

fn to_ns(seconds: f64) -> u64 {
    (seconds * NS).round() as u64
}

/// A station position with its AP sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Station {
    /// Distance from the AP, m.
    pub radius: f64,
    /// Polar angle, rad, in `[0, 2π)`.
    pub angle: f64,
    /// Index of the AP sector covering the station.
    pub sector: u32,
    /// Phase `φ_AP` of the station inside its sector: the sector spans
    /// `[angle + φ_AP − θ_AP, angle + φ_AP]`.
    pub phi_ap: f64,
}

/// Stations around the AP and who overhears whom.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub stations: Vec<Station>,
    /// Row-major `n × n`: entry `(i, j)` is true iff `i` hears `j`'s uplink.
    hearing_uplink: Vec<bool>,
    /// Row-major `n × n`: entry `(i, j)` is true iff `i` hears the AP's
    /// downlink frames addressed to `j`.
    hearing_downlink: Vec<bool>,
    pub rng_seed: u64,
}

impl Topology {
    /// Number of stations.
    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Whether station `i` hears station `j`'s uplink.
    pub fn hears_uplink(&self, i: usize, j: usize) -> bool {
        self.hearing_uplink[i * self.len() + j]
    }

    /// Whether station `i` hears the AP's downlink to station `j`.
    pub fn hears_downlink(&self, i: usize, j: usize) -> bool {
        self.hearing_downlink[i * self.len() + j]
    }

    /// Builds the hearing matrices for explicit station positions.
    ///
    /// AP sectors tile the circle starting at angle 0.
    pub fn from_positions(positions: &[(f64, f64)], geo: &BeamGeometry, rng_seed: u64) -> Self {
        let n = positions.len();
        let stations: Vec<Station> = positions
            .iter()
            .map(|&(radius, angle)| {
                let angle = crate::geometry::normalize_angle(angle);
                let sector = ((angle / geo.theta_ap).floor() as u32).min(geo.n_ap_sectors.saturating_sub(1));
                let upper = (sector as f64 + 1.0) * geo.theta_ap;
                Station { radius, angle, sector, phi_ap: (upper - angle).clamp(0.0, geo.theta_ap) }
            })
            .collect();
        let mut up = vec![false; n * n];
        let mut down = vec![false; n * n];
        for j in 0..n {
            let t = stations[j];
            for i in 0..n {
                if i == j {
                    up[i * n + j] = true;
                    down[i * n + j] = true;
                    continue;
                }
                let o = stations[i];
                let rel = o.angle - t.angle;
                up[i * n + j] = hears_uplink(t.radius, o.radius, rel, geo.theta_s).unwrap_or(true);
                down[i * n + j] = hears_downlink(t.phi_ap, rel, geo.theta_ap);
            }
        }
        Self { stations, hearing_uplink: up, hearing_downlink: down, rng_seed }
    }

    /// Topology of `n` stations that all hear each other in both directions.
    pub fn full_hearing(n: usize, rng_seed: u64) -> Self {
        let stations = (0..n)
            .map(|k| Station { radius: 1.0, angle: TAU * k as f64 / n.max(1) as f64, sector: 0, phi_ap: 0.0 })
            .collect();
        Self { stations, hearing_uplink: vec![true; n * n], hearing_downlink: vec![true; n * n], rng_seed }
    }

    /// Numbers of other stations in each overhearing group of station `j`:
    /// `[uplink only, downlink only, both, neither]`.
    pub fn group_counts_of(&self, j: usize) -> [usize; 4] {
        let mut c = [0; 4];
        for i in 0..self.len() {
            if i == j {
                continue;
            }
            let k = match (self.hears_uplink(i, j), self.hears_downlink(i, j)) {
                (true, false) => 0,
                (false, true) => 1,
                (true, true) => 2,
                (false, false) => 3,
            };
            c[k] += 1;
        }
        c
    }
}

/// Draws a Poisson number of stations (mean `λπR²`) uniformly on the disk.
pub fn place_stations(lambda: f64, geo: &BeamGeometry, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = lambda * geo.disk_area();
    let n = if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(&mut rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let r = geo.coverage_radius * rng.random::<f64>().sqrt();
            (r, TAU * rng.random::<f64>())
        })
        .collect();
    Topology::from_positions(&positions, geo, seed)
}

/// Kind of a beacon-interval segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    Bhi,
    Cbap(u32),
    Sp(u32),
}

impl fmt::Display for IntervalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalKind::Bhi => write!(f, "BHI"),
            IntervalKind::Cbap(k) => write!(f, "CBAP{k}"),
            IntervalKind::Sp(k) => write!(f, "SP{k}"),
        }
    }
}

/// One segment `[start, end)` of the beacon interval, in nanoseconds from the BI start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub kind: IntervalKind,
    pub start: u64,
    pub end: u64,
}

/// Layout of one beacon interval: BHI first, then CBAPs and SPs alternating
/// (starting with a CBAP); surplus allocations of the more numerous kind go
/// last, and zero-length SPs are omitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiSchedule {
    pub intervals: Vec<Interval>,
    pub t_bi: u64,
}

impl BiSchedule {
    pub fn new(dti: &DtiConfig) -> Self {
        let cbap = dti.cbap_len();
        let t_sp = dti.t_sp();
        let sp = if dti.n_sp > 0 { t_sp / dti.n_sp as f64 } else { 0.0 };
        let mut kinds = vec![(IntervalKind::Bhi, dti.t_bhi)];
        for k in 0..dti.n_cbap.max(dti.n_sp) {
            if k < dti.n_cbap {
                kinds.push((IntervalKind::Cbap(k), cbap));
            }
            if k < dti.n_sp && sp > 0.0 {
                kinds.push((IntervalKind::Sp(k), sp));
            }
        }
        // Boundaries from cumulative exact times so the total is exactly T_BI.
        let mut acc = 0.0;
        let mut intervals = Vec::with_capacity(kinds.len());
        let mut start = 0;
        for (kind, len) in kinds {
            acc += len;
            let end = to_ns(acc);
            intervals.push(Interval { kind, start, end });
            start = end;
        }
        let t_bi = to_ns(dti.t_bi);
        if let Some(last) = intervals.last_mut() {
            last.end = t_bi;
        }
        Self { intervals, t_bi }
    }

    /// CBAP segments only.
    pub fn cbaps(&self) -> impl Iterator<Item = &Interval> {
        self.intervals.iter().filter(|i| matches!(i.kind, IntervalKind::Cbap(_)))
    }
}

/// Run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: EdcaParams,
    pub dti: DtiConfig,
    pub p_e: f64,
    /// Simulated beacon intervals, including warm-up.
    pub n_bis: u32,
    /// Leading beacon intervals excluded from statistics.
    pub warmup_bis: u32,
}

impl SimConfig {
    pub fn new(params: EdcaParams, dti: DtiConfig, p_e: f64) -> Self {
        Self { params, dti, p_e, n_bis: 12, warmup_bis: 2 }
    }
}

/// Counters and derived statistics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimMetrics {
    pub delivered_bits: f64,
    /// Measured time (warm-up excluded), s.
    pub sim_time: f64,
    /// Mean access delay of delivered packets, s (NaN if none delivered).
    pub mean_delay: f64,
    pub drop_count: u64,
    /// Attempts resolved in the measurement window.
    pub tx_attempts: u64,
    /// Attempts whose RTS failed at the AP.
    pub collision_count: u64,
    /// Attempts lost to channel errors after a successful RTS.
    pub error_count: u64,
    pub success_count: u64,
    /// Smallest delay sample, s (infinite if none delivered).
    pub min_delay: f64,
    /// Attempts started outside a CBAP (must be zero).
    pub out_of_cbap_attempts: u64,
    pub stations: usize,
}

impl SimMetrics {
    /// Aggregate throughput, b/s.
    pub fn throughput_bps(&self) -> f64 {
        if self.sim_time > 0.0 {
            self.delivered_bits / self.sim_time
        } else {
            0.0
        }
    }

    /// Fraction of completed packets that were dropped.
    pub fn drop_rate(&self) -> f64 {
        let done = self.drop_count + self.success_count;
        if done == 0 {
            0.0
        } else {
            self.drop_count as f64 / done as f64
        }
    }

    /// Fraction of attempts that failed.
    pub fn failure_rate(&self) -> f64 {
        if self.tx_attempts == 0 {
            0.0
        } else {
            (self.collision_count + self.error_count) as f64 / self.tx_attempts as f64
        }
    }
}

/// Event recorded by a traced run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    /// Absolute time, ns.
    pub time: u64,
    pub station: usize,
    pub kind: TraceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// RTS sent.
    Access,
    /// Counter expired too close to the CBAP end; a new one was drawn.
    Redraw,
    RtsFailed,
    Success,
    ChannelError,
    Drop,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} sta={} {:?}", self.time, self.station, self.kind)
    }
}

/// Events at equal times are handled in declaration order: frame events
/// before station wake-ups, so a station deciding at `t` sees every frame
/// boundary at `t` but not the RTSs started at `t` by other stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    /// End of an RTS: decide whether the AP answers.
    RtsEnd,
    /// AP starts the CTS: downlink hearers become busy.
    CtsStart,
    /// End of an exchange whose RTS succeeded.
    ExchangeEnd,
    /// The station's counter reaches zero (`aux` = end of the CBAP).
    Expire,
    /// The CBAP ends while the station is counting down.
    Freeze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    kind: EventKind,
    seq: u64,
    station: usize,
    /// RTS start for frame events; CBAP end for `Expire`.
    aux: u64,
    /// Station wake-up generation (stale wake-ups are ignored).
    version: u64,
}

#[derive(Debug, Clone, Copy)]
struct StaState {
    stage: u32,
    counter: u64,
    /// Inside its own exchange (from RTS start until the outcome is known).
    transmitting: bool,
    /// Earliest time the station may count down again (own exchange + DIFS).
    ready_at: u64,
    /// Medium sensed busy until this time (includes the DIFS deferral).
    busy_until: u64,
    /// Time the current packet entered backoff.
    packet_start: u64,
    /// A countdown run is in progress, started at slot boundary `count_from`.
    counting: bool,
    count_from: u64,
    version: u64,
}

#[derive(Debug, Clone, Copy)]
struct InFlightRts {
    station: usize,
    start: u64,
    end: u64,
    failed: bool,
}

/// Frame timings in nanoseconds.
#[derive(Debug, Clone, Copy)]
struct Timing {
    slot: u64,
    rts: u64,
    /// RTS start → CTS start.
    cts_offset: u64,
    /// Full successful exchange `T_s`.
    success: u64,
    /// Failed attempt up to re-entering backoff, `T_c`.
    collision: u64,
    difs: u64,
}

impl Timing {
    fn new(p: &EdcaParams) -> Self {
        Self {
            slot: to_ns(p.slot_sigma),
            rts: to_ns(p.t_rts),
            cts_offset: to_ns(p.t_rts + p.sifs + p.delta),
            success: to_ns(p.t_success()),
            collision: to_ns(p.t_collision()),
            difs: to_ns(p.difs),
        }
    }
}

/// Event-driven engine.
///
/// Each station counts down in runs: a run starts at a slot boundary `r`
/// (the end of its own DIFS, the end of a sensed busy period plus DIFS, or a
/// CBAP start) and has boundaries `r, r + σ, …`; the counter is decremented at
/// every boundary and the station transmits at the boundary where it is zero,
/// i.e. at `r + counter·σ`. A run is settled (decrements credited) when the
/// medium turns busy or the CBAP ends. Stations that resume after the same
/// busy period share boundaries, which is what produces same-slot collisions.
struct Engine<'a> {
    cfg: &'a SimConfig,
    schedule: &'a BiSchedule,
    timing: Timing,
    horizon: u64,
    rng: ChaCha8Rng,
    sta: Vec<StaState>,
    events: BinaryHeap<Reverse<Event>>,
    seq: u64,
    rts: Vec<InFlightRts>,
    ap_engaged_until: u64,
    /// Start of the measurement window.
    measure_from: u64,
    m: SimMetrics,
    delay_sum: f64,
    up_hearers: Vec<Vec<usize>>,
    down_hearers: Vec<Vec<usize>>,
    trace: Option<Vec<TraceEvent>>,
}

impl<'a> Engine<'a> {
    fn new(topo: &Topology, cfg: &'a SimConfig, schedule: &'a BiSchedule, seed: u64, trace: bool) -> Self {
        let n = topo.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w0 = cfg.params.window(0);
        let sta = (0..n)
            .map(|_| StaState {
                stage: 0,
                counter: rng.random_range(0..w0),
                transmitting: false,
                ready_at: 0,
                busy_until: 0,
                packet_start: 0,
                counting: false,
                count_from: 0,
                version: 0,
            })
            .collect();
        let up_hearers = (0..n).map(|j| (0..n).filter(|&i| i != j && topo.hears_uplink(i, j)).collect()).collect();
        let down_hearers = (0..n).map(|j| (0..n).filter(|&i| i != j && topo.hears_downlink(i, j)).collect()).collect();
        Self {
            cfg,
            schedule,
            timing: Timing::new(&cfg.params),
            horizon: schedule.t_bi * cfg.n_bis as u64,
            rng,
            sta,
            events: BinaryHeap::new(),
            seq: 0,
            rts: Vec::new(),
            ap_engaged_until: 0,
            measure_from: schedule.t_bi * cfg.warmup_bis as u64,
            m: SimMetrics { min_delay: f64::INFINITY, stations: n, ..SimMetrics::default() },
            delay_sum: 0.0,
            up_hearers,
            down_hearers,
            trace: trace.then(Vec::new),
        }
    }

    fn push(&mut self, time: u64, kind: EventKind, station: usize, aux: u64, version: u64) {
        self.seq += 1;
        self.events.push(Reverse(Event { time, kind, seq: self.seq, station, aux, version }));
    }

    fn record(&mut self, time: u64, station: usize, kind: TraceKind) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent { time, station, kind });
        }
    }

    fn measuring(&self, t: u64) -> bool {
        t >= self.measure_from
    }

    /// The earliest CBAP (absolute `[start, end)`) that ends after `t`,
    /// or `None` past the horizon.
    fn locate_cbap(&self, t: u64) -> Option<(u64, u64)> {
        let bi_len = self.schedule.t_bi;
        let mut bi = t / bi_len;
        loop {
            let base = bi * bi_len;
            if base >= self.horizon {
                return None;
            }
            for iv in self.schedule.cbaps() {
                if iv.end > iv.start && base + iv.end > t {
                    let start = base + iv.start;
                    return (start < self.horizon).then_some((start, base + iv.end));
                }
            }
            bi += 1;
        }
    }

    /// Starts a countdown run for station `j` at the first admissible time ≥ `now`.
    fn arm(&mut self, j: usize, now: u64) {
        let s = self.sta[j];
        if s.transmitting {
            return;
        }
        let r = now.max(s.ready_at).max(s.busy_until);
        let version = s.version + 1;
        self.sta[j].version = version;
        self.sta[j].counting = false;
        let Some((cs, ce)) = self.locate_cbap(r) else { return };
        let r = r.max(cs);
        let s = &mut self.sta[j];
        s.counting = true;
        s.count_from = r;
        let expire = r + s.counter * self.timing.slot;
        if expire < ce {
            self.push(expire, EventKind::Expire, j, ce, version);
        } else {
            self.push(ce, EventKind::Freeze, j, 0, version);
        }
    }

    /// Credits the decrements of station `i`'s current run up to time `x`
    /// (boundaries `≤ x` if `inclusive`, else `< x`) and stops the run.
    fn settle(&mut self, i: usize, x: u64, inclusive: bool) {
        let slot = self.timing.slot;
        let s = &mut self.sta[i];
        if !s.counting {
            return;
        }
        let done = if x < s.count_from || (x == s.count_from && !inclusive) {
            0
        } else if inclusive {
            (x - s.count_from) / slot + 1
        } else {
            (x - s.count_from).div_ceil(slot)
        };
        s.counter -= done.min(s.counter);
        s.counting = false;
        s.version += 1;
    }

    /// Marks station `i` busy until `until` as of time `x`.
    fn make_busy(&mut self, i: usize, until: u64, x: u64, inclusive: bool) {
        if self.sta[i].busy_until >= until {
            return;
        }
        self.sta[i].busy_until = until;
        if self.sta[i].transmitting {
            return;
        }
        self.settle(i, x, inclusive);
        self.arm(i, x);
    }

    fn on_rts_end(&mut self, ev: Event) {
        let idx = self.rts.iter().position(|r| r.station == ev.station && r.start == ev.aux).expect("in-flight RTS");
        let rts = self.rts.swap_remove(idx);
        let j = ev.station;
        if rts.failed {
            if self.measuring(ev.time) {
                self.m.tx_attempts += 1;
                self.m.collision_count += 1;
            }
            self.record(ev.time, j, TraceKind::RtsFailed);
            self.fail(j, ev.aux + self.timing.collision, ev.time);
        } else {
            let end = ev.aux + self.timing.success;
            self.ap_engaged_until = end;
            // Uplink hearers decoded the RTS: they defer for the whole exchange.
            for k in 0..self.up_hearers[j].len() {
                let i = self.up_hearers[j][k];
                self.make_busy(i, end + self.timing.difs, ev.time, false);
            }
            self.push(ev.aux + self.timing.cts_offset, EventKind::CtsStart, j, ev.aux, 0);
            self.push(end, EventKind::ExchangeEnd, j, ev.aux, 0);
        }
    }

    fn on_exchange_end(&mut self, ev: Event) {
        let j = ev.station;
        let ready = ev.time + self.timing.difs;
        let error = self.cfg.p_e > 0.0 && self.rng.random::<f64>() < self.cfg.p_e;
        if self.measuring(ev.time) {
            self.m.tx_attempts += 1;
        }
        if error {
            if self.measuring(ev.time) {
                self.m.error_count += 1;
            }
            self.record(ev.time, j, TraceKind::ChannelError);
            self.fail(j, ready, ev.time);
        } else {
            if self.measuring(ev.time) {
                let d = (ev.time - self.sta[j].packet_start) as f64 / NS;
                self.m.success_count += 1;
                self.m.delivered_bits += self.cfg.params.payload_bits;
                self.delay_sum += d;
                self.m.min_delay = self.m.min_delay.min(d);
            }
            self.record(ev.time, j, TraceKind::Success);
            self.new_packet(j, ready, ev.time);
        }
    }

    /// Failed attempt: advance the stage or drop the packet.
    fn fail(&mut self, j: usize, ready: u64, now: u64) {
        if self.sta[j].stage >= self.cfg.params.m {
            if self.measuring(now) {
                self.m.drop_count += 1;
            }
            self.record(now, j, TraceKind::Drop);
            self.new_packet(j, ready, now);
        } else {
            let stage = self.sta[j].stage + 1;
            let counter = self.rng.random_range(0..self.cfg.params.window(stage));
            let s = &mut self.sta[j];
            s.stage = stage;
            s.counter = counter;
            s.transmitting = false;
            s.ready_at = ready;
            self.arm(j, now);
        }
    }

    fn new_packet(&mut self, j: usize, ready: u64, now: u64) {
        let counter = self.rng.random_range(0..self.cfg.params.window(0));
        let s = &mut self.sta[j];
        s.stage = 0;
        s.counter = counter;
        s.transmitting = false;
        s.ready_at = ready;
        s.packet_start = ready;
        self.arm(j, now);
    }

    /// Handles all station wake-ups at time `t` as one simultaneous batch.
    fn wake_batch(&mut self, t: u64, batch: &[Event]) {
        let mut accessors = Vec::new();
        for ev in batch {
            let j = ev.station;
            if ev.version != self.sta[j].version {
                continue;
            }
            match ev.kind {
                EventKind::Freeze => {
                    self.settle(j, t, false);
                    self.arm(j, t);
                }
                EventKind::Expire => {
                    self.sta[j].counter = 0;
                    self.sta[j].counting = false;
                    if ev.aux - t < self.timing.success {
                        // Not enough time left in the CBAP: draw a new counter
                        // in the same stage; this boundary is consumed.
                        let w = self.cfg.params.window(self.sta[j].stage);
                        self.sta[j].counter = self.rng.random_range(0..w);
                        self.record(t, j, TraceKind::Redraw);
                        self.arm(j, t + self.timing.slot);
                    } else {
                        accessors.push(j);
                    }
                }
                _ => unreachable!("frame events are not batched"),
            }
        }
        for &j in &accessors {
            let s = &mut self.sta[j];
            s.transmitting = true;
            s.counting = false;
            s.version += 1;
            s.ready_at = u64::MAX;
        }
        for &j in &accessors {
            self.start_rts(j, t);
        }
    }

    fn start_rts(&mut self, j: usize, t: u64) {
        self.record(t, j, TraceKind::Access);
        match self.locate_cbap(t) {
            Some((cs, ce)) if cs <= t && t + self.timing.success <= ce => {}
            _ => self.m.out_of_cbap_attempts += 1,
        }
        let end = t + self.timing.rts;
        // The AP cannot decode a new RTS while serving another exchange.
        let mut failed = self.ap_engaged_until > t;
        for r in self.rts.iter_mut() {
            if r.end > t {
                r.failed = true;
                failed = true;
            }
        }
        self.rts.push(InFlightRts { station: j, start: t, end, failed });
        for k in 0..self.up_hearers[j].len() {
            let i = self.up_hearers[j][k];
            self.make_busy(i, end + self.timing.difs, t, true);
        }
        self.push(end, EventKind::RtsEnd, j, t, 0);
    }

    fn run(mut self) -> (SimMetrics, Option<Vec<TraceEvent>>) {
        for j in 0..self.sta.len() {
            self.arm(j, 0);
        }
        let mut batch = Vec::new();
        while let Some(Reverse(ev)) = self.events.pop() {
            if ev.time > self.horizon {
                break;
            }
            match ev.kind {
                EventKind::RtsEnd => self.on_rts_end(ev),
                EventKind::CtsStart => {
                    let until = ev.aux + self.timing.success + self.timing.difs;
                    for k in 0..self.down_hearers[ev.station].len() {
                        let i = self.down_hearers[ev.station][k];
                        self.make_busy(i, until, ev.time, false);
                    }
                }
                EventKind::ExchangeEnd => self.on_exchange_end(ev),
                EventKind::Expire | EventKind::Freeze => {
                    batch.clear();
                    batch.push(ev);
                    while let Some(&Reverse(next)) = self.events.peek() {
                        if next.time != ev.time || !matches!(next.kind, EventKind::Expire | EventKind::Freeze) {
                            break;
                        }
                        batch.push(next);
                        self.events.pop();
                    }
                    let b = std::mem::take(&mut batch);
                    self.wake_batch(ev.time, &b);
                    batch = b;
                }
            }
        }
        self.m.sim_time = self.horizon.saturating_sub(self.measure_from) as f64 / NS;
        self.m.mean_delay = if self.m.success_count > 0 { self.delay_sum / self.m.success_count as f64 } else { f64::NAN };
        (self.m, self.trace)
    }
}

/// Simulates one topology.
pub fn run(topology: &Topology, cfg: &SimConfig, seed: u64) -> SimMetrics {
    let schedule = BiSchedule::new(&cfg.dti);
    Engine::new(topology, cfg, &schedule, seed, false).run().0
}

/// Simulates one topology and returns the event trace as well.
pub fn run_traced(topology: &Topology, cfg: &SimConfig, seed: u64) -> (SimMetrics, Vec<TraceEvent>) {
    let schedule = BiSchedule::new(&cfg.dti);
    let (m, t) = Engine::new(topology, cfg, &schedule, seed, true).run();
    (m, t.unwrap_or_default())
}

/// SplitMix64 step, used to derive independent per-replication seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mean and 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    /// Number of replications that contributed (finite values).
    pub samples: usize,
}

impl Estimate {
    /// Estimate over the finite entries of `values`.
    pub fn from_samples(values: &[f64]) -> Self {
        let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        let n = v.len();
        if n == 0 {
            return Self { mean: f64::NAN, half_width: f64::NAN, samples: 0 };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { mean, half_width: f64::NAN, samples: n };
        }
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
        Self { mean, half_width: 1.96 * (var / n as f64).sqrt(), samples: n }
    }
}

/// Replicated simulation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedMetrics {
    pub throughput_bps: Estimate,
    pub delay_s: Estimate,
    pub drop_rate: Estimate,
    pub failure_rate: Estimate,
    pub runs: Vec<SimMetrics>,
}

/// How each replication obtains its topology.
#[derive(Debug, Clone, Copy)]
pub enum TopologySource<'a> {
    /// Fresh PPP placement per replication.
    Poisson { lambda: f64, geo: &'a BeamGeometry },
    /// The same fixed topology for every replication (only the MAC randomness varies).
    Fixed(&'a Topology),
}

/// Runs `n_reps` independent replications. Replication `r` uses seed
/// `derive_seed(base_seed, r)` for its MAC and, for PPP placements, an
/// independent derived seed for its topology.
pub fn replicate(source: TopologySource<'_>, cfg: &SimConfig, n_reps: usize, base_seed: u64) -> ReplicatedMetrics {
    replicate_with_seeds(source, cfg, &(0..n_reps as u64).map(|r| derive_seed(base_seed, r)).collect::<Vec<_>>())
}

/// [`replicate`] with explicit per-replication seeds.
pub fn replicate_with_seeds(source: TopologySource<'_>, cfg: &SimConfig, seeds: &[u64]) -> ReplicatedMetrics {
    let runs: Vec<SimMetrics> = seeds
        .iter()
        .map(|&seed| match source {
            TopologySource::Poisson { lambda, geo } => {
                let topo = place_stations(lambda, geo, derive_seed(seed, 0x7070));
                run(&topo, cfg, seed)
            }
            TopologySource::Fixed(topo) => run(topo, cfg, seed),
        })
        .collect();
    let col = |f: &dyn Fn(&SimMetrics) -> f64| Estimate::from_samples(&runs.iter().map(f).collect::<Vec<_>>());
    ReplicatedMetrics {
        throughput_bps: col(&|m| m.throughput_bps()),
        delay_s: col(&|m| m.mean_delay),
        drop_rate: col(&|m| m.drop_rate()),
        failure_rate: col(&|m| m.failure_rate()),
        runs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_sums_to_bi() {
        for nu in [0.1, 0.25, 0.5, 1.0] {
            for (nc, ns) in [(1, 1), (3, 3), (1, 10), (11, 10), (5, 2)] {
                let dti = DtiConfig::from_nu(0.1, 0.002, nu, nc, ns).unwrap();
                let s = BiSchedule::new(&dti);
                assert_eq!(s.intervals.first().unwrap().kind, IntervalKind::Bhi);
                assert_eq!(s.intervals.last().unwrap().end, s.t_bi);
                for w in s.intervals.windows(2) {
                    assert_eq!(w[0].end, w[1].start);
                }
                assert_eq!(s.cbaps().count(), nc as usize);
                let cb: u64 = s.cbaps().map(|i| i.end - i.start).sum();
                assert!((cb as f64 - dti.t_cbap * 1e9).abs() <= nc as f64, "{cb}");
                if nu < 1.0 {
                    assert!(matches!(s.intervals[2].kind, IntervalKind::Sp(0)));
                }
            }
        }
    }

    #[test]
    fn matrices_have_true_diagonal_and_symmetric_uplink() {
        let geo = BeamGeometry::new(6, 4, 20.0).unwrap();
        let t = place_stations(0.05, &geo, 3);
        for i in 0..t.len() {
            assert!(t.hears_uplink(i, i) && t.hears_downlink(i, i));
            for j in 0..t.len() {
                assert_eq!(t.hears_uplink(i, j), t.hears_uplink(j, i));
                // Downlink hearing is sector co-membership.
                assert_eq!(t.hears_downlink(i, j), t.stations[i].sector == t.stations[j].sector);
            }
        }
    }

    #[test]
    fn empty_topology_runs() {
        let geo = BeamGeometry::new(6, 4, 20.0).unwrap();
        let t = place_stations(0.0, &geo, 1);
        assert!(t.is_empty());
        let cfg = SimConfig::new(EdcaParams::reference(), DtiConfig::reference(0.5), 0.0);
        let m = run(&t, &cfg, 1);
        assert_eq!(m.tx_attempts, 0);
        assert_eq!(m.throughput_bps(), 0.0);
    }

    #[test]
    fn estimate_half_width() {
        let e = Estimate::from_samples(&[1.0, 1.0]);
        assert_eq!(e.half_width, 0.0);
        let e = Estimate::from_samples(&[1.0, 3.0, f64::NAN]);
        assert_eq!(e.samples, 2);
        assert_eq!(e.mean, 2.0);
        assert!((e.half_width - 1.96 * (2.0f64 / 2.0).sqrt()).abs() < 1e-15);
    }

    fn small_cfg(nu: f64, p_e: f64) -> SimConfig {
        SimConfig { n_bis: 4, warmup_bis: 1, ..SimConfig::new(EdcaParams::reference(), DtiConfig::reference(nu), p_e) }
    }

    #[test]
    fn attempts_are_conserved() {
        let geo = BeamGeometry::new(8, 6, 23.5).unwrap();
        let topo = place_stations(0.03, &geo, 11);
        let m = run(&topo, &small_cfg(0.5, 0.1), 5);
        assert!(m.success_count > 0 && m.collision_count > 0 && m.error_count > 0);
        assert_eq!(m.tx_attempts, m.success_count + m.collision_count + m.error_count);
        assert!(m.delivered_bits <= m.tx_attempts as f64 * EdcaParams::reference().payload_bits);
    }

    #[test]
    fn transmissions_stay_inside_cbaps() {
        let geo = BeamGeometry::new(8, 6, 23.5).unwrap();
        let topo = place_stations(0.02, &geo, 4);
        let cfg = small_cfg(0.25, 0.0);
        let (m, trace) = run_traced(&topo, &cfg, 9);
        assert_eq!(m.out_of_cbap_attempts, 0);
        let sched = BiSchedule::new(&cfg.dti);
        let t_s = to_ns(cfg.params.t_success());
        let accesses: Vec<_> = trace.iter().filter(|e| e.kind == TraceKind::Access).collect();
        assert!(!accesses.is_empty());
        for e in accesses {
            let off = e.time % sched.t_bi;
            assert!(sched.cbaps().any(|iv| iv.start <= off && off + t_s <= iv.end), "{e}");
        }
    }

    #[test]
    fn delays_cover_an_exchange() {
        let geo = BeamGeometry::new(8, 6, 23.5).unwrap();
        let topo = place_stations(0.02, &geo, 8);
        let cfg = small_cfg(1.0, 0.0);
        let m = run(&topo, &cfg, 2);
        assert!(m.min_delay >= cfg.params.t_success());
        assert!(m.mean_delay >= m.min_delay);
    }

    #[test]
    fn lone_station_never_fails() {
        let topo = Topology::full_hearing(1, 0);
        let m = run(&topo, &small_cfg(0.5, 0.0), 3);
        assert_eq!(m.drop_count, 0);
        assert_eq!(m.collision_count, 0);
        assert_eq!(m.success_count, m.tx_attempts);
    }

    #[test]
    fn runs_are_deterministic() {
        let geo = BeamGeometry::new(8, 6, 23.5).unwrap();
        let topo = place_stations(0.03, &geo, 1);
        let cfg = small_cfg(0.75, 0.05);
        assert_eq!(run(&topo, &cfg, 42), run(&topo, &cfg, 42));
        assert_ne!(run(&topo, &cfg, 42), run(&topo, &cfg, 43));
    }

    #[test]
    fn mutually_hearing_stations_collide_only_in_the_same_slot() {
        // With full hearing every station senses every RTS, so an RTS can only
        // fail if another one started at exactly the same instant.
        let topo = Topology::full_hearing(6, 0);
        let (m, trace) = run_traced(&topo, &small_cfg(1.0, 0.0), 7);
        assert!(m.collision_count > 0);
        let mut starts: Vec<(usize, u64)> = Vec::new();
        for e in &trace {
            match e.kind {
                TraceKind::Access => starts.push((e.station, e.time)),
                TraceKind::RtsFailed => {
                    let (_, t0) = *starts.iter().rev().find(|(s, _)| *s == e.station).unwrap();
                    let same = starts.iter().filter(|(s, t)| *s != e.station && *t == t0).count();
                    assert!(same > 0, "failure without a simultaneous access at {t0}");
                }
                _ => {}
            }
        }
    }

    #[test]
    fn replicate_is_reproducible() {
        let geo = BeamGeometry::new(8, 6, 23.5).unwrap();
        let cfg = small_cfg(0.5, 0.0);
        let src = TopologySource::Poisson { lambda: 0.01, geo: &geo };
        let a = replicate(src, &cfg, 3, 99);
        let b = replicate(src, &cfg, 3, 99);
        assert_eq!(a, b);
        let same = replicate_with_seeds(src, &cfg, &[5, 5]);
        assert_eq!(same.throughput_bps.half_width, 0.0);
        assert_eq!(same.delay_s.half_width, 0.0);
    }
}

//! Performance model of contention-based access periods (CBAPs) in IEEE
//! 802.11ad networks with directional antennas.
//!
//! - [`geometry`]: beam model, overhearing areas and the four-region split.
//! - [`analytical`]: coupled backoff / transmission-state Markov chains solved
//!   as a fixed point, and the throughput, delay and drop metrics.
//! - [`simulator`]: slot-level Monte Carlo simulation of the same MAC.
//! - [`quadrature`]: adaptive Gauss–Kronrod integration used as a reference.

pub mod analytical;
pub mod geometry;
pub mod quadrature;
pub mod simulator;

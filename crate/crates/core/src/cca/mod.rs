//! Simplified congestion controllers.
//!
//! Rates are in bits per second, times in microseconds, delays reported to the
//! controllers in milliseconds.

use crate::error::{config, Result};
use crate::Micros;

pub mod bbr;
pub mod cubic;
pub mod fluid;
pub mod gcc;

pub use bbr::Bbr;
pub use cubic::Cubic;
pub use fluid::{fluid_cca_step, FluidCc};
pub use gcc::Gcc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CcaKind {
    Fluid,
    Cubic,
    Copa,
    Gcc,
    Bbr,
}

impl CcaKind {
    pub fn name(self) -> &'static str {
        match self {
            CcaKind::Fluid => "fluid",
            CcaKind::Cubic => "cubic",
            CcaKind::Copa => "copa",
            CcaKind::Gcc => "gcc",
            CcaKind::Bbr => "bbr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CcaParams {
    /// Responsiveness of the fluid controller (ms^-2).
    pub fluid_k: f64,
    /// Delay target of the fluid controller (ms).
    pub fluid_q0_ms: f64,
    /// Delay target of the Copa-like controller (ms).
    pub copa_target_ms: f64,
    /// Oscillation period of the Copa-like controller in round trips.
    pub copa_period_rtts: f64,
    /// Queueing-delay threshold that signals overuse to the GCC-like controller (ms).
    pub gcc_threshold_ms: f64,
    /// Multiplicative decrease of the GCC-like controller.
    pub gcc_beta: f64,
    /// Window reduction factor of the cubic controller on loss.
    pub cubic_beta: f64,
    pub floor_bps: f64,
    pub ceiling_bps: f64,
    pub initial_rate_bps: f64,
}

impl Default for CcaParams {
    fn default() -> Self {
        Self {
            fluid_k: 0.001,
            fluid_q0_ms: 10.0,
            copa_target_ms: 5.0,
            copa_period_rtts: 5.0,
            gcc_threshold_ms: 6.0,
            gcc_beta: 0.85,
            cubic_beta: 0.7,
            floor_bps: 150e3,
            ceiling_bps: 10e9,
            initial_rate_bps: 1e6,
        }
    }
}

impl CcaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.fluid_k > 0.0 && self.fluid_q0_ms >= 0.0 && self.copa_target_ms >= 0.0) {
            return config("fluid/copa parameters must be positive");
        }
        if !(self.copa_period_rtts > 0.0 && self.gcc_threshold_ms > 0.0) {
            return config("copa period and gcc threshold must be positive");
        }
        if !(self.gcc_beta > 0.0 && self.gcc_beta < 1.0 && self.cubic_beta > 0.0 && self.cubic_beta < 1.0) {
            return config("decrease factors must be in (0, 1)");
        }
        if !(self.floor_bps > 0.0 && self.floor_bps <= self.initial_rate_bps && self.initial_rate_bps <= self.ceiling_bps) {
            return config("need 0 < floor <= initial rate <= ceiling");
        }
        Ok(())
    }
}

/// Feedback delivered to a controller when a packet is acknowledged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AckSample {
    pub now: Micros,
    pub rtt_us: Micros,
    pub min_rtt_us: Micros,
    pub acked_bytes: u32,
    /// Bytes acknowledged over the last round trip divided by that round trip.
    pub delivery_bps: f64,
    /// Per-packet delivery-rate sample (delivered since the packet was sent over elapsed time).
    pub rate_sample_bps: f64,
    /// Total bytes delivered when the acknowledged packet was sent.
    pub delivered_at_send: u64,
    /// Total bytes delivered including this acknowledgement.
    pub delivered: u64,
    pub inflight: u64,
    pub app_limited: bool,
}

impl AckSample {
    pub fn queue_delay_ms(&self) -> f64 {
        self.rtt_us.saturating_sub(self.min_rtt_us) as f64 / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cca {
    Fluid(FluidCc),
    Cubic(Cubic),
    Gcc(Gcc),
    Bbr(Bbr),
}

impl Cca {
    pub fn new(kind: CcaKind, p: &CcaParams, seed: u64) -> Self {
        match kind {
            CcaKind::Fluid => Cca::Fluid(FluidCc::new(p.fluid_k, p.fluid_q0_ms, p)),
            CcaKind::Copa => Cca::Fluid(FluidCc::copa(p)),
            CcaKind::Cubic => Cca::Cubic(Cubic::new(p.cubic_beta)),
            CcaKind::Gcc => Cca::Gcc(Gcc::new(p)),
            CcaKind::Bbr => Cca::Bbr(Bbr::new(p, seed)),
        }
    }

    pub fn on_ack(&mut self, s: &AckSample) {
        match self {
            Cca::Fluid(c) => c.on_ack(s),
            Cca::Cubic(c) => c.on_ack(s),
            Cca::Gcc(c) => c.on_ack(s),
            Cca::Bbr(c) => c.on_ack(s),
        }
    }

    /// A packet sent at `sent_at` was lost; reported at `now`.
    pub fn on_loss(&mut self, now: Micros, sent_at: Micros, bytes: u32) {
        match self {
            Cca::Fluid(_) | Cca::Gcc(_) | Cca::Bbr(_) => {}
            Cca::Cubic(c) => c.on_loss(now, sent_at, bytes),
        }
    }

    /// Target media/sending rate; for window controllers an estimate cwnd/rtt.
    pub fn rate_bps(&self, srtt_us: Micros) -> f64 {
        match self {
            Cca::Fluid(c) => c.rate_bps(),
            Cca::Gcc(c) => c.rate_bps(),
            Cca::Bbr(c) => c.bw_bps(),
            Cca::Cubic(c) => c.cwnd() as f64 * 8e6 / srtt_us.max(1) as f64,
        }
    }

    /// Pacing rate for bulk transmission; `None` means ack-clocked bursts.
    pub fn pacing_bps(&self) -> Option<f64> {
        match self {
            Cca::Fluid(c) => Some(c.rate_bps()),
            Cca::Gcc(c) => Some(c.rate_bps()),
            Cca::Bbr(c) => Some(c.pacing_bps()),
            Cca::Cubic(_) => None,
        }
    }

    /// Congestion window cap on bytes in flight, if any.
    pub fn cwnd_bytes(&self) -> Option<u64> {
        match self {
            Cca::Cubic(c) => Some(c.cwnd()),
            Cca::Bbr(c) => Some(c.cwnd()),
            Cca::Fluid(_) | Cca::Gcc(_) => None,
        }
    }
}

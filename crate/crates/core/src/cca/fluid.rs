//! Delay-target rate controller whose rate follows `ds/dt = -k C (q - q0)`.

use core::f64::consts::PI;

use super::{AckSample, CcaParams};
use crate::error::{invalid, Result};
use crate::Micros;

/// One Euler step: `rate - k (q_delayed - q0) dt c_scale`, clamped to `[floor, ceiling]`.
/// `k` in ms^-2, delays and `dt` in ms, rates in any common unit.
#[allow(clippy::too_many_arguments)]
pub fn fluid_cca_step(
    rate: f64,
    q_delayed: f64,
    dt: f64,
    k: f64,
    q0: f64,
    c_scale: f64,
    floor: f64,
    ceiling: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return invalid("step must be positive");
    }
    Ok((rate - k * (q_delayed - q0) * dt * c_scale).clamp(floor, ceiling))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidCc {
    k: f64,
    q0: f64,
    rate: f64,
    floor: f64,
    ceiling: f64,
    last: Option<Micros>,
    /// When set, `k` follows the round trip so the period is this many RTTs.
    period_rtts: Option<f64>,
}

impl FluidCc {
    pub fn new(k: f64, q0_ms: f64, p: &CcaParams) -> Self {
        Self {
            k,
            q0: q0_ms,
            rate: p.initial_rate_bps,
            floor: p.floor_bps,
            ceiling: p.ceiling_bps,
            last: None,
            period_rtts: None,
        }
    }

    /// Copa-like: delay target `copa_target_ms`, oscillation every `copa_period_rtts` RTTs.
    pub fn copa(p: &CcaParams) -> Self {
        let mut c = Self::new(p.fluid_k, p.copa_target_ms, p);
        c.period_rtts = Some(p.copa_period_rtts);
        c
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn rate_bps(&self) -> f64 {
        self.rate
    }

    pub fn on_ack(&mut self, s: &AckSample) {
        let rtt_ms = s.min_rtt_us as f64 / 1000.0;
        if let Some(n) = self.period_rtts {
            if rtt_ms > 0.0 {
                let w = 2.0 * PI / (n * rtt_ms);
                self.k = w * w;
            }
        }
        let Some(last) = self.last.replace(s.now) else {
            return;
        };
        let dt = (s.now.saturating_sub(last) as f64 / 1000.0).min(rtt_ms.max(1.0));
        if dt <= 0.0 {
            return;
        }
        let delivered = s.delivery_bps;
        let scale = delivered.max(self.floor);
        let Ok(r) = fluid_cca_step(self.rate, s.queue_delay_ms(), dt, self.k, self.q0, scale, self.floor, self.ceiling) else {
            return;
        };
        // Damping towards the delivery rate over one round trip keeps the delayed loop stable.
        let damp = if delivered > 0.0 { self.k * rtt_ms * (self.rate - delivered) * dt } else { 0.0 };
        self.rate = (r - damp).clamp(self.floor, self.ceiling);
    }
}

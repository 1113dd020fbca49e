//! Delay-based rate controller with multiplicative decrease on overuse.
//!
//! Overuse is judged on the smoothed delay level of the last packet group. The
//! regression trend over recent groups is kept as a diagnostic only.

use alloc::collections::VecDeque;

use super::{AckSample, CcaParams};
use crate::{Micros, MTU};

/// Acks within this span form one delay sample.
const GROUP_US: Micros = 5_000;
/// Groups in the trend regression.
const TREND_GROUPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Gcc {
    rate: f64,
    floor: f64,
    ceiling: f64,
    threshold: f64,
    beta: f64,
    last: Option<Micros>,
    group_start: Micros,
    group_sum: f64,
    group_n: u32,
    groups: VecDeque<(f64, f64)>,
    slope: f64,
    hold_until: Micros,
    /// Before the first overuse the rate ramps per round trip, like an initial probe.
    probing: bool,
}

impl Gcc {
    pub fn new(p: &CcaParams) -> Self {
        Self {
            rate: p.initial_rate_bps,
            floor: p.floor_bps,
            ceiling: p.ceiling_bps,
            threshold: p.gcc_threshold_ms,
            beta: p.gcc_beta,
            last: None,
            group_start: 0,
            group_sum: 0.0,
            group_n: 0,
            groups: VecDeque::new(),
            slope: 0.0,
            hold_until: 0,
            probing: true,
        }
    }

    pub fn rate_bps(&self) -> f64 {
        self.rate
    }

    /// Least-squares slope of queueing delay against time, in ms per ms.
    pub fn trend(&self) -> f64 {
        self.slope
    }

    fn close_group(&mut self) {
        if self.group_n == 0 {
            return;
        }
        let t = self.group_start as f64 / 1000.0;
        self.groups.push_back((t, self.group_sum / self.group_n as f64));
        if self.groups.len() > TREND_GROUPS {
            self.groups.pop_front();
        }
        self.group_sum = 0.0;
        self.group_n = 0;
        let n = self.groups.len() as f64;
        if n < 2.0 {
            return;
        }
        let mt = self.groups.iter().map(|g| g.0).sum::<f64>() / n;
        let mq = self.groups.iter().map(|g| g.1).sum::<f64>() / n;
        let num: f64 = self.groups.iter().map(|g| (g.0 - mt) * (g.1 - mq)).sum();
        let den: f64 = self.groups.iter().map(|g| (g.0 - mt) * (g.0 - mt)).sum();
        if den > 0.0 {
            self.slope = num / den;
        }
    }

    pub fn on_ack(&mut self, s: &AckSample) {
        let q = s.queue_delay_ms();
        let Some(last) = self.last.replace(s.now) else {
            self.group_start = s.now;
            self.group_sum = q;
            self.group_n = 1;
            return;
        };
        if s.now >= self.group_start + GROUP_US {
            self.close_group();
            self.group_start = s.now;
        }
        self.group_sum += q;
        self.group_n += 1;
        let dt = s.now.saturating_sub(last) as f64 / 1000.0;
        if dt <= 0.0 {
            return;
        }
        let rtt_ms = (s.min_rtt_us as f64 / 1000.0).max(1.0);
        let level = self.groups.back().map_or(q, |g| g.1);
        if level > self.threshold {
            if s.now >= self.hold_until {
                let base = if s.delivery_bps > 0.0 { s.delivery_bps } else { self.rate };
                // Cut enough to drain the excess within one round trip,
                // at least 1% and never below beta.
                let excess = (level - self.threshold) / rtt_ms;
                self.rate = base * (1.0 - excess).clamp(self.beta, 0.99);
                self.hold_until = s.now + s.rtt_us;
                self.probing = false;
            }
        } else if s.now >= self.hold_until {
            let additive = MTU as f64 * 8.0 / 2.0 * 1000.0 / rtt_ms;
            let per_s = if self.probing { 0.5 * 1000.0 / rtt_ms } else { 0.08 };
            self.rate += dt / 1000.0 * f64::max(per_s * self.rate, additive);
        }
        if s.delivery_bps > 0.0 {
            self.rate = self.rate.min(1.5 * s.delivery_bps + 100e3);
        }
        self.rate = self.rate.clamp(self.floor, self.ceiling);
    }
}

//! Cubic window growth with multiplicative decrease on loss.

use super::AckSample;
use crate::{Micros, MTU};

const C: f64 = 0.4;
const MSS: f64 = MTU as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Cubic {
    beta: f64,
    cwnd: f64,
    ssthresh: f64,
    w_max: f64,
    origin: f64,
    k: f64,
    epoch: Option<Micros>,
    w_est: f64,
    recovery_start: Micros,
}

impl Cubic {
    /// Initial window of ten full-size packets.
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            cwnd: 10.0 * MSS,
            ssthresh: f64::INFINITY,
            w_max: 0.0,
            origin: 0.0,
            k: 0.0,
            epoch: None,
            w_est: 0.0,
            recovery_start: 0,
        }
    }

    pub fn cwnd(&self) -> u64 {
        self.cwnd as u64
    }

    pub fn in_slow_start(&self) -> bool {
        self.cwnd < self.ssthresh
    }

    pub fn on_ack(&mut self, s: &AckSample) {
        let acked = s.acked_bytes as f64;
        if self.cwnd < self.ssthresh {
            self.cwnd += acked;
            return;
        }
        let epoch = *self.epoch.get_or_insert_with(|| {
            if self.cwnd < self.w_max {
                self.k = libm::cbrt((self.w_max - self.cwnd) / MSS / C);
                self.origin = self.w_max;
            } else {
                self.k = 0.0;
                self.origin = self.cwnd;
            }
            self.w_est = self.cwnd;
            s.now
        });
        let t = (s.now - epoch) as f64 / 1e6 + s.min_rtt_us as f64 / 1e6;
        let d = t - self.k;
        let target = self.origin + C * d * d * d * MSS;
        if target > self.cwnd {
            self.cwnd += (target - self.cwnd) / self.cwnd * acked;
        } else {
            self.cwnd += 0.01 * MSS * acked / self.cwnd;
        }
        let b = self.beta;
        self.w_est += 3.0 * (1.0 - b) / (1.0 + b) * acked / self.cwnd * MSS;
        if self.w_est > self.cwnd {
            self.cwnd = self.w_est;
        }
    }

    /// Reduces the window once per loss event: losses of packets sent before the
    /// previous reduction are ignored.
    pub fn on_loss(&mut self, now: Micros, sent_at: Micros, _bytes: u32) {
        if sent_at < self.recovery_start {
            return;
        }
        self.recovery_start = now;
        self.epoch = None;
        self.w_max = self.cwnd;
        self.cwnd = (self.cwnd * self.beta).max(2.0 * MSS);
        self.ssthresh = self.cwnd;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ack(now: Micros) -> AckSample {
        AckSample {
            now,
            rtt_us: 40_000,
            min_rtt_us: 40_000,
            acked_bytes: 1500,
            delivery_bps: 0.0,
            rate_sample_bps: 0.0,
            delivered_at_send: 0,
            delivered: 0,
            inflight: 0,
            app_limited: false,
        }
    }

    #[test]
    fn slow_start_then_halving() {
        let mut c = Cubic::new(0.5);
        assert_eq!(c.cwnd(), 15_000);
        for i in 0..10 {
            c.on_ack(&ack(i));
        }
        assert_eq!(c.cwnd(), 30_000);
        c.on_loss(100, 50, 1500);
        assert_eq!(c.cwnd(), 15_000);
        // Same loss event.
        c.on_loss(120, 60, 1500);
        assert_eq!(c.cwnd(), 15_000);
        assert!(!c.in_slow_start());
    }

    #[test]
    fn regrows_towards_previous_max() {
        let mut c = Cubic::new(0.5);
        for i in 0..90 {
            c.on_ack(&ack(i));
        }
        let before = c.cwnd();
        c.on_loss(1000, 1000, 1500);
        let mut t = 1000;
        while t < 10_000_000 {
            t += 1000;
            c.on_ack(&ack(t));
        }
        assert!(c.cwnd() > before);
    }
}

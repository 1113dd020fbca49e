//! Random early detection over a shared FIFO.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::fifo::Fifo;
use super::{Admission, Scheduler};
use crate::packet::Packet;
use crate::Micros;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedParams {
    pub min_bytes: u64,
    pub max_bytes: u64,
    pub p_max: f64,
    pub weight: f64,
    pub idle_packet_us: u64,
}

/// Drop probability for an average queue of `avg` bytes: 0 below min, linear up
/// to `p_max` at max, 1 above max.
pub fn drop_probability(avg: f64, min: u64, max: u64, p_max: f64) -> f64 {
    let (min, max) = (min as f64, max as f64);
    if avg < min {
        0.0
    } else if avg > max {
        1.0
    } else {
        p_max * (avg - min) / (max - min)
    }
}

#[derive(Debug, Clone)]
pub struct Red {
    q: Fifo,
    params: RedParams,
    avg: f64,
    idle_since: Option<Micros>,
    rng: ChaCha8Rng,
}

impl Red {
    pub fn new(limit: u64, params: RedParams, seed: u64) -> Self {
        Self {
            q: Fifo::new(limit),
            params,
            avg: 0.0,
            idle_since: Some(0),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5245_4400),
        }
    }

    pub fn average(&self) -> f64 {
        self.avg
    }

    fn coin(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl Scheduler for Red {
    fn enqueue(&mut self, pkt: Packet, now: Micros) -> Admission {
        let w = self.params.weight;
        if let Some(since) = self.idle_since.take() {
            let m = now.saturating_sub(since) / self.params.idle_packet_us.max(1);
            self.avg *= libm::pow(1.0 - w, m as f64);
        }
        self.avg = (1.0 - w) * self.avg + w * self.q.len_bytes() as f64;
        let p = drop_probability(self.avg, self.params.min_bytes, self.params.max_bytes, self.params.p_max);
        if p > 0.0 && (p >= 1.0 || self.coin() < p) {
            self.q.push_drop(pkt);
            return Admission::Dropped;
        }
        self.q.enqueue(pkt, now)
    }

    fn dequeue(&mut self, now: Micros) -> Option<Packet> {
        let p = self.q.pop();
        if self.q.len_packets() == 0 && self.idle_since.is_none() {
            self.idle_since = Some(now);
        }
        p
    }

    fn take_drops(&mut self) -> Vec<Packet> {
        self.q.take_drops()
    }

    fn len_bytes(&self) -> u64 {
        self.q.len_bytes()
    }

    fn len_packets(&self) -> usize {
        self.q.len_packets()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp() {
        assert_eq!(drop_probability(10_000.0, 30_000, 90_000, 0.1), 0.0);
        assert!((drop_probability(60_000.0, 30_000, 90_000, 0.1) - 0.05).abs() < 1e-12);
        assert_eq!(drop_probability(95_000.0, 30_000, 90_000, 0.1), 1.0);
    }
}

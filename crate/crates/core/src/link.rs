//! Bottleneck link: piecewise-constant capacity, propagation delay, buffer size.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::packet::Packet;
use crate::sched::Scheduler;
use crate::{tx_time, Micros, US_PER_MS};

/// Piecewise-constant capacity series. Segment starts are in microseconds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CapacityProfile {
    segments: Vec<(Micros, f64)>,
}

impl CapacityProfile {
    pub fn constant(bps: f64) -> Self {
        Self {
            segments: vec![(0, bps)],
        }
    }

    /// Builds a profile from `(start_ms, bits_per_second)` pairs.
    pub fn from_ms(points: &[(f64, f64)]) -> Result<Self> {
        let mut segments = Vec::with_capacity(points.len());
        for &(t, c) in points {
            let us = libm::round(t * US_PER_MS as f64);
            if !(us >= 0.0) {
                return invalid("negative segment start");
            }
            segments.push((us as Micros, c));
        }
        Self::from_us(segments)
    }

    pub fn from_us(segments: Vec<(Micros, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return invalid("capacity profile is empty");
        }
        if segments[0].0 != 0 {
            return invalid("capacity profile must start at time 0");
        }
        for w in segments.windows(2) {
            if w[1].0 <= w[0].0 {
                return invalid("capacity profile start times must be strictly increasing");
            }
        }
        if segments.iter().any(|s| !(s.1 > 0.0) || !s.1.is_finite()) {
            return invalid("capacity must be positive");
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[(Micros, f64)] {
        &self.segments
    }

    pub fn capacity_at(&self, t: Micros) -> f64 {
        let i = self.segments.partition_point(|s| s.0 <= t);
        self.segments[i.saturating_sub(1)].1
    }

    pub fn peak(&self) -> f64 {
        self.segments.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    /// Time-weighted mean over `[0, horizon)`. With `horizon` 0 the last segment
    /// is weighted like the average segment length.
    pub fn mean(&self, horizon: Micros) -> f64 {
        let end = self.effective_end(horizon);
        let mut acc = 0.0;
        for (i, &(s, c)) in self.segments.iter().enumerate() {
            if s >= end {
                break;
            }
            let e = self.segments.get(i + 1).map_or(end, |n| n.0.min(end));
            acc += c * (e - s) as f64;
        }
        acc / end as f64
    }

    /// Time-weighted standard deviation over the same span as [`Self::mean`].
    pub fn std_dev(&self, horizon: Micros) -> f64 {
        let end = self.effective_end(horizon);
        let m = self.mean(horizon);
        let mut acc = 0.0;
        for (i, &(s, c)) in self.segments.iter().enumerate() {
            if s >= end {
                break;
            }
            let e = self.segments.get(i + 1).map_or(end, |n| n.0.min(end));
            acc += (c - m) * (c - m) * (e - s) as f64;
        }
        libm::sqrt(acc / end as f64)
    }

    fn effective_end(&self, horizon: Micros) -> Micros {
        if horizon > 0 {
            return horizon;
        }
        let last = self.segments.last().unwrap().0;
        let n = self.segments.len() as u64;
        if n == 1 {
            US_PER_MS
        } else {
            last + last / (n - 1)
        }
    }

    /// Multiplies every segment by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            segments: self.segments.iter().map(|&(t, c)| (t, c * factor)).collect(),
        }
    }
}

/// A transmission started by [`Link::transmit_next`].
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub packet: Packet,
    /// When the last bit leaves the link.
    pub done_at: Micros,
    /// When the packet reaches the far end.
    pub arrives_at: Micros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub profile: CapacityProfile,
    /// Round-trip propagation delay contributed by this hop.
    pub rtt_us: Micros,
    pub buffer_limit: u64,
    busy_until: Micros,
}

impl Link {
    /// Link whose buffer defaults to twice the bandwidth-delay product at peak capacity.
    pub fn new(profile: CapacityProfile, rtt_us: Micros) -> Self {
        let bdp = profile.peak() * rtt_us as f64 / 8e6;
        let buffer_limit = libm::ceil(2.0 * bdp).max(4.0 * crate::MTU as f64) as u64;
        Self {
            profile,
            rtt_us,
            buffer_limit,
            busy_until: 0,
        }
    }

    pub fn with_buffer(mut self, bytes: u64) -> Self {
        self.buffer_limit = bytes;
        self
    }

    pub fn one_way_delay(&self) -> Micros {
        self.rtt_us / 2
    }

    pub fn capacity_at(&self, t: Micros) -> f64 {
        self.profile.capacity_at(t)
    }

    pub fn is_idle(&self, now: Micros) -> bool {
        self.busy_until <= now
    }

    pub fn busy_until(&self) -> Micros {
        self.busy_until
    }

    /// Starts serializing the scheduler's next packet if the link is idle.
    /// The capacity in force when serialization starts applies to the whole packet.
    pub fn transmit_next(&mut self, sched: &mut dyn Scheduler, now: Micros) -> Option<Transmission> {
        if !self.is_idle(now) {
            return None;
        }
        let packet = sched.dequeue(now)?;
        let done_at = now + tx_time(packet.size, self.capacity_at(now));
        self.busy_until = done_at;
        Some(Transmission {
            packet,
            done_at,
            arrives_at: done_at + self.one_way_delay(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::FlowId;
    use crate::sched::{fifo::Fifo, Scheduler};

    #[test]
    fn serialization_time() {
        assert_eq!(tx_time(1500, 12e6), 1000);
    }

    #[test]
    fn profile_validation() {
        assert!(CapacityProfile::from_ms(&[(0.0, 1e6), (0.0, 2e6)]).is_err());
        assert!(CapacityProfile::from_ms(&[(5.0, 1e6)]).is_err());
        assert!(CapacityProfile::from_ms(&[(0.0, 0.0)]).is_err());
        let p = CapacityProfile::from_ms(&[(0.0, 1e6), (10.0, 2e6)]).unwrap();
        assert_eq!(p.capacity_at(9_999), 1e6);
        assert_eq!(p.capacity_at(10_000), 2e6);
        assert_eq!(p.mean(20_000), 1.5e6);
    }

    #[test]
    fn empty_scheduler_idles() {
        let mut link = Link::new(CapacityProfile::constant(12e6), 40_000);
        let mut q = Fifo::new(link.buffer_limit);
        assert!(link.transmit_next(&mut q, 0).is_none());
        assert!(link.is_idle(0));
    }

    #[test]
    fn capacity_step_applies_to_next_packet() {
        // 12 Mbps until 0.5 ms, then 6 Mbps. The first packet starts at 0 and
        // keeps the old rate; the second starts at 1 ms and gets the new one.
        let profile = CapacityProfile::from_us(alloc::vec![(0, 12e6), (500, 6e6)]).unwrap();
        let mut link = Link::new(profile, 40_000);
        let mut q = Fifo::new(1_000_000);
        for s in 0..2 {
            q.enqueue(Packet::new(FlowId(1), s, 1500, 0), 0);
        }
        let a = link.transmit_next(&mut q, 0).unwrap();
        assert_eq!(a.done_at, 1000);
        assert_eq!(a.arrives_at, 21_000);
        assert!(link.transmit_next(&mut q, 500).is_none());
        let b = link.transmit_next(&mut q, 1000).unwrap();
        assert_eq!(b.done_at, 3000);
    }
}

//! CoDel control law and a single-queue CoDel discipline.

use alloc::vec::Vec;

use super::fifo::Fifo;
use super::{Admission, Scheduler};
use crate::packet::Packet;
use crate::{Micros, MTU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodelParams {
    pub target: Micros,
    pub interval: Micros,
}

impl CodelParams {
    pub fn from_ms(target_ms: f64, interval_ms: f64) -> Self {
        Self {
            target: libm::round(target_ms * 1000.0) as Micros,
            interval: libm::round(interval_ms * 1000.0) as Micros,
        }
    }
}

impl Default for CodelParams {
    fn default() -> Self {
        Self::from_ms(5.0, 100.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Deliver,
    Drop,
}

/// Next drop time: `t + interval / sqrt(count)`.
pub fn control_law(t: Micros, interval: Micros, count: u32) -> Micros {
    t + libm::floor(interval as f64 / libm::sqrt(count.max(1) as f64)) as Micros
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CodelState {
    first_above: Option<Micros>,
    drop_next: Micros,
    count: u32,
    last_count: u32,
    dropping: bool,
}

impl CodelState {
    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn is_dropping(&self) -> bool {
        self.dropping
    }

    pub fn drop_next(&self) -> Micros {
        self.drop_next
    }

    fn ok_to_drop(&mut self, p: &CodelParams, now: Micros, sojourn: Micros, backlog: u64) -> bool {
        if sojourn < p.target || backlog <= MTU as u64 {
            self.first_above = None;
            return false;
        }
        match self.first_above {
            None => {
                self.first_above = Some(now + p.interval);
                false
            }
            Some(t) => now >= t,
        }
    }

    /// Decides the fate of the head packet whose queueing time is `sojourn`;
    /// `backlog` is the byte count still queued behind it.
    pub fn gate(&mut self, p: &CodelParams, now: Micros, sojourn: Micros, backlog: u64) -> Verdict {
        let ok = self.ok_to_drop(p, now, sojourn, backlog);
        if self.dropping {
            if !ok {
                self.dropping = false;
                return Verdict::Deliver;
            }
            if now >= self.drop_next {
                self.count += 1;
                self.drop_next = control_law(self.drop_next, p.interval, self.count);
                return Verdict::Drop;
            }
            Verdict::Deliver
        } else if ok {
            self.dropping = true;
            let delta = self.count.saturating_sub(self.last_count);
            self.count = if delta > 1 && now.saturating_sub(self.drop_next) < 16 * p.interval {
                delta
            } else {
                1
            };
            self.last_count = self.count;
            self.drop_next = control_law(now, p.interval, self.count);
            Verdict::Drop
        } else {
            Verdict::Deliver
        }
    }
}

#[derive(Debug, Clone)]
pub struct Codel {
    q: Fifo,
    params: CodelParams,
    state: CodelState,
}

impl Codel {
    pub fn new(limit: u64, params: CodelParams) -> Self {
        Self {
            q: Fifo::new(limit),
            params,
            state: CodelState::default(),
        }
    }
}

impl Scheduler for Codel {
    fn enqueue(&mut self, pkt: Packet, now: Micros) -> Admission {
        self.q.enqueue(pkt, now)
    }

    fn dequeue(&mut self, now: Micros) -> Option<Packet> {
        loop {
            let p = self.q.pop()?;
            let sojourn = now.saturating_sub(p.enqueue_time);
            let backlog = self.q.len_bytes() + p.size as u64;
            match self.state.gate(&self.params, now, sojourn, backlog) {
                Verdict::Deliver => return Some(p),
                Verdict::Drop => self.q.push_drop(p),
            }
        }
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

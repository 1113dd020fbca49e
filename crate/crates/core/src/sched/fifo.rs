//! Single shared tail-drop queue.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{Admission, Scheduler};
use crate::packet::Packet;
use crate::Micros;

#[derive(Debug, Clone)]
pub struct Fifo {
    q: VecDeque<Packet>,
    bytes: u64,
    limit: u64,
    drops: Vec<Packet>,
}

impl Fifo {
    pub fn new(limit: u64) -> Self {
        Self {
            q: VecDeque::new(),
            bytes: 0,
            limit,
            drops: Vec::new(),
        }
    }

    pub(crate) fn pop(&mut self) -> Option<Packet> {
        let p = self.q.pop_front()?;
        self.bytes -= p.size as u64;
        Some(p)
    }

    pub(crate) fn push_drop(&mut self, p: Packet) {
        self.drops.push(p);
    }
}

impl Scheduler for Fifo {
    fn enqueue(&mut self, mut pkt: Packet, now: Micros) -> Admission {
        if self.bytes + pkt.size as u64 > self.limit {
            self.drops.push(pkt);
            return Admission::Dropped;
        }
        pkt.enqueue_time = now;
        self.bytes += pkt.size as u64;
        self.q.push_back(pkt);
        Admission::Accepted
    }

    fn dequeue(&mut self, _now: Micros) -> Option<Packet> {
        self.pop()
    }

    fn take_drops(&mut self) -> Vec<Packet> {
        core::mem::take(&mut self.drops)
    }

    fn len_bytes(&self) -> u64 {
        self.bytes
    }

    fn len_packets(&self) -> usize {
        self.q.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::FlowId;

    #[test]
    fn global_order_and_tail_drop() {
        let mut q = Fifo::new(3000);
        q.enqueue(Packet::new(FlowId(1), 0, 1500, 0), 0);
        q.enqueue(Packet::new(FlowId(2), 0, 1000, 0), 1);
        assert_eq!(q.enqueue(Packet::new(FlowId(1), 1, 1500, 0), 2), Admission::Dropped);
        assert_eq!(q.enqueue(Packet::new(FlowId(3), 0, 500, 0), 3), Admission::Accepted);
        let d = q.take_drops();
        assert_eq!((d.len(), d[0].seq, d[0].flow), (1, 1, FlowId(1)));
        let order: Vec<_> = core::iter::from_fn(|| q.dequeue(9)).map(|p| p.flow.0).collect();
        assert_eq!(order, [1, 2, 3]);
    }
}

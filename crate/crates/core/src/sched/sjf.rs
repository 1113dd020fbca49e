//! Least-attained-service: flows are prioritised by bytes served so far.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::drr::FlowDrr;
use super::{Admission, Scheduler};
use crate::packet::{FlowId, Packet};
use crate::{Micros, MTU};

#[derive(Debug, Clone)]
pub struct Sjf {
    levels: Vec<FlowDrr>,
    thresholds: Vec<u64>,
    attained: BTreeMap<FlowId, u64>,
    limit: u64,
    bytes: u64,
    packets: usize,
    drops: Vec<Packet>,
}

impl Sjf {
    pub fn new(limit: u64, thresholds: Vec<u64>) -> Self {
        Self {
            levels: (0..=thresholds.len()).map(|_| FlowDrr::new(MTU)).collect(),
            thresholds,
            attained: BTreeMap::new(),
            limit,
            bytes: 0,
            packets: 0,
            drops: Vec::new(),
        }
    }

    pub fn level_of(&self, flow: FlowId) -> usize {
        let a = self.attained.get(&flow).copied().unwrap_or(0);
        self.thresholds.partition_point(|&t| t <= a)
    }
}

impl Scheduler for Sjf {
    fn enqueue(&mut self, mut pkt: Packet, now: Micros) -> Admission {
        pkt.enqueue_time = now;
        let (flow, seq) = (pkt.flow, pkt.seq);
        let lvl = self.level_of(flow);
        self.bytes += pkt.size as u64;
        self.packets += 1;
        self.levels[lvl].push(pkt);
        let mut verdict = Admission::Accepted;
        while self.bytes > self.limit {
            // Push out from the lowest-priority non-empty level.
            let l = self.levels.iter().rposition(|q| !q.is_empty()).unwrap();
            let fat = self.levels[l].fattest().unwrap();
            let d = self.levels[l].drop_tail(fat).unwrap();
            self.bytes -= d.size as u64;
            self.packets -= 1;
            if d.flow == flow && d.seq == seq {
                verdict = Admission::Dropped;
            }
            self.drops.push(d);
        }
        verdict
    }

    fn dequeue(&mut self, _now: Micros) -> Option<Packet> {
        let l = self.levels.iter().position(|q| !q.is_empty())?;
        let p = self.levels[l].pop().unwrap();
        self.bytes -= p.size as u64;
        self.packets -= 1;
        *self.attained.entry(p.flow).or_insert(0) += p.size as u64;
        let nl = self.level_of(p.flow);
        if nl != l {
            let rest = self.levels[l].remove_flow(p.flow);
            self.levels[nl].insert_flow(rest);
        }
        Some(p)
    }

    fn take_drops(&mut self) -> Vec<Packet> {
        core::mem::take(&mut self.drops)
    }

    fn len_bytes(&self) -> u64 {
        self.bytes
    }

    fn len_packets(&self) -> usize {
        self.packets
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_flow_first() {
        let mut q = Sjf::new(u64::MAX, alloc::vec![100_000, 1_000_000, 10_000_000]);
        q.attained.insert(FlowId(1), 10_000_000);
        q.enqueue(Packet::new(FlowId(1), 0, 1500, 0), 0);
        q.enqueue(Packet::new(FlowId(2), 0, 1500, 0), 0);
        assert_eq!(q.dequeue(0).unwrap().flow, FlowId(2));
        assert_eq!(q.dequeue(0).unwrap().flow, FlowId(1));
    }

    #[test]
    fn fresh_flows_round_robin() {
        let mut q = Sjf::new(u64::MAX, alloc::vec![100_000]);
        for s in 0..3 {
            q.enqueue(Packet::new(FlowId(1), s, 1500, 0), 0);
            q.enqueue(Packet::new(FlowId(2), s, 1500, 0), 0);
        }
        let order: Vec<_> = core::iter::from_fn(|| q.dequeue(0)).map(|p| p.flow.0).collect();
        assert_eq!(order, [1, 2, 1, 2, 1, 2]);
    }

    #[test]
    fn demotion_keeps_order() {
        let mut q = Sjf::new(u64::MAX, alloc::vec![3000]);
        for s in 0..5 {
            q.enqueue(Packet::new(FlowId(1), s, 1500, 0), 0);
        }
        let seqs: Vec<_> = core::iter::from_fn(|| q.dequeue(0)).map(|p| p.seq).collect();
        assert_eq!(seqs, [0, 1, 2, 3, 4]);
        assert_eq!(q.level_of(FlowId(1)), 1);
    }
}

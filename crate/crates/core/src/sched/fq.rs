//! Per-flow fair queueing with equal weights, optionally with CoDel per flow.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::codel::{CodelParams, CodelState, Verdict};
use super::drr::FlowDrr;
use super::{Admission, Scheduler};
use crate::packet::{FlowId, Packet};
use crate::{Micros, MTU};

#[derive(Debug, Clone)]
pub struct Fq {
    drr: FlowDrr,
    limit: u64,
    codel: Option<(CodelParams, BTreeMap<FlowId, CodelState>)>,
    drops: Vec<Packet>,
}

impl Fq {
    pub fn new(limit: u64, codel: Option<CodelParams>) -> Self {
        Self {
            drr: FlowDrr::new(MTU),
            limit,
            codel: codel.map(|p| (p, BTreeMap::new())),
            drops: Vec::new(),
        }
    }
}

impl Scheduler for Fq {
    fn enqueue(&mut self, mut pkt: Packet, now: Micros) -> Admission {
        pkt.enqueue_time = now;
        let (flow, seq) = (pkt.flow, pkt.seq);
        self.drr.push(pkt);
        let mut verdict = Admission::Accepted;
        while self.drr.bytes() > self.limit {
            let fat = self.drr.fattest().expect("over limit implies backlog");
            let d = self.drr.drop_tail(fat).unwrap();
            if d.flow == flow && d.seq == seq {
                verdict = Admission::Dropped;
            }
            self.drops.push(d);
        }
        verdict
    }

    fn dequeue(&mut self, now: Micros) -> Option<Packet> {
        loop {
            let id = self.drr.next_flow()?;
            let Some((params, states)) = self.codel.as_mut() else {
                return self.drr.take(id, true);
            };
            let backlog = self.drr.flow_bytes(id);
            let sojourn = now.saturating_sub(self.drr.head_of(id).unwrap().enqueue_time);
            let st = states.entry(id).or_default();
            match st.gate(params, now, sojourn, backlog) {
                Verdict::Deliver => return self.drr.take(id, true),
                Verdict::Drop => {
                    let p = self.drr.take(id, false).unwrap();
                    self.drops.push(p);
                }
            }
        }
    }

    fn take_drops(&mut self) -> Vec<Packet> {
        core::mem::take(&mut self.drops)
    }

    fn len_bytes(&self) -> u64 {
        self.drr.bytes()
    }

    fn len_packets(&self) -> usize {
        self.drr.packets()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(q: &mut Fq, flows: u32, per_flow: u64) {
        for s in 0..per_flow {
            for f in 0..flows {
                q.enqueue(Packet::new(FlowId(f), s, 1500, 0), 0);
            }
        }
    }

    #[test]
    fn equal_shares() {
        let mut q = Fq::new(u64::MAX, None);
        fill(&mut q, 10, 200);
        let mut tally = [0u64; 10];
        for _ in 0..1000 {
            let p = q.dequeue(0).unwrap();
            tally[p.flow.0 as usize] += p.size as u64;
        }
        for t in tally {
            assert!((t as i64 - 150_000).abs() <= 1500);
        }
    }

    #[test]
    fn single_flow_gets_everything() {
        let mut q = Fq::new(u64::MAX, None);
        fill(&mut q, 1, 50);
        assert_eq!(core::iter::from_fn(|| q.dequeue(0)).count(), 50);
    }

    #[test]
    fn overflow_drops_from_fattest_flow() {
        let mut q = Fq::new(15_000, None);
        for s in 0..10 {
            q.enqueue(Packet::new(FlowId(1), s, 1500, 0), 0);
        }
        assert_eq!(q.enqueue(Packet::new(FlowId(2), 0, 1500, 0), 0), Admission::Accepted);
        let d = q.take_drops();
        assert_eq!((d[0].flow, d[0].seq), (FlowId(1), 9));
    }
}

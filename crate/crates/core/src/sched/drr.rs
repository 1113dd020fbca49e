//! Byte-fair deficit round robin over per-flow FIFOs.

use alloc::collections::{BTreeMap, VecDeque};

use crate::packet::{FlowId, Packet};

#[derive(Debug, Clone, Default)]
struct FlowQ {
    pkts: VecDeque<Packet>,
    bytes: u64,
    deficit: i64,
}

#[derive(Debug, Clone)]
pub struct FlowDrr {
    flows: BTreeMap<FlowId, FlowQ>,
    active: VecDeque<FlowId>,
    quantum: i64,
    bytes: u64,
    packets: usize,
}

impl FlowDrr {
    pub fn new(quantum: u32) -> Self {
        Self {
            flows: BTreeMap::new(),
            active: VecDeque::new(),
            quantum: quantum as i64,
            bytes: 0,
            packets: 0,
        }
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    pub fn is_empty(&self) -> bool {
        self.packets == 0
    }

    pub fn flow_bytes(&self, flow: FlowId) -> u64 {
        self.flows.get(&flow).map_or(0, |f| f.bytes)
    }

    pub fn backlogged(&self) -> impl Iterator<Item = FlowId> + '_ {
        self.active.iter().copied()
    }

    pub fn push(&mut self, pkt: Packet) {
        let id = pkt.flow;
        let f = self.flows.entry(id).or_default();
        if f.pkts.is_empty() {
            f.deficit = 0;
            self.active.push_back(id);
        }
        f.bytes += pkt.size as u64;
        self.bytes += pkt.size as u64;
        self.packets += 1;
        f.pkts.push_back(pkt);
    }

    /// Advances the round robin until the front flow may send its head packet
    /// and returns that flow. Repeated calls without a `take` are idempotent.
    pub fn next_flow(&mut self) -> Option<FlowId> {
        loop {
            let id = *self.active.front()?;
            let f = self.flows.get_mut(&id).expect("active flow has a queue");
            let head = f.pkts.front().expect("active flow is backlogged").size as i64;
            if f.deficit >= head {
                return Some(id);
            }
            f.deficit += self.quantum;
            self.active.rotate_left(1);
        }
    }

    pub fn head_size(&mut self) -> Option<u32> {
        let id = self.next_flow()?;
        self.flows[&id].pkts.front().map(|p| p.size)
    }

    /// Removes the head packet of `flow`, charging its deficit when `charge` is set.
    pub fn take(&mut self, flow: FlowId, charge: bool) -> Option<Packet> {
        let f = self.flows.get_mut(&flow)?;
        let p = f.pkts.pop_front()?;
        if charge {
            f.deficit -= p.size as i64;
        }
        f.bytes -= p.size as u64;
        self.bytes -= p.size as u64;
        self.packets -= 1;
        if f.pkts.is_empty() {
            f.deficit = 0;
            if let Some(pos) = self.active.iter().position(|x| *x == flow) {
                self.active.remove(pos);
            }
            self.flows.remove(&flow);
        }
        Some(p)
    }

    pub fn pop(&mut self) -> Option<Packet> {
        let id = self.next_flow()?;
        self.take(id, true)
    }

    pub fn head_of(&self, flow: FlowId) -> Option<&Packet> {
        self.flows.get(&flow)?.pkts.front()
    }

    /// Flow holding the most bytes (lowest id on ties).
    pub fn fattest(&self) -> Option<FlowId> {
        let mut best: Option<(u64, FlowId)> = None;
        for (&id, f) in &self.flows {
            if f.bytes > 0 && best.map_or(true, |b| f.bytes > b.0) {
                best = Some((f.bytes, id));
            }
        }
        best.map(|b| b.1)
    }

    /// Removes the most recently enqueued packet of `flow`.
    pub fn drop_tail(&mut self, flow: FlowId) -> Option<Packet> {
        let f = self.flows.get_mut(&flow)?;
        let p = f.pkts.pop_back()?;
        f.bytes -= p.size as u64;
        self.bytes -= p.size as u64;
        self.packets -= 1;
        if f.pkts.is_empty() {
            if let Some(pos) = self.active.iter().position(|x| *x == flow) {
                self.active.remove(pos);
            }
            self.flows.remove(&flow);
        }
        Some(p)
    }

    /// Detaches all queued packets of `flow`, in order.
    pub fn remove_flow(&mut self, flow: FlowId) -> VecDeque<Packet> {
        let Some(f) = self.flows.remove(&flow) else {
            return VecDeque::new();
        };
        if let Some(pos) = self.active.iter().position(|x| *x == flow) {
            self.active.remove(pos);
        }
        self.bytes -= f.bytes;
        self.packets -= f.pkts.len();
        f.pkts
    }

    /// Appends an ordered packet list for `flow` (used when a flow changes queue).
    pub fn insert_flow(&mut self, pkts: VecDeque<Packet>) {
        for p in pkts {
            self.push(p);
        }
    }
}

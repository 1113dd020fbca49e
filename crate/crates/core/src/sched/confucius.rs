//! Age-aware weighted scheduler with occupancy-based flow classification.
//!
//! Flows start in a NEW queue with a weight that doubles every reweight period
//! until it reaches one, then graduate into one of three class queues chosen by
//! how much of the buffer they occupy. Class queues are rebalanced periodically
//! with a hysteresis rule. Service is deficit-weighted round robin across queues,
//! each queue weighted by the sum of its backlogged flows' weights, and byte-fair
//! round robin among flows inside a queue.
//!
//! Nothing in this module reads packet labels.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::drr::FlowDrr;
use super::{Admission, ClassSample, Scheduler};
use crate::error::{config, Result};
use crate::packet::{FlowId, Packet};
use crate::{Micros, MTU};

/// Weight scale: weights are integers in units of 1/128.
pub const WEIGHT_ONE: u32 = 128;
pub const NEW: usize = 0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ConfuciusConfig {
    pub lambda_per_ms: f64,
    pub alpha: f64,
    /// Defaults to 1/lambda.
    pub reweight_period_ms: Option<f64>,
    pub reclassify_period_ms: f64,
    pub occupancy_targets: Vec<f64>,
    /// Consecutive periods a queue must sit past the midpoint before it moves.
    pub persistence_periods: u32,
    /// Consecutive periods an intra-queue verdict must repeat before the flow moves.
    pub intra_persistence_periods: u32,
    /// A flow with nothing queued for this long is forgotten.
    pub idle_timeout_ms: f64,
}

impl Default for ConfuciusConfig {
    fn default() -> Self {
        Self {
            lambda_per_ms: 0.004,
            alpha: 0.10,
            reweight_period_ms: None,
            reclassify_period_ms: 100.0,
            occupancy_targets: alloc::vec![0.10, 0.50, 0.90],
            persistence_periods: 2,
            intra_persistence_periods: 1,
            idle_timeout_ms: 1000.0,
        }
    }
}

impl ConfuciusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_per_ms > 0.0 && self.lambda_per_ms.is_finite()) {
            return config("lambda must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return config("alpha must be in (0, 1/2)");
        }
        let t = &self.occupancy_targets;
        if t.is_empty() || t.iter().any(|&x| !(x > 0.0 && x < 1.0)) || t.windows(2).any(|w| w[0] >= w[1]) {
            return config("occupancy targets must be strictly increasing in (0, 1)");
        }
        if !(self.reclassify_period_ms > 0.0) || self.reweight_period_ms.is_some_and(|p| !(p > 0.0)) {
            return config("periods must be positive");
        }
        if self.persistence_periods == 0 || self.intra_persistence_periods == 0 {
            return config("persistence must be at least one period");
        }
        Ok(())
    }

    pub fn reweight_period_us(&self) -> Micros {
        let ms = self.reweight_period_ms.unwrap_or(1.0 / self.lambda_per_ms);
        (libm::round(ms * 1000.0) as Micros).max(1)
    }

    pub fn reclassify_period_us(&self) -> Micros {
        (libm::round(self.reclassify_period_ms * 1000.0) as Micros).max(1)
    }
}

/// Weight after `age`: `min(factor * 2^(lambda * age), 1)`.
pub fn compute_flow_weight(age_ms: f64, initial_factor: f64, lambda_per_ms: f64) -> f64 {
    (initial_factor * libm::exp2(lambda_per_ms * age_ms)).min(1.0)
}

/// Initial quantized weight: `round(128 * factor)` clamped to `[1, 128]`.
pub fn initial_weight_q128(initial_factor: f64) -> u32 {
    (libm::round(WEIGHT_ONE as f64 * initial_factor) as u32).clamp(1, WEIGHT_ONE)
}

/// One doubling by left shift, clamped at 128.
pub fn quantized_reweight(weight_q128: u32) -> u32 {
    (weight_q128 << 1).min(WEIGHT_ONE)
}

/// Index (0-based) of the target nearest to `fraction`; ties go to the lower index.
pub fn nearest_target(fraction: f64, targets: &[f64]) -> usize {
    let mut best = 0;
    for (i, &t) in targets.iter().enumerate() {
        if libm::fabs(fraction - t) < libm::fabs(fraction - targets[best]) - 1e-12 {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Promote,
    Demote,
}

/// Hysteresis decision for one flow holding `share` of a queue with `members` flows.
pub fn intra_decision(share: f64, members: usize, alpha: f64) -> Option<Move> {
    if members < 2 {
        return None;
    }
    let fair = 1.0 / members as f64;
    if share >= fair + alpha - 1e-12 {
        Some(Move::Promote)
    } else if share <= fair - alpha + 1e-12 {
        Some(Move::Demote)
    } else {
        None
    }
}

/// Occupancy above which a queue with target `own` heads towards the next target.
pub fn upward_midpoint(own: f64, next: f64) -> f64 {
    (own + next) / 2.0
}

#[derive(Debug, Clone)]
struct FlowRec {
    arrival: Micros,
    f_ext: u32,
    q_new: u32,
    w0: u32,
    weight: u32,
    doublings: u32,
    queue: usize,
    bytes: u64,
    ema: f64,
    ema_t: Micros,
    last_active: Micros,
    tick: u64,
    next_tick: Option<Micros>,
    /// Queue the intra-queue rule pointed at, and for how many periods in a row.
    streak: (usize, u32),
}

#[derive(Debug, Clone)]
struct VQueue {
    drr: FlowDrr,
    members: BTreeSet<FlowId>,
    deficit: i64,
    above: u32,
}

#[derive(Debug, Clone)]
pub struct Confucius {
    cfg: ConfuciusConfig,
    limit: u64,
    reweight_us: Micros,
    reclass_us: Micros,
    halflife_us: f64,
    flows: BTreeMap<FlowId, FlowRec>,
    queues: Vec<VQueue>,
    cur: usize,
    bytes: u64,
    packets: usize,
    batch: (Micros, Vec<FlowId>),
    next_reclass: Micros,
    drops: Vec<Packet>,
    samples: Vec<ClassSample>,
}

impl Confucius {
    pub fn new(cfg: ConfuciusConfig, limit: u64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.occupancy_targets.len() + 1;
        let reclass_us = cfg.reclassify_period_us();
        Ok(Self {
            reweight_us: cfg.reweight_period_us(),
            reclass_us,
            halflife_us: reclass_us as f64,
            limit,
            flows: BTreeMap::new(),
            queues: (0..n)
                .map(|_| VQueue {
                    drr: FlowDrr::new(MTU),
                    members: BTreeSet::new(),
                    deficit: 0,
                    above: 0,
                })
                .collect(),
            cur: 0,
            bytes: 0,
            packets: 0,
            batch: (Micros::MAX, Vec::new()),
            next_reclass: reclass_us,
            drops: Vec::new(),
            samples: Vec::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &ConfuciusConfig {
        &self.cfg
    }

    pub fn num_queues(&self) -> usize {
        self.queues.len()
    }

    /// Queue index of a live flow (0 = NEW).
    pub fn flow_queue(&self, flow: FlowId) -> Option<usize> {
        self.flows.get(&flow).map(|r| r.queue)
    }

    pub fn flow_weight(&self, flow: FlowId) -> Option<u32> {
        self.flows.get(&flow).map(|r| r.weight)
    }

    /// `(|F_ext|, |Q_new|)` snapshot taken when the flow arrived.
    pub fn flow_factor(&self, flow: FlowId) -> Option<(u32, u32)> {
        self.flows.get(&flow).map(|r| (r.f_ext, r.q_new))
    }

    pub fn flow_bytes(&self, flow: FlowId) -> u64 {
        self.flows.get(&flow).map_or(0, |r| r.bytes)
    }

    pub fn live_flows(&self) -> impl Iterator<Item = FlowId> + '_ {
        self.flows.keys().copied()
    }

    pub fn members(&self, queue: usize) -> impl Iterator<Item = FlowId> + '_ {
        self.queues[queue].members.iter().copied()
    }

    pub fn queue_bytes(&self, queue: usize) -> u64 {
        self.queues[queue].drr.bytes()
    }

    /// Sum of the weights of the queue's backlogged flows.
    pub fn queue_weight(&self, queue: usize) -> u32 {
        self.queues[queue]
            .drr
            .backlogged()
            .map(|f| self.flows[&f].weight)
            .sum()
    }

    fn touch_ema(&mut self, flow: FlowId, now: Micros) {
        let h = self.halflife_us;
        let r = self.flows.get_mut(&flow).unwrap();
        if now > r.ema_t {
            let decay = libm::exp2(-((now - r.ema_t) as f64) / h);
            r.ema = r.bytes as f64 + (r.ema - r.bytes as f64) * decay;
            r.ema_t = now;
        }
    }

    fn arrive(&mut self, flow: FlowId, now: Micros) {
        let f_ext = self.queues[1..].iter().map(|q| q.members.len()).sum::<usize>().max(1) as u32;
        self.flows.insert(
            flow,
            FlowRec {
                arrival: now,
                f_ext,
                q_new: 1,
                w0: WEIGHT_ONE,
                weight: WEIGHT_ONE,
                doublings: 0,
                queue: NEW,
                bytes: 0,
                ema: 0.0,
                ema_t: now,
                last_active: now,
                tick: 0,
                next_tick: Some(now + 1),
                streak: (NEW, 0),
            },
        );
        self.queues[NEW].members.insert(flow);
        let q_new = self.queues[NEW].members.len().max(1) as u32;
        if self.batch.0 != now {
            self.batch = (now, Vec::new());
        }
        self.batch.1.push(flow);
        let w0 = initial_weight_q128(f_ext as f64 / q_new as f64);
        for id in &self.batch.1 {
            if let Some(r) = self.flows.get_mut(id) {
                r.f_ext = f_ext;
                r.q_new = q_new;
                r.w0 = w0;
                r.weight = w0;
            }
        }
    }

    fn move_flow(&mut self, flow: FlowId, to: usize) {
        let from = self.flows[&flow].queue;
        if from == to {
            return;
        }
        let pkts = self.queues[from].drr.remove_flow(flow);
        self.queues[from].members.remove(&flow);
        self.queues[to].drr.insert_flow(pkts);
        self.queues[to].members.insert(flow);
        let r = self.flows.get_mut(&flow).unwrap();
        r.queue = to;
        r.streak = (NEW, 0);
        for q in [from, to] {
            if self.queues[q].drr.is_empty() {
                self.queues[q].deficit = 0;
            }
        }
    }

    fn graduate(&mut self, flow: FlowId, now: Micros) {
        self.touch_ema(flow, now);
        let frac = self.flows[&flow].ema / self.limit as f64;
        let idx = nearest_target(frac, &self.cfg.occupancy_targets) + 1;
        let r = self.flows.get_mut(&flow).unwrap();
        r.weight = WEIGHT_ONE;
        r.next_tick = None;
        self.move_flow(flow, idx);
    }

    fn run_tick(&mut self, flow: FlowId, now: Micros) {
        let lambda_per_us = self.cfg.lambda_per_ms / 1000.0;
        let period = self.reweight_us;
        let r = self.flows.get_mut(&flow).unwrap();
        let at = r.next_tick.unwrap();
        let owed = libm::floor(lambda_per_us * (at - r.arrival) as f64 + 1e-9) as u32;
        while r.doublings < owed && r.weight < WEIGHT_ONE {
            r.weight = quantized_reweight(r.weight);
            r.doublings += 1;
        }
        r.doublings = r.doublings.max(owed);
        if r.weight >= WEIGHT_ONE {
            self.graduate(flow, now);
        } else {
            r.tick += 1;
            r.next_tick = Some(r.arrival + r.tick * period);
        }
    }

    fn reclassify(&mut self, t: Micros) {
        let ids: Vec<FlowId> = self.flows.keys().copied().collect();
        for &id in &ids {
            self.touch_ema(id, t);
        }
        let idle = libm::round(self.cfg.idle_timeout_ms * 1000.0) as Micros;
        for &id in &ids {
            let r = &self.flows[&id];
            if r.bytes == 0 && t.saturating_sub(r.last_active) >= idle {
                let q = r.queue;
                self.queues[q].members.remove(&id);
                self.flows.remove(&id);
            }
        }
        for (&id, r) in &self.flows {
            self.samples.push(ClassSample {
                time: t,
                flow: id,
                queue: r.queue as u8,
                weight_q128: r.weight,
                occupancy_ema: r.ema / self.limit as f64,
            });
        }

        let k = self.queues.len() - 1;
        let recent = 2 * self.reclass_us;
        let mut moves: Vec<(FlowId, usize)> = Vec::new();
        let mut moved_queue = alloc::vec![false; k + 1];
        // Queue-level: upward only, walking from the top so a queue that moves
        // into a neighbour is not re-examined in the same period.
        for i in (1..k).rev() {
            let agg: f64 = self.queues[i].members.iter().map(|f| self.flows[f].ema).sum::<f64>() / self.limit as f64;
            let mid = upward_midpoint(self.cfg.occupancy_targets[i - 1], self.cfg.occupancy_targets[i]);
            if !self.queues[i].members.is_empty() && agg > mid {
                self.queues[i].above += 1;
            } else {
                self.queues[i].above = 0;
            }
            if self.queues[i].above >= self.cfg.persistence_periods {
                self.queues[i].above = 0;
                moved_queue[i] = true;
                moves.extend(self.queues[i].members.iter().map(|&f| (f, i + 1)));
            }
        }
        for i in 1..=k {
            if moved_queue[i] {
                continue;
            }
            let live: Vec<(FlowId, f64)> = self.queues[i]
                .members
                .iter()
                .map(|f| (*f, &self.flows[f]))
                .filter(|(_, r)| r.bytes > 0 || t.saturating_sub(r.last_active) < recent)
                .map(|(f, r)| (f, r.ema))
                .collect();
            let total: f64 = live.iter().map(|x| x.1).sum();
            if total <= 0.0 {
                continue;
            }
            // One move per queue per period: the flow furthest from its fair
            // share, demotions first on a tie.
            let fair = 1.0 / live.len() as f64;
            let mut pick: Option<(f64, bool, FlowId, usize)> = None;
            for &(f, e) in &live {
                let share = e / total;
                let to = match intra_decision(share, live.len(), self.cfg.alpha) {
                    Some(Move::Promote) if i < k => i + 1,
                    Some(Move::Demote) if i > 1 => i - 1,
                    _ => {
                        self.flows.get_mut(&f).unwrap().streak = (NEW, 0);
                        continue;
                    }
                };
                let r = self.flows.get_mut(&f).unwrap();
                r.streak = if r.streak.0 == to { (to, r.streak.1 + 1) } else { (to, 1) };
                if r.streak.1 < self.cfg.intra_persistence_periods {
                    continue;
                }
                let cand = (libm::fabs(share - fair), to < i, f, to);
                let better = match pick {
                    None => true,
                    Some(p) => cand.0 > p.0 + 1e-12 || (libm::fabs(cand.0 - p.0) <= 1e-12 && cand.1 && !p.1),
                };
                if better {
                    pick = Some(cand);
                }
            }
            if let Some((_, _, f, to)) = pick {
                moves.push((f, to));
            }
        }
        for (f, to) in moves {
            self.move_flow(f, to);
        }
    }

    fn drop_one(&mut self, now: Micros) -> Packet {
        let q = (0..self.queues.len())
            .max_by_key(|&i| (self.queues[i].drr.bytes(), core::cmp::Reverse(i)))
            .unwrap();
        let fat = self.queues[q].drr.fattest().unwrap();
        self.touch_ema(fat, now);
        let p = self.queues[q].drr.drop_tail(fat).unwrap();
        self.flows.get_mut(&fat).unwrap().bytes -= p.size as u64;
        if self.queues[q].drr.is_empty() {
            self.queues[q].deficit = 0;
        }
        self.bytes -= p.size as u64;
        self.packets -= 1;
        p
    }
}

impl Scheduler for Confucius {
    fn enqueue(&mut self, mut pkt: Packet, now: Micros) -> Admission {
        self.poll(now);
        let flow = pkt.flow;
        if !self.flows.contains_key(&flow) {
            self.arrive(flow, now);
        }
        self.touch_ema(flow, now);
        pkt.enqueue_time = now;
        let seq = pkt.seq;
        let size = pkt.size as u64;
        let r = self.flows.get_mut(&flow).unwrap();
        r.bytes += size;
        r.last_active = now;
        let q = r.queue;
        self.queues[q].drr.push(pkt);
        self.bytes += size;
        self.packets += 1;
        let mut verdict = Admission::Accepted;
        while self.bytes > self.limit {
            let d = self.drop_one(now);
            if d.flow == flow && d.seq == seq {
                verdict = Admission::Dropped;
            }
            self.drops.push(d);
        }
        verdict
    }

    fn dequeue(&mut self, now: Micros) -> Option<Packet> {
        self.poll(now);
        if self.packets == 0 {
            return None;
        }
        let n = self.queues.len();
        loop {
            let c = self.cur;
            let Some(head) = self.queues[c].drr.head_size() else {
                self.queues[c].deficit = 0;
                self.cur = (c + 1) % n;
                continue;
            };
            let cost = head as i64 * WEIGHT_ONE as i64;
            if self.queues[c].deficit >= cost {
                self.queues[c].deficit -= cost;
                let p = self.queues[c].drr.pop().unwrap();
                self.touch_ema(p.flow, now);
                let r = self.flows.get_mut(&p.flow).unwrap();
                r.bytes -= p.size as u64;
                r.last_active = now;
                self.bytes -= p.size as u64;
                self.packets -= 1;
                if self.queues[c].drr.is_empty() {
                    self.queues[c].deficit = 0;
                }
                return Some(p);
            }
            let w = self.queue_weight(c) as i64;
            self.queues[c].deficit += MTU as i64 * w;
            self.cur = (c + 1) % n;
        }
    }

    fn take_drops(&mut self) -> Vec<Packet> {
        core::mem::take(&mut self.drops)
    }

    fn poll(&mut self, now: Micros) {
        loop {
            let tick = self
                .queues[NEW]
                .members
                .iter()
                .filter_map(|f| self.flows[f].next_tick.map(|t| (t, *f)))
                .min();
            match tick {
                Some((t, f)) if t <= now && t <= self.next_reclass => self.run_tick(f, t),
                _ if self.next_reclass <= now => {
                    let t = self.next_reclass;
                    self.reclassify(t);
                    self.next_reclass += self.reclass_us;
                }
                Some((t, f)) if t <= now => self.run_tick(f, t),
                _ => break,
            }
        }
    }

    fn next_deadline(&self) -> Option<Micros> {
        let tick = self.queues[NEW]
            .members
            .iter()
            .filter_map(|f| self.flows[f].next_tick)
            .min();
        Some(tick.map_or(self.next_reclass, |t| t.min(self.next_reclass)))
    }

    fn len_bytes(&self) -> u64 {
        self.bytes
    }

    fn len_packets(&self) -> usize {
        self.packets
    }

    fn take_samples(&mut self) -> Vec<ClassSample> {
        core::mem::take(&mut self.samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(f: u32, s: u64) -> Packet {
        Packet::new(FlowId(f), s, 1500, 0)
    }

    #[test]
    fn weight_formula() {
        assert!((compute_flow_weight(0.0, 1.0 / 9.0, 0.004) - 1.0 / 9.0).abs() < 1e-12);
        assert!((compute_flow_weight(250.0, 1.0 / 9.0, 0.004) - 2.0 / 9.0).abs() < 1e-12);
        assert_eq!(compute_flow_weight(1000.0, 1.0 / 9.0, 0.004), 1.0);
    }

    #[test]
    fn quantization() {
        assert_eq!(initial_weight_q128(1.0 / 9.0), 14);
        assert_eq!(quantized_reweight(80), 128);
        assert_eq!(initial_weight_q128(1e-4), 1);
        assert_eq!(initial_weight_q128(2.0), 128);
    }

    #[test]
    fn graduation_targets() {
        let t = [0.10, 0.50, 0.90];
        assert_eq!(nearest_target(0.15, &t), 0);
        assert_eq!(nearest_target(0.30, &t), 0);
        assert_eq!(nearest_target(0.95, &t), 2);
    }

    #[test]
    fn hysteresis() {
        assert_eq!(intra_decision(0.40, 4, 0.1), Some(Move::Promote));
        assert_eq!(intra_decision(0.25, 4, 0.1), None);
        assert_eq!(intra_decision(0.10, 4, 0.1), Some(Move::Demote));
        assert_eq!(intra_decision(1.0, 1, 0.1), None);
        assert!((upward_midpoint(0.1, 0.5) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn arrival_factors() {
        let mut c = Confucius::new(ConfuciusConfig::default(), 1 << 30).unwrap();
        c.enqueue(pkt(0, 0), 0);
        assert_eq!(c.flow_factor(FlowId(0)), Some((1, 1)));
        c.poll(1);
        assert_eq!(c.flow_queue(FlowId(0)), Some(1));
        for f in 1..=9 {
            c.enqueue(pkt(f, 0), 10_000);
        }
        for f in 1..=9 {
            assert_eq!(c.flow_factor(FlowId(f)), Some((1, 9)));
            assert_eq!(c.flow_weight(FlowId(f)), Some(14));
            assert_eq!(c.flow_queue(FlowId(f)), Some(NEW));
        }
    }

    #[test]
    fn two_existing_one_new_graduates_immediately() {
        let mut c = Confucius::new(ConfuciusConfig::default(), 1 << 30).unwrap();
        c.enqueue(pkt(0, 0), 0);
        c.poll(1);
        c.enqueue(pkt(1, 0), 2);
        c.poll(3);
        c.enqueue(pkt(2, 0), 5);
        assert_eq!(c.flow_factor(FlowId(2)), Some((2, 1)));
        assert_eq!(c.flow_weight(FlowId(2)), Some(128));
        c.poll(6);
        assert_ne!(c.flow_queue(FlowId(2)), Some(NEW));
    }

    #[test]
    fn doubling_schedule_and_exact_graduation() {
        let mut c = Confucius::new(ConfuciusConfig::default(), 1 << 30).unwrap();
        c.enqueue(pkt(0, 0), 0);
        c.poll(1);
        for f in 1..=9 {
            c.enqueue(pkt(f, 0), 0 + 10);
        }
        let w = |c: &Confucius| c.flow_weight(FlowId(1)).unwrap();
        c.poll(10 + 250_000 - 1);
        assert_eq!(w(&c), 14);
        c.poll(10 + 250_000);
        assert_eq!(w(&c), 28);
        c.poll(10 + 750_000);
        assert_eq!(w(&c), 112);
        assert_eq!(c.flow_queue(FlowId(1)), Some(NEW));
        c.poll(10 + 1_000_000 - 1);
        assert_eq!(c.flow_queue(FlowId(1)), Some(NEW));
        c.poll(10 + 1_000_000);
        assert_eq!(w(&c), 128);
        assert_ne!(c.flow_queue(FlowId(1)), Some(NEW));
    }

    #[test]
    fn only_new_backlogged_is_served() {
        let mut c = Confucius::new(ConfuciusConfig::default(), 1 << 30).unwrap();
        c.enqueue(pkt(0, 0), 0);
        c.poll(1);
        for s in 0..5 {
            c.enqueue(pkt(1, s), 2);
            c.enqueue(pkt(2, s), 2);
        }
        let n = core::iter::from_fn(|| c.dequeue(3)).count();
        assert_eq!(n, 11);
    }

    #[test]
    fn dwrr_two_to_one() {
        // One graduated flow (weight 128) against one new flow held at 64.
        let mut c = Confucius::new(ConfuciusConfig::default(), 1 << 40).unwrap();
        c.enqueue(pkt(0, 0), 0);
        c.poll(1);
        c.enqueue(pkt(1, 0), 2);
        c.enqueue(pkt(2, 0), 2);
        assert_eq!(c.flow_weight(FlowId(1)), Some(64));
        for s in 1..20_000 {
            for f in 0..3 {
                c.enqueue(pkt(f, s), 2);
            }
        }
        let mut tally = [0u64; 2];
        for _ in 0..30_000 {
            let p = c.dequeue(3).unwrap();
            tally[(p.flow.0 != 0) as usize] += p.size as u64;
        }
        // Flow 0 alone in Q1 (128) vs NEW holding flows 1,2 (64 + 64).
        assert!((tally[0] as i64 - tally[1] as i64).abs() <= 3000);
    }

    #[test]
    fn overflow_drops_tail_of_longest_queue() {
        let mut c = Confucius::new(ConfuciusConfig::default(), 15_000).unwrap();
        for s in 0..8 {
            c.enqueue(pkt(1, s), 0);
        }
        for s in 0..3 {
            c.enqueue(pkt(2, s), 0);
        }
        let d = c.take_drops();
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].flow, d[0].seq), (FlowId(1), 7));
        assert_eq!(c.len_bytes(), 15_000);
    }
}

//! Event-driven network: senders, a chain of hops, receivers and the trace.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use crate::cca::{AckSample, Cca, CcaKind, CcaParams};
use crate::engine::{EventHandle, EventQueue};
use crate::error::{config, Result};
use crate::link::Link;
use crate::packet::{FlowId, Packet};
use crate::sched::{ClassSample, Scheduler, SchedulerSpec};
use crate::source::{frame_boundary, video_frame_emit, FlowSpec, SourceKind, KEEPALIVE_BYTES};
use crate::{tx_time, Micros, MTU};

#[derive(Debug, Clone, PartialEq)]
pub struct HopSpec {
    pub link: Link,
    pub scheduler: SchedulerSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub hops: Vec<HopSpec>,
    pub flows: Vec<FlowSpec>,
    pub cca: CcaParams,
    /// Video packets leave the sender at this multiple of the target rate.
    pub video_pacing: f64,
    /// Remove application labels before packets enter the network.
    pub strip_labels: bool,
    /// Period of queue/rate sampling.
    pub sample_every: Micros,
}

impl SimConfig {
    pub fn new(hops: Vec<HopSpec>, flows: Vec<FlowSpec>) -> Self {
        Self {
            hops,
            flows,
            cca: CcaParams::default(),
            video_pacing: 2.5,
            strip_labels: false,
            sample_every: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hops.is_empty() {
            return config("at least one link is required");
        }
        for h in &self.hops {
            h.scheduler.validate()?;
            if h.link.buffer_limit < MTU as u64 {
                return config("buffer must hold at least one full packet");
            }
        }
        self.cca.validate()?;
        if !(self.video_pacing >= 1.0) {
            return config("video pacing factor must be at least 1");
        }
        if self.sample_every == 0 {
            return config("sampling period must be positive");
        }
        for f in &self.flows {
            match f.kind {
                SourceKind::Video { fps } if fps == 0 => return config("fps must be positive"),
                SourceKind::Web { size } if size == 0 => return config("web flow size must be positive"),
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Delivery {
    pub flow: FlowId,
    pub seq: u64,
    pub size: u32,
    pub sent: Micros,
    pub delivered: Micros,
    pub queued: Micros,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DropEvent {
    pub flow: FlowId,
    pub seq: u64,
    pub hop: u32,
    pub time: Micros,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameOutcome {
    pub flow: FlowId,
    pub frame: u64,
    pub generated: Micros,
    pub bytes: u64,
    pub completed: Option<Micros>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowOutcome {
    pub flow: FlowId,
    pub spec: FlowSpec,
    pub sent_bytes: u64,
    pub delivered_bytes: u64,
    pub retransmitted_bytes: u64,
    pub completed: Option<Micros>,
    /// First and last delivery instants.
    pub first_delivery: Option<Micros>,
    pub last_delivery: Option<Micros>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QueueSample {
    pub time: Micros,
    pub hop: u32,
    pub bytes: u64,
    /// Bytes queued per flow at this hop, for flows with anything queued.
    pub per_flow: Vec<(FlowId, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateSample {
    pub time: Micros,
    pub flow: FlowId,
    pub rate_bps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Counters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Packets queued or propagating when the run ended.
    pub in_network: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimTrace {
    pub end: Micros,
    pub deliveries: Vec<Delivery>,
    pub drops: Vec<DropEvent>,
    pub frames: Vec<FrameOutcome>,
    pub flows: Vec<FlowOutcome>,
    pub queues: Vec<QueueSample>,
    pub rates: Vec<RateSample>,
    /// Classifier records per hop.
    pub classes: Vec<(u32, ClassSample)>,
    pub counters: Counters,
    /// Instants at which a hop held bytes while its link was idle; empty when work-conserving.
    pub idle_violations: Vec<(u32, Micros)>,
}

#[derive(Debug)]
enum Ev {
    Start(usize),
    Wake(usize),
    Frame(usize, u64),
    Arrive(usize, Packet),
    TxDone(usize),
    Deliver(Packet),
    Ack(usize, u64),
    Loss(usize, u64),
    Poll(usize),
    Sample,
}

#[derive(Debug, Clone)]
struct Sent {
    size: u32,
    at: Micros,
    delivered_at_send: u64,
    delivered_time_at_send: Micros,
    frame: Option<u64>,
    app_limited: bool,
}

#[derive(Debug, Clone, Copy)]
struct Chunk {
    size: u32,
    frame: Option<u64>,
    retx: bool,
}

struct Sender {
    spec: FlowSpec,
    cca: Cca,
    started: bool,
    next_seq: u64,
    inflight: BTreeMap<u64, Sent>,
    inflight_bytes: u64,
    delivered: u64,
    delivered_time: Micros,
    min_rtt: Micros,
    srtt: Micros,
    acks: VecDeque<(Micros, u32)>,
    acks_bytes: u64,
    pending: VecDeque<Chunk>,
    unsent: u64,
    pacing_next: Micros,
    wake: Option<EventHandle>,
}

struct Hop {
    link: Link,
    sched: Box<dyn Scheduler>,
    timer: Option<EventHandle>,
    tx_pending: bool,
    queued: BTreeMap<FlowId, u64>,
}

impl Hop {
    fn account(&mut self, flow: FlowId, add: bool, bytes: u32) {
        let e = self.queued.entry(flow).or_default();
        if add {
            *e += bytes as u64;
        } else {
            *e -= bytes as u64;
            if *e == 0 {
                self.queued.remove(&flow);
            }
        }
    }
}

struct Frame {
    generated: Micros,
    bytes: u64,
    outstanding: u32,
    completed: Option<Micros>,
}

pub struct Simulation {
    cfg: SimConfig,
    q: EventQueue<Ev>,
    hops: Vec<Hop>,
    senders: Vec<Sender>,
    outcomes: Vec<FlowOutcome>,
    frames: Vec<BTreeMap<u64, Frame>>,
    trace: SimTrace,
    base_oneway: Micros,
}

impl Simulation {
    pub fn new(cfg: SimConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut hops = Vec::with_capacity(cfg.hops.len());
        for (i, h) in cfg.hops.iter().enumerate() {
            hops.push(Hop {
                link: h.link.clone(),
                sched: h.scheduler.build(h.link.buffer_limit, seed.wrapping_add(i as u64))?,
                timer: None,
                tx_pending: false,
                queued: BTreeMap::new(),
            });
        }
        let base_oneway = cfg.hops.iter().map(|h| h.link.one_way_delay()).sum();
        let mut q = EventQueue::new();
        let mut senders = Vec::with_capacity(cfg.flows.len());
        let mut outcomes = Vec::with_capacity(cfg.flows.len());
        for (i, f) in cfg.flows.iter().enumerate() {
            q.schedule(f.start, Ev::Start(i))?;
            let cca = Cca::new(f.cca, &cfg.cca, seed.wrapping_mul(0x9E37_79B9).wrapping_add(i as u64));
            let unsent = match f.kind {
                SourceKind::Web { size } => size,
                _ => 0,
            };
            senders.push(Sender {
                spec: f.clone(),
                cca,
                started: false,
                next_seq: 0,
                inflight: BTreeMap::new(),
                inflight_bytes: 0,
                delivered: 0,
                delivered_time: f.start,
                min_rtt: Micros::MAX,
                srtt: 0,
                acks: VecDeque::new(),
                acks_bytes: 0,
                pending: VecDeque::new(),
                unsent,
                pacing_next: 0,
                wake: None,
            });
            outcomes.push(FlowOutcome {
                flow: FlowId(i as u32),
                spec: f.clone(),
                sent_bytes: 0,
                delivered_bytes: 0,
                retransmitted_bytes: 0,
                completed: None,
                first_delivery: None,
                last_delivery: None,
            });
        }
        q.schedule(0, Ev::Sample)?;
        let n = cfg.flows.len();
        let mut sim = Self {
            cfg,
            q,
            hops,
            senders,
            outcomes,
            frames: (0..n).map(|_| BTreeMap::new()).collect(),
            trace: SimTrace::default(),
            base_oneway,
        };
        for h in 0..sim.hops.len() {
            sim.refresh_timer(h)?;
        }
        Ok(sim)
    }

    fn now(&self) -> Micros {
        self.q.now()
    }

    fn path_rtt(&self, flow: usize) -> Micros {
        2 * self.base_oneway + self.senders[flow].spec.extra_rtt
    }

    /// Runs every event up to and including `t_end` and returns the trace.
    pub fn run_until(mut self, t_end: Micros) -> Result<SimTrace> {
        if t_end == 0 {
            return Ok(SimTrace::default());
        }
        while let Some((_, ev)) = self.q.pop_until(t_end) {
            self.handle(ev)?;
        }
        self.q.advance_to(t_end);
        Ok(self.finish(t_end))
    }

    fn finish(mut self, t_end: Micros) -> SimTrace {
        for (i, h) in self.hops.iter_mut().enumerate() {
            for s in h.sched.take_samples() {
                self.trace.classes.push((i as u32, s));
            }
        }
        for (i, frames) in self.frames.iter().enumerate() {
            for (&id, f) in frames {
                self.trace.frames.push(FrameOutcome {
                    flow: FlowId(i as u32),
                    frame: id,
                    generated: f.generated,
                    bytes: f.bytes,
                    completed: f.completed,
                });
            }
        }
        let c = &mut self.trace.counters;
        c.in_network = c.sent - c.delivered - c.dropped;
        self.trace.flows = self.outcomes;
        self.trace.end = t_end;
        self.trace
    }

    fn handle(&mut self, ev: Ev) -> Result<()> {
        let now = self.now();
        match ev {
            Ev::Start(f) => {
                self.senders[f].started = true;
                if let SourceKind::Video { .. } = self.senders[f].spec.kind {
                    self.q.schedule(now, Ev::Frame(f, 0))?;
                }
                self.try_send(f)?;
            }
            Ev::Wake(f) => {
                self.senders[f].wake = None;
                self.try_send(f)?;
            }
            Ev::Frame(f, idx) => self.on_frame(f, idx)?,
            Ev::Arrive(h, pkt) => {
                self.hops[h].account(pkt.flow, true, pkt.size);
                self.hops[h].sched.enqueue(pkt, now);
                self.collect_drops(h)?;
                self.kick(h)?;
            }
            Ev::TxDone(h) => {
                self.hops[h].tx_pending = false;
                self.kick(h)?;
            }
            Ev::Deliver(pkt) => self.on_deliver(pkt)?,
            Ev::Ack(f, seq) => self.on_ack(f, seq)?,
            Ev::Loss(f, seq) => self.on_loss(f, seq)?,
            Ev::Poll(h) => {
                self.hops[h].timer = None;
                self.hops[h].sched.poll(now);
                self.collect_drops(h)?;
                self.kick(h)?;
            }
            Ev::Sample => self.on_sample()?,
        }
        Ok(())
    }

    fn refresh_timer(&mut self, h: usize) -> Result<()> {
        let now = self.now();
        let want = self.hops[h].sched.next_deadline().map(|t| t.max(now));
        let hop = &mut self.hops[h];
        if hop.timer.map(|t| t.at()) == want {
            return Ok(());
        }
        if let Some(t) = hop.timer.take() {
            self.q.cancel(t);
        }
        if let Some(at) = want {
            self.hops[h].timer = Some(self.q.schedule(at, Ev::Poll(h))?);
        }
        Ok(())
    }

    fn kick(&mut self, h: usize) -> Result<()> {
        let now = self.now();
        if !self.hops[h].tx_pending {
            let hop = &mut self.hops[h];
            if let Some(tx) = hop.link.transmit_next(hop.sched.as_mut(), now) {
                hop.tx_pending = true;
                hop.account(tx.packet.flow, false, tx.packet.size);
                let mut pkt = tx.packet;
                pkt.queued_us += now.saturating_sub(pkt.enqueue_time);
                self.q.schedule(tx.done_at, Ev::TxDone(h))?;
                if h + 1 < self.hops.len() {
                    self.q.schedule(tx.arrives_at, Ev::Arrive(h + 1, pkt))?;
                } else {
                    let access = self.senders[pkt.flow.0 as usize].spec.extra_rtt / 2;
                    self.q.schedule(tx.arrives_at + access, Ev::Deliver(pkt))?;
                }
            }
            self.collect_drops(h)?;
        }
        if !self.hops[h].tx_pending && !self.hops[h].sched.is_empty() {
            self.trace.idle_violations.push((h as u32, now));
        }
        self.refresh_timer(h)
    }

    fn collect_drops(&mut self, h: usize) -> Result<()> {
        let drops = self.hops[h].sched.take_drops();
        if drops.is_empty() {
            return Ok(());
        }
        let now = self.now();
        let rest: Micros = self.hops[h..].iter().map(|x| x.link.one_way_delay()).sum();
        for p in drops {
            self.hops[h].account(p.flow, false, p.size);
            let f = p.flow.0 as usize;
            self.trace.counters.dropped += 1;
            self.trace.drops.push(DropEvent {
                flow: p.flow,
                seq: p.seq,
                hop: h as u32,
                time: now,
            });
            let notify = now + rest + self.base_oneway + self.senders[f].spec.extra_rtt / 2;
            self.q.schedule(notify, Ev::Loss(f, p.seq))?;
        }
        Ok(())
    }

    fn on_frame(&mut self, f: usize, idx: u64) -> Result<()> {
        let now = self.now();
        let SourceKind::Video { fps } = self.senders[f].spec.kind else {
            return Ok(());
        };
        if self.senders[f].spec.stop.is_some_and(|s| now >= s) {
            return Ok(());
        }
        let s = &self.senders[f];
        let srtt = if s.srtt > 0 { s.srtt } else { self.path_rtt(f) };
        let rate = s.cca.rate_bps(srtt);
        // The encoder skips (keep-alive only) while an earlier frame is still unsent.
        let backlogged = s.pending.iter().any(|c| c.frame.is_some() && !c.retx);
        let sizes = if backlogged {
            alloc::vec![KEEPALIVE_BYTES]
        } else {
            video_frame_emit(rate, fps, self.cfg.cca.floor_bps)
        };
        let bytes: u64 = sizes.iter().map(|&x| x as u64).sum();
        self.frames[f].insert(
            idx,
            Frame {
                generated: now,
                bytes,
                outstanding: sizes.len() as u32,
                completed: None,
            },
        );
        let s = &mut self.senders[f];
        for size in sizes {
            s.pending.push_back(Chunk {
                size,
                frame: Some(idx),
                retx: false,
            });
        }
        let start = s.spec.start;
        self.q.schedule(frame_boundary(start, idx + 1, fps), Ev::Frame(f, idx + 1))?;
        self.try_send(f)
    }

    fn has_data(&self, f: usize) -> bool {
        let s = &self.senders[f];
        if !s.started {
            return false;
        }
        if !s.pending.is_empty() {
            return true;
        }
        match s.spec.kind {
            SourceKind::Bulk => s.spec.stop.map_or(true, |t| self.now() < t),
            SourceKind::Web { .. } => s.unsent > 0,
            SourceKind::Video { .. } => false,
        }
    }

    fn next_chunk_size(&self, f: usize) -> u32 {
        let s = &self.senders[f];
        if let Some(c) = s.pending.front() {
            return c.size;
        }
        match s.spec.kind {
            SourceKind::Web { .. } => s.unsent.min(MTU as u64) as u32,
            _ => MTU,
        }
    }

    fn try_send(&mut self, f: usize) -> Result<()> {
        let now = self.now();
        loop {
            if !self.has_data(f) {
                return Ok(());
            }
            let size = self.next_chunk_size(f);
            let s = &self.senders[f];
            if let Some(cwnd) = s.cca.cwnd_bytes() {
                if s.inflight_bytes > 0 && s.inflight_bytes + size as u64 > cwnd {
                    return Ok(());
                }
            }
            let srtt = if s.srtt > 0 { s.srtt } else { self.path_rtt(f) };
            let pace = match s.spec.kind {
                SourceKind::Video { .. } => Some(self.cfg.video_pacing * s.cca.rate_bps(srtt)),
                _ => s.cca.pacing_bps(),
            };
            if pace.is_some() && now < s.pacing_next {
                if s.wake.is_none() {
                    let at = s.pacing_next;
                    self.senders[f].wake = Some(self.q.schedule(at, Ev::Wake(f))?);
                }
                return Ok(());
            }
            self.emit(f, size, pace)?;
        }
    }

    fn emit(&mut self, f: usize, size: u32, pace: Option<f64>) -> Result<()> {
        let now = self.now();
        let strip = self.cfg.strip_labels;
        let s = &mut self.senders[f];
        let chunk = match s.pending.pop_front() {
            Some(c) => c,
            None => {
                if let SourceKind::Web { .. } = s.spec.kind {
                    s.unsent -= size as u64;
                }
                Chunk {
                    size,
                    frame: None,
                    retx: false,
                }
            }
        };
        let seq = s.next_seq;
        s.next_seq += 1;
        let app_limited = matches!(s.spec.kind, SourceKind::Video { .. }) && s.pending.is_empty();
        s.inflight.insert(
            seq,
            Sent {
                size: chunk.size,
                at: now,
                delivered_at_send: s.delivered,
                delivered_time_at_send: s.delivered_time,
                frame: chunk.frame,
                app_limited,
            },
        );
        s.inflight_bytes += chunk.size as u64;
        if let Some(rate) = pace {
            s.pacing_next = s.pacing_next.max(now) + tx_time(chunk.size, rate.max(self.cfg.cca.floor_bps));
        }
        let mut pkt = Packet::new(FlowId(f as u32), seq, chunk.size, now);
        if let Some(fr) = chunk.frame {
            pkt = pkt.with_frame(fr);
        }
        if !strip {
            pkt = pkt.with_label(s.spec.label);
        }
        let access = s.spec.extra_rtt / 2;
        let o = &mut self.outcomes[f];
        o.sent_bytes += chunk.size as u64;
        if chunk.retx {
            o.retransmitted_bytes += chunk.size as u64;
        }
        self.trace.counters.sent += 1;
        self.q.schedule(now + access, Ev::Arrive(0, pkt))?;
        Ok(())
    }

    fn on_deliver(&mut self, pkt: Packet) -> Result<()> {
        let now = self.now();
        let f = pkt.flow.0 as usize;
        self.trace.counters.delivered += 1;
        self.trace.deliveries.push(Delivery {
            flow: pkt.flow,
            seq: pkt.seq,
            size: pkt.size,
            sent: pkt.birth,
            delivered: now,
            queued: pkt.queued_us,
        });
        let o = &mut self.outcomes[f];
        o.delivered_bytes += pkt.size as u64;
        o.first_delivery.get_or_insert(now);
        o.last_delivery = Some(now);
        if let SourceKind::Web { size } = o.spec.kind {
            if o.delivered_bytes >= size && o.completed.is_none() {
                o.completed = Some(now);
            }
        }
        if let Some(fr) = pkt.frame {
            if let Some(frame) = self.frames[f].get_mut(&fr) {
                frame.outstanding = frame.outstanding.saturating_sub(1);
                if frame.outstanding == 0 && frame.completed.is_none() {
                    frame.completed = Some(now);
                }
            }
        }
        let back = self.base_oneway + self.senders[f].spec.extra_rtt / 2;
        self.q.schedule(now + back, Ev::Ack(f, pkt.seq))?;
        Ok(())
    }

    fn on_ack(&mut self, f: usize, seq: u64) -> Result<()> {
        let now = self.now();
        let s = &mut self.senders[f];
        let Some(sent) = s.inflight.remove(&seq) else {
            return Ok(());
        };
        s.inflight_bytes -= sent.size as u64;
        let rtt = now - sent.at;
        s.min_rtt = s.min_rtt.min(rtt);
        s.srtt = if s.srtt == 0 { rtt } else { (7 * s.srtt + rtt) / 8 };
        s.delivered += sent.size as u64;
        s.delivered_time = now;
        s.acks.push_back((now, sent.size));
        s.acks_bytes += sent.size as u64;
        let window = s.srtt.max(1);
        while s.acks.front().is_some_and(|a| a.0 + window < now) {
            let (_, b) = s.acks.pop_front().unwrap();
            s.acks_bytes -= b as u64;
        }
        let elapsed = now.saturating_sub(sent.delivered_time_at_send).max(1);
        let sample = AckSample {
            now,
            rtt_us: rtt,
            min_rtt_us: s.min_rtt,
            acked_bytes: sent.size,
            delivery_bps: s.acks_bytes as f64 * 8e6 / window as f64,
            rate_sample_bps: (s.delivered - sent.delivered_at_send) as f64 * 8e6 / elapsed as f64,
            delivered_at_send: sent.delivered_at_send,
            delivered: s.delivered,
            inflight: s.inflight_bytes,
            app_limited: sent.app_limited,
        };
        s.cca.on_ack(&sample);
        self.try_send(f)
    }

    fn on_loss(&mut self, f: usize, seq: u64) -> Result<()> {
        let now = self.now();
        let s = &mut self.senders[f];
        let Some(sent) = s.inflight.remove(&seq) else {
            return Ok(());
        };
        s.inflight_bytes -= sent.size as u64;
        s.cca.on_loss(now, sent.at, sent.size);
        s.pending.push_front(Chunk {
            size: sent.size,
            frame: sent.frame,
            retx: true,
        });
        self.try_send(f)
    }

    fn on_sample(&mut self) -> Result<()> {
        let now = self.now();
        for (i, h) in self.hops.iter().enumerate() {
            self.trace.queues.push(QueueSample {
                time: now,
                hop: i as u32,
                bytes: h.sched.len_bytes(),
                per_flow: h.queued.iter().map(|(&f, &b)| (f, b)).collect(),
            });
        }
        for (i, s) in self.senders.iter().enumerate() {
            if !s.started || self.outcomes[i].completed.is_some() {
                continue;
            }
            let srtt = if s.srtt > 0 { s.srtt } else { 2 * self.base_oneway + s.spec.extra_rtt };
            self.trace.rates.push(RateSample {
                time: now,
                flow: FlowId(i as u32),
                rate_bps: s.cca.rate_bps(srtt),
            });
        }
        for (i, h) in self.hops.iter_mut().enumerate() {
            for s in h.sched.take_samples() {
                self.trace.classes.push((i as u32, s));
            }
        }
        self.q.schedule(now + self.cfg.sample_every, Ev::Sample)?;
        Ok(())
    }
}

/// Builds and runs a simulation to `t_end`.
pub fn run(cfg: SimConfig, t_end: Micros, seed: u64) -> Result<SimTrace> {
    Simulation::new(cfg, seed)?.run_until(t_end)
}

/// Convenience: kind of controller each flow uses.
pub fn flow_ccas(cfg: &SimConfig) -> Vec<CcaKind> {
    cfg.flows.iter().map(|f| f.cca).collect()
}

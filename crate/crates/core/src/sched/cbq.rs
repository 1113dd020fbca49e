//! Label-based classful baselines: two-class weighted round robin and strict priority.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{Admission, Scheduler};
use crate::packet::{AppClass, Packet};
use crate::{Micros, MTU};

const RT: usize = 0;
const WEB: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Weighted([u32; 2]),
    Strict,
}

#[derive(Debug, Clone)]
pub struct Cbq {
    mode: Mode,
    classes: [VecDeque<Packet>; 2],
    class_bytes: [u64; 2],
    deficit: [i64; 2],
    cur: usize,
    limit: u64,
    drops: Vec<Packet>,
}

fn class_of(p: &Packet) -> usize {
    match p.app_class() {
        Some(AppClass::Realtime) => RT,
        // Unlabelled traffic is treated as web.
        Some(AppClass::Web) | None => WEB,
    }
}

impl Cbq {
    pub fn weighted(limit: u64, (rt, web): (u32, u32)) -> Self {
        Self::with_mode(limit, Mode::Weighted([rt, web]))
    }

    pub fn strict(limit: u64) -> Self {
        Self::with_mode(limit, Mode::Strict)
    }

    fn with_mode(limit: u64, mode: Mode) -> Self {
        Self {
            mode,
            classes: [VecDeque::new(), VecDeque::new()],
            class_bytes: [0; 2],
            deficit: [0; 2],
            cur: 0,
            limit,
            drops: Vec::new(),
        }
    }

    fn pop_class(&mut self, c: usize) -> Option<Packet> {
        let p = self.classes[c].pop_front()?;
        self.class_bytes[c] -= p.size as u64;
        if self.classes[c].is_empty() {
            self.deficit[c] = 0;
        }
        Some(p)
    }
}

impl Scheduler for Cbq {
    fn enqueue(&mut self, mut pkt: Packet, now: Micros) -> Admission {
        pkt.enqueue_time = now;
        let c = class_of(&pkt);
        let (flow, seq) = (pkt.flow, pkt.seq);
        self.class_bytes[c] += pkt.size as u64;
        self.classes[c].push_back(pkt);
        let mut verdict = Admission::Accepted;
        while self.class_bytes[0] + self.class_bytes[1] > self.limit {
            let fat = if self.class_bytes[WEB] >= self.class_bytes[RT] { WEB } else { RT };
            let d = self.classes[fat].pop_back().unwrap();
            self.class_bytes[fat] -= d.size as u64;
            if d.flow == flow && d.seq == seq {
                verdict = Admission::Dropped;
            }
            self.drops.push(d);
        }
        verdict
    }

    fn dequeue(&mut self, _now: Micros) -> Option<Packet> {
        match self.mode {
            Mode::Strict => self.pop_class(RT).or_else(|| self.pop_class(WEB)),
            Mode::Weighted(w) => {
                if self.classes.iter().all(|c| c.is_empty()) {
                    return None;
                }
                loop {
                    let c = self.cur;
                    match self.classes[c].front() {
                        None => {
                            self.deficit[c] = 0;
                            self.cur ^= 1;
                        }
                        Some(p) if self.deficit[c] >= p.size as i64 => {
                            self.deficit[c] -= p.size as i64;
                            return self.pop_class(c);
                        }
                        Some(_) => {
                            self.deficit[c] += MTU as i64 * w[c] as i64;
                            self.cur ^= 1;
                        }
                    }
                }
            }
        }
    }

    fn take_drops(&mut self) -> Vec<Packet> {
        core::mem::take(&mut self.drops)
    }

    fn len_bytes(&self) -> u64 {
        self.class_bytes[0] + self.class_bytes[1]
    }

    fn len_packets(&self) -> usize {
        self.classes[0].len() + self.classes[1].len()
    }
}

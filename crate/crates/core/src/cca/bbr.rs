//! Bandwidth/RTT model-based controller with an eight-phase pacing-gain cycle.

use alloc::collections::VecDeque;

use super::{AckSample, CcaParams};
use crate::{Micros, MTU};

const STARTUP_GAIN: f64 = 2.885;
const CYCLE: [f64; 8] = [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
const BW_WINDOW_ROUNDS: u64 = 10;
const MIN_RTT_WINDOW: Micros = 10_000_000;
const PROBE_RTT_TIME: Micros = 200_000;
const MIN_CWND: f64 = 4.0 * MTU as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Startup,
    Drain,
    ProbeBw,
    ProbeRtt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bbr {
    mode: Mode,
    bw_samples: VecDeque<(u64, f64)>,
    round: u64,
    next_round_delivered: u64,
    min_rtt: Micros,
    min_rtt_stamp: Micros,
    full_bw: f64,
    full_bw_rounds: u32,
    phase: usize,
    phase_start: Micros,
    initial_bw: f64,
    floor: f64,
    inflight: u64,
    probe_rtt_done: Option<Micros>,
}

impl Bbr {
    pub fn new(p: &CcaParams, seed: u64) -> Self {
        Self {
            mode: Mode::Startup,
            bw_samples: VecDeque::new(),
            round: 0,
            next_round_delivered: 0,
            min_rtt: Micros::MAX,
            min_rtt_stamp: 0,
            full_bw: 0.0,
            full_bw_rounds: 0,
            // Any phase but the drain phase.
            phase: [0, 2, 3, 4, 5, 6, 7][(seed % 7) as usize],
            phase_start: 0,
            initial_bw: p.initial_rate_bps,
            floor: p.floor_bps,
            inflight: 0,
            probe_rtt_done: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn phase(&self) -> usize {
        self.phase
    }

    pub fn bw_bps(&self) -> f64 {
        self.bw_samples
            .iter()
            .map(|s| s.1)
            .fold(0.0, f64::max)
            .max(if self.bw_samples.is_empty() { self.initial_bw } else { self.floor })
    }

    pub fn pacing_gain(&self) -> f64 {
        match self.mode {
            Mode::Startup => STARTUP_GAIN,
            Mode::Drain => 1.0 / STARTUP_GAIN,
            Mode::ProbeBw => CYCLE[self.phase],
            Mode::ProbeRtt => 1.0,
        }
    }

    pub fn pacing_bps(&self) -> f64 {
        self.pacing_gain() * self.bw_bps()
    }

    fn bdp(&self) -> f64 {
        if self.min_rtt == Micros::MAX {
            return 10.0 * MTU as f64;
        }
        self.bw_bps() * self.min_rtt as f64 / 8e6
    }

    pub fn cwnd(&self) -> u64 {
        if self.mode == Mode::ProbeRtt {
            return MIN_CWND as u64;
        }
        let gain = if self.mode == Mode::ProbeBw { 2.0 } else { STARTUP_GAIN };
        (gain * self.bdp()).max(MIN_CWND) as u64
    }

    pub fn on_ack(&mut self, s: &AckSample) {
        self.inflight = s.inflight;
        let expired = s.now.saturating_sub(self.min_rtt_stamp) > MIN_RTT_WINDOW;
        if s.rtt_us <= self.min_rtt || expired {
            self.min_rtt = s.rtt_us;
            self.min_rtt_stamp = s.now;
        }
        if expired && matches!(self.mode, Mode::ProbeBw | Mode::Drain) {
            self.mode = Mode::ProbeRtt;
            self.probe_rtt_done = None;
        }
        let new_round = s.delivered_at_send >= self.next_round_delivered;
        if new_round {
            self.round += 1;
            self.next_round_delivered = s.delivered;
        }
        if !s.app_limited || s.rate_sample_bps >= self.bw_bps() {
            match self.bw_samples.back_mut() {
                Some(last) if last.0 == self.round => last.1 = last.1.max(s.rate_sample_bps),
                _ => self.bw_samples.push_back((self.round, s.rate_sample_bps)),
            }
        }
        while self.bw_samples.front().is_some_and(|f| f.0 + BW_WINDOW_ROUNDS <= self.round) {
            self.bw_samples.pop_front();
        }
        match self.mode {
            Mode::Startup => {
                if new_round && !s.app_limited {
                    let bw = self.bw_bps();
                    if bw >= self.full_bw * 1.25 {
                        self.full_bw = bw;
                        self.full_bw_rounds = 0;
                    } else {
                        self.full_bw_rounds += 1;
                    }
                    if self.full_bw_rounds >= 3 {
                        self.mode = Mode::Drain;
                    }
                }
            }
            Mode::Drain => {
                if (s.inflight as f64) <= self.bdp() {
                    self.mode = Mode::ProbeBw;
                    self.phase_start = s.now;
                }
            }
            Mode::ProbeRtt => {
                if self.probe_rtt_done.is_none() && (s.inflight as f64) <= MIN_CWND {
                    self.probe_rtt_done = Some(s.now + PROBE_RTT_TIME.max(self.min_rtt));
                }
                if self.probe_rtt_done.is_some_and(|t| s.now >= t) {
                    self.min_rtt_stamp = s.now;
                    self.mode = Mode::ProbeBw;
                    self.phase_start = s.now;
                }
            }
            Mode::ProbeBw => {
                let elapsed = s.now.saturating_sub(self.phase_start);
                let mut advance = elapsed > self.min_rtt;
                if CYCLE[self.phase] < 1.0 && (s.inflight as f64) <= self.bdp() {
                    advance = true;
                }
                if CYCLE[self.phase] > 1.0 && elapsed <= self.min_rtt {
                    advance = false;
                }
                if advance {
                    self.phase = (self.phase + 1) % CYCLE.len();
                    self.phase_start = s.now;
                }
            }
        }
    }
}

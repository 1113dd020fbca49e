//! Queueing disciplines behind a common label-free interface.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{config, Result};
use crate::packet::{FlowId, Packet};
use crate::Micros;

pub mod cbq;
pub mod codel;
pub mod confucius;
pub mod drr;
pub mod fifo;
pub mod fq;
pub mod red;
pub mod sjf;

pub use confucius::{Confucius, ConfuciusConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accepted,
    Dropped,
}

/// Per-period classifier record emitted by schedulers that classify flows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassSample {
    pub time: Micros,
    pub flow: FlowId,
    pub queue: u8,
    pub weight_q128: u32,
    pub occupancy_ema: f64,
}

pub trait Scheduler {
    /// Offers a packet. Any packet discarded as a consequence (the arriving one or
    /// a pushed-out one) is retrievable through [`Scheduler::take_drops`].
    fn enqueue(&mut self, pkt: Packet, now: Micros) -> Admission;

    /// Returns the next packet to serialize, if any. May discard packets (AQM).
    fn dequeue(&mut self, now: Micros) -> Option<Packet>;

    fn take_drops(&mut self) -> Vec<Packet>;

    /// Runs timer-driven work due at or before `now`.
    fn poll(&mut self, _now: Micros) {}

    /// Earliest time at which [`Scheduler::poll`] has work to do.
    fn next_deadline(&self) -> Option<Micros> {
        None
    }

    fn len_bytes(&self) -> u64;

    fn len_packets(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len_packets() == 0
    }

    fn take_samples(&mut self) -> Vec<ClassSample> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SchedulerKind {
    Fifo,
    Fq,
    FqCodel,
    Codel,
    Red,
    Sjf,
    #[cfg_attr(feature = "serde", serde(rename = "cbq_1_1"))]
    Cbq11,
    #[cfg_attr(feature = "serde", serde(rename = "cbq_1_5"))]
    Cbq15,
    Strict,
    Confucius,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 10] = [
        SchedulerKind::Fifo,
        SchedulerKind::Fq,
        SchedulerKind::FqCodel,
        SchedulerKind::Codel,
        SchedulerKind::Red,
        SchedulerKind::Sjf,
        SchedulerKind::Cbq11,
        SchedulerKind::Cbq15,
        SchedulerKind::Strict,
        SchedulerKind::Confucius,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Fifo => "fifo",
            SchedulerKind::Fq => "fq",
            SchedulerKind::FqCodel => "fq_codel",
            SchedulerKind::Codel => "codel",
            SchedulerKind::Red => "red",
            SchedulerKind::Sjf => "sjf",
            SchedulerKind::Cbq11 => "cbq_1_1",
            SchedulerKind::Cbq15 => "cbq_1_5",
            SchedulerKind::Strict => "strict",
            SchedulerKind::Confucius => "confucius",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .map_or_else(|| config(alloc::format!("unknown scheduler `{s}`")), Ok)
    }

    /// Whether the discipline reads application labels.
    pub fn uses_labels(self) -> bool {
        matches!(self, SchedulerKind::Cbq11 | SchedulerKind::Cbq15 | SchedulerKind::Strict)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BaselineConfig {
    pub codel_target_ms: f64,
    pub codel_interval_ms: f64,
    pub red_min_bytes: u64,
    pub red_max_bytes: u64,
    pub red_p_max: f64,
    pub red_weight: f64,
    /// Assumed per-packet service time used to age the RED average across idle periods.
    pub red_idle_packet_us: u64,
    pub sjf_thresholds_bytes: Vec<u64>,
    /// Optional override of the CBQ class weights (realtime, web).
    pub cbq_weights: Option<(u32, u32)>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            codel_target_ms: 5.0,
            codel_interval_ms: 100.0,
            red_min_bytes: 30_000,
            red_max_bytes: 90_000,
            red_p_max: 0.1,
            red_weight: 0.002,
            red_idle_packet_us: 500,
            sjf_thresholds_bytes: alloc::vec![100_000, 1_000_000, 10_000_000],
            cbq_weights: None,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.codel_target_ms > 0.0 && self.codel_target_ms < self.codel_interval_ms) {
            return config("codel target must be positive and below the interval");
        }
        if self.red_min_bytes >= self.red_max_bytes {
            return config("red min must be below red max");
        }
        if !(self.red_p_max > 0.0 && self.red_p_max <= 1.0) {
            return config("red p_max must be in (0, 1]");
        }
        if !(self.red_weight > 0.0 && self.red_weight <= 1.0) {
            return config("red weight must be in (0, 1]");
        }
        if self.sjf_thresholds_bytes.windows(2).any(|w| w[0] >= w[1]) {
            return config("sjf thresholds must be strictly increasing");
        }
        if let Some((a, b)) = self.cbq_weights {
            if a == 0 || b == 0 {
                return config("cbq weights must be positive");
            }
        }
        Ok(())
    }
}

/// Everything needed to instantiate any discipline.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerSpec {
    pub kind: SchedulerKind,
    pub baseline: BaselineConfig,
    pub confucius: ConfuciusConfig,
}

impl SchedulerSpec {
    pub fn new(kind: SchedulerKind) -> Self {
        Self {
            kind,
            baseline: BaselineConfig::default(),
            confucius: ConfuciusConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.baseline.validate()?;
        self.confucius.validate()
    }

    pub fn build(&self, buffer_limit: u64, seed: u64) -> Result<Box<dyn Scheduler>> {
        self.validate()?;
        let b = &self.baseline;
        let codel = codel::CodelParams::from_ms(b.codel_target_ms, b.codel_interval_ms);
        Ok(match self.kind {
            SchedulerKind::Fifo => Box::new(fifo::Fifo::new(buffer_limit)),
            SchedulerKind::Fq => Box::new(fq::Fq::new(buffer_limit, None)),
            SchedulerKind::FqCodel => Box::new(fq::Fq::new(buffer_limit, Some(codel))),
            SchedulerKind::Codel => Box::new(codel::Codel::new(buffer_limit, codel)),
            SchedulerKind::Red => Box::new(red::Red::new(
                buffer_limit,
                red::RedParams {
                    min_bytes: b.red_min_bytes,
                    max_bytes: b.red_max_bytes,
                    p_max: b.red_p_max,
                    weight: b.red_weight,
                    idle_packet_us: b.red_idle_packet_us,
                },
                seed,
            )),
            SchedulerKind::Sjf => Box::new(sjf::Sjf::new(buffer_limit, b.sjf_thresholds_bytes.clone())),
            SchedulerKind::Cbq11 => Box::new(cbq::Cbq::weighted(buffer_limit, b.cbq_weights.unwrap_or((1, 1)))),
            SchedulerKind::Cbq15 => Box::new(cbq::Cbq::weighted(buffer_limit, b.cbq_weights.unwrap_or((1, 5)))),
            SchedulerKind::Strict => Box::new(cbq::Cbq::strict(buffer_limit)),
            SchedulerKind::Confucius => Box::new(Confucius::new(self.confucius.clone(), buffer_limit)?),
        })
    }
}


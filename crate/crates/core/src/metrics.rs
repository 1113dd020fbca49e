//! Figures of merit computed from a finished trace.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::packet::FlowId;
use crate::sim::{Delivery, FlowOutcome, SimTrace};
use crate::source::SourceKind;
use crate::Micros;

/// Frame delay above which video is considered stalled.
pub const STALL_THRESHOLD_MS: f64 = 190.0;

/// Per-frame delays of one video flow.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameDelaySeries {
    /// Nominal spacing between frames, used for the last frame.
    pub interval_ms: f64,
    /// (generation time, delay) in ms, generation times increasing.
    pub points: Vec<(f64, f64)>,
}

impl FrameDelaySeries {
    /// Frames of `flow`. Frames still in flight at the end of the run count
    /// as delayed until then.
    pub fn from_trace(trace: &SimTrace, flow: FlowId) -> Self {
        let fps = match trace.flows.get(flow.0 as usize).map(|f| f.spec.kind) {
            Some(SourceKind::Video { fps }) => fps,
            _ => 30,
        };
        let mut points: Vec<(f64, f64)> = trace
            .frames
            .iter()
            .filter(|f| f.flow == flow)
            .map(|f| {
                let done = f.completed.unwrap_or(trace.end);
                (us_to_ms(f.generated), us_to_ms(done.saturating_sub(f.generated)))
            })
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            interval_ms: 1000.0 / fps as f64,
            points,
        }
    }

    pub fn max_delay(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

fn us_to_ms(us: Micros) -> f64 {
    us as f64 / 1000.0
}

/// Time during which frame delay exceeds `threshold_ms`, holding each
/// frame's delay until the next frame is generated.
pub fn stall_duration(series: &FrameDelaySeries, threshold_ms: f64) -> f64 {
    let pts = &series.points;
    let mut total = 0.0;
    for (i, &(t, d)) in pts.iter().enumerate() {
        if d > threshold_ms {
            total += match pts.get(i + 1) {
                Some(&(next, _)) => next - t,
                None => series.interval_ms,
            };
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PageLoad {
    pub page: u32,
    pub ms: f64,
    pub incomplete: bool,
}

/// Page load time: last completion minus the earliest start. Unfinished
/// flows count as finishing at `horizon` and flag the page.
pub fn page_load_time(page: u32, flows: &[&FlowOutcome], horizon: Micros) -> Option<PageLoad> {
    let start = flows.iter().map(|f| f.spec.start).min()?;
    let mut incomplete = false;
    let mut end = start;
    for f in flows {
        match f.completed {
            Some(t) => end = end.max(t),
            None => {
                incomplete = true;
                end = end.max(horizon);
            }
        }
    }
    Some(PageLoad {
        page,
        ms: us_to_ms(end - start),
        incomplete,
    })
}

/// Jain's fairness index. `None` for an empty or all-zero input.
pub fn jfi(xs: &[f64]) -> Option<f64> {
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    if xs.is_empty() || sq <= 0.0 {
        return None;
    }
    Some(sum * sum / (xs.len() as f64 * sq))
}

/// Delivered bits of `flow` over the trailing `window_ms`, sampled every
/// `window_ms` from the first window end up to `until`.
pub fn service_rate_series(deliveries: &[Delivery], flow: FlowId, window_ms: f64, until: Micros) -> Vec<(f64, f64)> {
    let window = (window_ms * 1000.0) as Micros;
    if window == 0 {
        return Vec::new();
    }
    let mut buckets: BTreeMap<u64, u64> = BTreeMap::new();
    for d in deliveries.iter().filter(|d| d.flow == flow) {
        // a delivery exactly at a window end belongs to that window
        let idx = (d.delivered + window - 1) / window;
        *buckets.entry(idx.max(1)).or_default() += d.size as u64 * 8;
    }
    (1..=until / window)
        .map(|i| {
            let bits = buckets.get(&i).copied().unwrap_or(0);
            (us_to_ms(i * window), bits as f64 * 1e6 / window as f64)
        })
        .collect()
}

/// Nearest-rank quantile of an unsorted sample.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = libm::ceil(q.clamp(0.0, 1.0) * v.len() as f64) as usize;
    Some(v[rank.saturating_sub(1).min(v.len() - 1)])
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DelayQuantiles {
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
}

impl DelayQuantiles {
    pub fn of(xs: &[f64]) -> Self {
        let q = |p| quantile(xs, p).unwrap_or(0.0);
        Self {
            p50: q(0.5),
            p90: q(0.9),
            p95: q(0.95),
            p99: q(0.99),
            max: q(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowReport {
    pub flow: u32,
    pub kind: String,
    pub cca: String,
    pub start_ms: f64,
    pub delivered_bytes: u64,
    pub retransmitted_bytes: u64,
    pub fct_ms: Option<f64>,
    pub throughput_bps: f64,
    pub stall_ms: Option<f64>,
    pub max_frame_delay_ms: Option<f64>,
    pub queueing_delay: DelayQuantiles,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunReport {
    pub duration_ms: f64,
    /// Mean stall over real-time flows.
    pub stall_ms: f64,
    pub max_frame_delay_ms: f64,
    pub plt_ms: Vec<PageLoad>,
    pub mean_plt_ms: Option<f64>,
    pub mean_fct_ms: Option<f64>,
    /// Over long-lived flows' whole-run throughput.
    pub jfi: Option<f64>,
    pub packet_delay_ms: DelayQuantiles,
    pub flows: Vec<FlowReport>,
    pub drops: u64,
}

impl RunReport {
    pub fn from_trace(trace: &SimTrace) -> Self {
        Self::with_threshold(trace, STALL_THRESHOLD_MS)
    }

    pub fn with_threshold(trace: &SimTrace, threshold_ms: f64) -> Self {
        let mut per_flow_delay: Vec<Vec<f64>> = alloc::vec![Vec::new(); trace.flows.len()];
        let mut per_flow_queue: Vec<Vec<f64>> = alloc::vec![Vec::new(); trace.flows.len()];
        let mut all = Vec::with_capacity(trace.deliveries.len());
        for d in &trace.deliveries {
            let delay = us_to_ms(d.delivered - d.sent);
            all.push(delay);
            if let Some(v) = per_flow_delay.get_mut(d.flow.0 as usize) {
                v.push(delay);
                per_flow_queue[d.flow.0 as usize].push(us_to_ms(d.queued));
            }
        }
        let mut flows = Vec::with_capacity(trace.flows.len());
        let mut stalls = Vec::new();
        let mut max_frame = 0.0f64;
        let mut pages: BTreeMap<u32, Vec<&FlowOutcome>> = BTreeMap::new();
        let mut fcts = Vec::new();
        let mut bulk = Vec::new();
        for (i, f) in trace.flows.iter().enumerate() {
            let active = trace.end.saturating_sub(f.spec.start).max(1);
            let throughput = f.delivered_bytes as f64 * 8e6 / active as f64;
            let (mut stall, mut maxd) = (None, None);
            let kind = match f.spec.kind {
                SourceKind::Video { .. } => {
                    let s = FrameDelaySeries::from_trace(trace, f.flow);
                    let st = stall_duration(&s, threshold_ms);
                    stalls.push(st);
                    max_frame = max_frame.max(s.max_delay());
                    stall = Some(st);
                    maxd = Some(s.max_delay());
                    "video"
                }
                SourceKind::Web { .. } => {
                    if let Some(p) = f.spec.page {
                        pages.entry(p).or_default().push(f);
                    }
                    "web"
                }
                SourceKind::Bulk => {
                    if f.spec.start < trace.end {
                        bulk.push(throughput);
                    }
                    "bulk"
                }
            };
            let fct = f.completed.map(|t| us_to_ms(t - f.spec.start));
            if let Some(x) = fct {
                fcts.push(x);
            }
            flows.push(FlowReport {
                flow: i as u32,
                kind: kind.to_string(),
                cca: f.spec.cca.name().to_string(),
                start_ms: us_to_ms(f.spec.start),
                delivered_bytes: f.delivered_bytes,
                retransmitted_bytes: f.retransmitted_bytes,
                fct_ms: fct,
                throughput_bps: throughput,
                stall_ms: stall,
                max_frame_delay_ms: maxd,
                queueing_delay: DelayQuantiles::of(&per_flow_queue[i]),
            });
        }
        let plt: Vec<PageLoad> = pages
            .iter()
            .filter_map(|(&p, fl)| page_load_time(p, fl, trace.end))
            .collect();
        Self {
            duration_ms: us_to_ms(trace.end),
            stall_ms: mean(&stalls).unwrap_or(0.0),
            max_frame_delay_ms: max_frame,
            mean_plt_ms: mean(&plt.iter().map(|p| p.ms).collect::<Vec<_>>()),
            plt_ms: plt,
            mean_fct_ms: mean(&fcts),
            jfi: jfi(&bulk),
            packet_delay_ms: DelayQuantiles::of(&all),
            flows,
            drops: trace.counters.dropped,
        }
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(delays: &[f64]) -> FrameDelaySeries {
        FrameDelaySeries {
            interval_ms: 1000.0 / 30.0,
            points: delays.iter().enumerate().map(|(i, &d)| (i as f64 * 1000.0 / 30.0, d)).collect(),
        }
    }

    #[test]
    fn stall_examples() {
        assert_eq!(stall_duration(&series(&[60.0; 90]), 190.0), 0.0);
        let mut d = alloc::vec![60.0; 10];
        d.extend([400.0; 30]);
        d.extend([60.0; 10]);
        assert!((stall_duration(&series(&d), 190.0) - 1000.0).abs() < 1e-9);
        let one = stall_duration(&series(&[60.0, 250.0, 60.0]), 190.0);
        assert!((one - 1000.0 / 30.0).abs() < 1e-9);
    }

    #[test]
    fn jfi_examples() {
        assert_eq!(jfi(&[3.0, 3.0, 3.0]), Some(1.0));
        assert_eq!(jfi(&[1.0, 0.0, 0.0, 0.0]), Some(0.25));
        // (2+1+1)^2 / (3 * (4+1+1))
        let oracle = 16.0 / 18.0;
        assert!((jfi(&[2.0, 1.0, 1.0]).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(jfi(&[]), None);
        assert_eq!(jfi(&[0.0, 0.0]), None);
    }

    #[test]
    fn service_rate_windows() {
        let d: Vec<Delivery> = (1..=100)
            .map(|i| Delivery {
                flow: FlowId(0),
                seq: i,
                size: 1250,
                sent: 0,
                delivered: i * 1000,
                queued: 0,
            })
            .collect();
        let s = service_rate_series(&d, FlowId(0), 10.0, 100_000);
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|&(_, r)| (r - 10e6).abs() < 1e-6));
        let empty = service_rate_series(&d, FlowId(1), 10.0, 100_000);
        assert!(empty.iter().all(|&(_, r)| r == 0.0));
    }

    #[test]
    fn quantiles() {
        let xs: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        assert_eq!(quantile(&xs, 0.5), Some(50.0));
        assert_eq!(quantile(&xs, 0.99), Some(99.0));
        assert_eq!(quantile(&xs, 1.0), Some(100.0));
    }
}

//! Application models: real-time video, sized web transfers, long-lived bulk flows.

use alloc::vec::Vec;

use crate::cca::CcaKind;
use crate::error::{invalid, Result};
use crate::packet::AppClass;
use crate::{Micros, MTU, US_PER_MS, US_PER_S};

/// Size of the keep-alive packet sent when the target rate is below the floor.
pub const KEEPALIVE_BYTES: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum SourceKind {
    Video { fps: u32 },
    Web { size: u64 },
    Bulk,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowSpec {
    pub kind: SourceKind,
    pub cca: CcaKind,
    pub start: Micros,
    /// Sending stops here (bulk and video); web flows stop when complete.
    pub stop: Option<Micros>,
    /// Round-trip delay added outside the modelled hops.
    pub extra_rtt: Micros,
    pub label: Option<AppClass>,
    /// Web page this flow belongs to.
    pub page: Option<u32>,
}

impl FlowSpec {
    pub fn video(cca: CcaKind, fps: u32, start: Micros) -> Self {
        Self {
            kind: SourceKind::Video { fps },
            cca,
            start,
            stop: None,
            extra_rtt: 0,
            label: Some(AppClass::Realtime),
            page: None,
        }
    }

    pub fn web(size: u64, start: Micros, page: Option<u32>) -> Self {
        Self {
            kind: SourceKind::Web { size },
            cca: CcaKind::Cubic,
            start,
            stop: None,
            extra_rtt: 0,
            label: Some(AppClass::Web),
            page,
        }
    }

    pub fn bulk(cca: CcaKind, start: Micros) -> Self {
        Self {
            kind: SourceKind::Bulk,
            cca,
            start,
            stop: None,
            extra_rtt: 0,
            label: Some(AppClass::Web),
            page: None,
        }
    }

    pub fn is_realtime(&self) -> bool {
        matches!(self.kind, SourceKind::Video { .. })
    }
}

/// One web page: `n_flows` simultaneous transfers using the throughput-oriented controller.
pub fn spawn_web_page(sizes: &[u64], start_ms: f64, page: u32) -> Result<Vec<FlowSpec>> {
    if sizes.is_empty() {
        return invalid("a web page needs at least one flow");
    }
    if sizes.iter().any(|&s| s == 0) {
        return invalid("web flow sizes must be positive");
    }
    let start = libm::round(start_ms * US_PER_MS as f64) as Micros;
    Ok(sizes.iter().map(|&s| FlowSpec::web(s, start, Some(page))).collect())
}

/// Same as [`spawn_web_page`] with per-flow start offsets in milliseconds.
pub fn spawn_web_page_staggered(flows: &[(f64, u64)], start_ms: f64, page: u32) -> Result<Vec<FlowSpec>> {
    if flows.is_empty() {
        return invalid("a web page needs at least one flow");
    }
    let mut out = Vec::with_capacity(flows.len());
    for &(off, size) in flows {
        if size == 0 || off < 0.0 {
            return invalid("web flows need a positive size and non-negative offset");
        }
        let start = libm::round((start_ms + off) * US_PER_MS as f64) as Micros;
        out.push(FlowSpec::web(size, start, Some(page)));
    }
    Ok(out)
}

/// Generation instant of frame `index`: whole microseconds, remainder carried.
pub fn frame_boundary(start: Micros, index: u64, fps: u32) -> Micros {
    start + index * US_PER_S / fps as u64
}

/// Packet sizes for one frame at `rate_bps`. Below `floor_bps` a single keep-alive packet.
pub fn video_frame_emit(rate_bps: f64, fps: u32, floor_bps: f64) -> Vec<u32> {
    if rate_bps < floor_bps {
        return alloc::vec![KEEPALIVE_BYTES];
    }
    let bytes = (libm::round(rate_bps / fps as f64 / 8.0) as u64).max(1);
    let full = bytes / MTU as u64;
    let rest = (bytes % MTU as u64) as u32;
    let mut v: Vec<u32> = alloc::vec![MTU; full as usize];
    if rest > 0 {
        v.push(rest);
    }
    v
}

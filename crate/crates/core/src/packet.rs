//! Packets and flow identity.

use crate::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowId(pub u32);

/// Application label attached by end hosts. Only label-based baselines read it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AppClass {
    Realtime,
    Web,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub flow: FlowId,
    pub size: u32,
    /// Creation time at the sender.
    pub birth: Micros,
    /// Set by the scheduler when the packet is admitted.
    pub enqueue_time: Micros,
    pub seq: u64,
    pub frame: Option<u64>,
    /// Accumulated time spent queued across hops.
    pub queued_us: Micros,
    app_class: Option<AppClass>,
}

impl Packet {
    pub fn new(flow: FlowId, seq: u64, size: u32, birth: Micros) -> Self {
        Self {
            flow,
            size,
            birth,
            enqueue_time: birth,
            seq,
            frame: None,
            queued_us: 0,
            app_class: None,
        }
    }

    pub fn with_frame(mut self, frame: u64) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn with_label(mut self, class: Option<AppClass>) -> Self {
        self.app_class = class;
        self
    }

    /// Application label. Read only by classful baselines (CBQ, strict priority).
    pub fn app_class(&self) -> Option<AppClass> {
        self.app_class
    }

    pub fn strip_label(&mut self) {
        self.app_class = None;
    }
}

//! Deterministic bottleneck simulator with an age-aware, occupancy-classifying
//! packet scheduler, a set of baseline queueing disciplines, simplified
//! congestion controllers and a closed-form/fluid analysis of queueing bounds.
//!
//! Time inside the simulator is integer microseconds. The analysis module works
//! in milliseconds, bits and bits per millisecond.

#![no_std]

#[cfg(test)]
extern crate std;

extern crate alloc;

pub mod cca;
pub mod engine;
pub mod error;
pub mod fluid;
pub mod link;
pub mod metrics;
pub mod packet;
pub mod sched;
pub mod sim;
pub mod source;

pub use error::{Error, Result};

/// Microseconds since simulation start.
pub type Micros = u64;

/// Maximum transmission unit in bytes.
pub const MTU: u32 = 1500;

pub const US_PER_MS: u64 = 1000;
pub const US_PER_S: u64 = 1_000_000;

#[inline]
pub fn ms(v: u64) -> Micros {
    v * US_PER_MS
}

#[inline]
pub fn secs(v: u64) -> Micros {
    v * US_PER_S
}

/// Serialization time of `bytes` at `bps`, rounded up to a whole microsecond.
#[inline]
pub fn tx_time(bytes: u32, bps: f64) -> Micros {
    let us = (bytes as f64) * 8.0 * 1e6 / bps;
    let r = libm::ceil(us - 1e-9);
    if r < 1.0 {
        1
    } else {
        r as Micros
    }
}

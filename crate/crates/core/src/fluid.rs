//! Fluid-model bounds on the queueing delay seen by an existing delay-based flow
//! when `N` new flows join a bottleneck, plus a delay-differential integrator
//! that serves as an independent check of the closed forms.
//!
//! Units: milliseconds, bits, bits per millisecond. `k` is in ms^-2, `lambda`
//! in ms^-1. Flow sizes `b` and `b0` are given in bytes.

use alloc::vec::Vec;
use core::f64::consts::{LOG2_E, PI};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FluidParams {
    /// Controller responsiveness (ms^-2).
    pub k: f64,
    /// Controller delay target (ms).
    pub q0: f64,
    /// Feedback delay (ms).
    pub tau: f64,
    /// Weight growth rate (ms^-1).
    pub lambda: f64,
    /// Capacity (bits/ms).
    pub c: f64,
    /// Number of new flows.
    pub n: u32,
    /// Size of each new flow (bytes).
    pub b: f64,
    /// Initial burst of each new flow (bytes).
    pub b0: f64,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            k: 0.001,
            q0: 10.0,
            tau: 40.0,
            lambda: 0.004,
            c: 25_000.0,
            n: 9,
            b: 15_000.0,
            b0: 15_000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warning {
    /// The derivations assume tau is small against 1/sqrt(k).
    LongFeedback { tau_sqrt_k: f64 },
    /// The series in lambda is only trusted for small lambda.
    LargeLambda { lambda: f64 },
}

impl FluidParams {
    pub fn validate(&self) -> Result<Vec<Warning>> {
        let pos = [self.k, self.q0, self.tau, self.lambda, self.c, self.b, self.b0];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("fluid parameters must be positive and finite");
        }
        let mut w = Vec::new();
        let x = self.tau * libm::sqrt(self.k);
        if x > 0.3 {
            w.push(Warning::LongFeedback { tau_sqrt_k: x });
        }
        if self.lambda > 0.02 {
            w.push(Warning::LargeLambda { lambda: self.lambda });
        }
        Ok(w)
    }

    fn n(&self) -> f64 {
        self.n as f64
    }

    /// `2/3 sqrt(2/k) + q0 + tau`: the single-competitor peak delay.
    pub fn base_peak(&self) -> f64 {
        2.0 / 3.0 * libm::sqrt(2.0 / self.k) + self.q0 + self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Policy {
    Fq,
    Fifo,
    Cbq,
    Confucius,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Fq, Policy::Fifo, Policy::Cbq, Policy::Confucius];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Fq => "fq",
            Policy::Fifo => "fifo",
            Policy::Cbq => "cbq",
            Policy::Confucius => "confucius",
        }
    }
}

pub fn qmax_fq(p: &FluidParams) -> f64 {
    p.n() * p.base_peak()
}

/// Stated as a lower bound on the FIFO peak.
pub fn qmax_fifo(p: &FluidParams) -> f64 {
    (p.n() * p.b0 * 8.0 / (p.q0 * p.c) + 1.0) * p.base_peak()
}

pub fn qmax_cbq(p: &FluidParams) -> f64 {
    p.base_peak()
}

/// Coefficients `(F0, F1, F2)` of the second-order expansion in lambda.
pub fn confucius_series_coefficients(p: &FluidParams) -> (f64, f64, f64) {
    let (k, q0, tau) = (p.k, p.q0, p.tau);
    let sk = libm::sqrt(k);
    let f0 = 2.0 * q0 + 6.0 * tau + 8.0 / (2.0 * sk);
    let f1 = 10.0 / (3.0 * k) + 2.0 * q0 * tau + 2.0 * tau * tau + 4.0 * q0 / sk + 16.0 * tau / (3.0 * sk);
    let f2 = 4.0 * q0 / k
        + 6.0 * tau / k
        + q0 * tau * tau
        + tau * tau * tau
        + 6.0 * q0 * tau / sk
        + 11.0 * tau * tau / sk;
    (f0, f1, f2)
}

pub fn qmax_confucius_series(p: &FluidParams) -> f64 {
    let (f0, f1, f2) = confucius_series_coefficients(p);
    f0 + f1 * p.lambda + f2 * p.lambda * p.lambda
}

pub fn qmax_confucius_simplified(p: &FluidParams) -> f64 {
    let (k, q0, tau, l) = (p.k, p.q0, p.tau, p.lambda);
    6.0 * q0 + 15.0 * tau + 8.0 * l / k + (10.0 * q0 + 15.0 * tau) * l * l / k
}

/// Closed-form peak delay for a policy; Confucius uses the simplified bound.
pub fn qmax_closed(policy: Policy, p: &FluidParams) -> f64 {
    match policy {
        Policy::Fq => qmax_fq(p),
        Policy::Fifo => qmax_fifo(p),
        Policy::Cbq => qmax_cbq(p),
        Policy::Confucius => qmax_confucius_simplified(p),
    }
}

/// Time at which the existing flow's sending rate reaches zero under Confucius.
pub fn t0_root(p: &FluidParams) -> Result<f64> {
    let (k, l, c) = (p.k, p.lambda, p.c);
    let a = c * (k / 2.0) / (l * l + k * libm::exp(l * p.tau));
    let b = c - a;
    if !(b > 0.0) {
        return invalid("degenerate parameters: A >= C");
    }
    Ok((-l * a + libm::sqrt((l * a) * (l * a) + 2.0 * b * k * (a + b))) / (b * k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FctDelta {
    pub ms: f64,
    /// Set when the value is a placeholder for a bound that is at most zero.
    pub flagged: bool,
}

/// Completion-time penalty of a new flow relative to fair queueing.
pub fn fct_delta(policy: Policy, p: &FluidParams) -> FctDelta {
    let n = p.n().max(1.0);
    let ms = match policy {
        Policy::Fq => 0.0,
        Policy::Fifo => {
            return FctDelta {
                ms: 0.0,
                flagged: true,
            }
        }
        Policy::Cbq => (n - 1.0) * p.b * 8.0 / p.c,
        Policy::Confucius => {
            (1.0 / p.lambda) * (0.5 - libm::log2((n + 1.0) / 2.0) / n - 1.0 / (2.0 * n))
        }
    };
    FctDelta { ms, flagged: false }
}

/// Upper bound on the Confucius completion-time penalty: `log2(e)/lambda`.
pub fn fct_delta_confucius_bound(lambda: f64) -> f64 {
    LOG2_E / lambda
}

/// Responsiveness matching an observed oscillation period: `k = (2 pi / period)^2`.
pub fn fit_responsiveness(period_ms: f64) -> Result<f64> {
    if !(period_ms > 0.0) {
        return invalid("period must be positive");
    }
    let w = 2.0 * PI / period_ms;
    Ok(w * w)
}

/// Oscillation period implied by `k`.
pub fn probe_period(k: f64) -> f64 {
    2.0 * PI / libm::sqrt(k)
}

/// Service rate available to the existing flow at time `t` (bits/ms).
pub fn service_rate(policy: Policy, p: &FluidParams, t: f64) -> f64 {
    let (c, n) = (p.c, p.n());
    if t < 0.0 {
        return c;
    }
    match policy {
        Policy::Fq => c / (n + 1.0),
        Policy::Cbq => c / 2.0,
        Policy::Fifo => c * c * p.q0 / (c * p.q0 + n * p.b0 * 8.0),
        Policy::Confucius => (c / 2.0 * libm::exp2(-p.lambda * t)).max(c / (n + 1.0)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Sending rate s(t) (bits/ms).
    pub s: Vec<f64>,
    /// Queueing delay q(t) (ms).
    pub q: Vec<f64>,
    /// Queued bits p(t).
    pub p: Vec<f64>,
    pub q_max: f64,
    pub t_at_max: f64,
}

impl Trajectory {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

pub fn default_step(p: &FluidParams) -> f64 {
    (p.tau / 10.0).min(0.01 / libm::sqrt(p.k))
}

/// Horizon long enough to contain the first transient peak.
pub fn default_horizon(p: &FluidParams) -> f64 {
    4.0 * p.tau + 4.0 * libm::sqrt(2.0 / p.k) + 3.0 / p.lambda
}

/// Explicit Euler integration of `ds/dt = -k r(t-tau) (q(t-tau) - q0)` with
/// `dp/dt = s - r` and `q = p / r`. The delay term is expressed in bits by the
/// service rate seen at the delayed instant. Starts from `s(0-) = C`, `p(0) = q0 C`.
pub fn integrate_fluid(p: &FluidParams, policy: Policy, t_end: f64, dt: f64) -> Result<Trajectory> {
    let n_ok = [p.k, p.q0, p.tau, p.lambda, p.c].iter().all(|v| *v > 0.0 && v.is_finite());
    if !n_ok || p.b0 < 0.0 {
        return invalid("fluid parameters must be positive and finite");
    }
    if !(dt > 0.0) || dt > p.tau / 10.0 * (1.0 + 1e-9) || dt > 0.01 / libm::sqrt(p.k) * (1.0 + 1e-9) {
        return invalid("step too coarse: need dt <= tau/10 and dt <= 0.01/sqrt(k)");
    }
    if !(t_end > 0.0) {
        return invalid("horizon must be positive");
    }
    let steps = libm::ceil(t_end / dt) as usize;
    let delay = (libm::round(p.tau / dt) as usize).max(1);
    let c = p.c;
    let mut s = c;
    let mut buf = p.q0 * c;
    // Ring of (p, r) over the last `delay` steps; history before t=0 is equilibrium.
    let mut hist: Vec<(f64, f64)> = alloc::vec![(buf, c); delay];
    let mut head = 0;
    let mut out = Trajectory {
        dt,
        s: Vec::with_capacity(steps),
        q: Vec::with_capacity(steps),
        p: Vec::with_capacity(steps),
        q_max: 0.0,
        t_at_max: 0.0,
    };
    for i in 0..steps {
        let t = i as f64 * dt;
        let r = service_rate(policy, p, t);
        let q = buf / r;
        out.s.push(s);
        out.q.push(q);
        out.p.push(buf);
        if q > out.q_max {
            out.q_max = q;
            out.t_at_max = t;
        }
        let (pd, rd) = hist[head];
        s = (s - p.k * rd * (pd / rd - p.q0) * dt).max(0.0);
        buf = (buf + (s - r) * dt).max(0.0);
        hist[head] = (buf, r);
        head = (head + 1) % delay;
    }
    Ok(out)
}

/// Closed-form and integrated figures for one policy.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicyBound {
    pub policy: Policy,
    pub q_max_closed: f64,
    pub q_max_integrated: f64,
    pub fct_delta_vs_fq: f64,
    /// FIFO: closed form is a lower bound. Confucius: closed form is an upper bound.
    pub bound_flag: bool,
}

pub fn evaluate(policy: Policy, p: &FluidParams) -> Result<PolicyBound> {
    let traj = integrate_fluid(p, policy, default_horizon(p), default_step(p))?;
    let fct = fct_delta(policy, p);
    Ok(PolicyBound {
        policy,
        q_max_closed: qmax_closed(policy, p),
        q_max_integrated: traj.q_max,
        fct_delta_vs_fq: fct.ms,
        bound_flag: matches!(policy, Policy::Fifo | Policy::Confucius) || fct.flagged,
    })
}

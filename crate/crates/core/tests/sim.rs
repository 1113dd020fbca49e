use confucius_core::cca::CcaKind;
use confucius_core::fluid::probe_period;
use confucius_core::link::{CapacityProfile, Link};
use confucius_core::metrics::{mean, RunReport};
use confucius_core::packet::FlowId;
use confucius_core::sched::{SchedulerKind, SchedulerSpec};
use confucius_core::sim::{run, HopSpec, SimConfig, SimTrace};
use confucius_core::source::{spawn_web_page, FlowSpec, SourceKind};
use confucius_core::{ms, secs, Error};

fn hop(kind: SchedulerKind, bps: f64, rtt_ms: u64) -> HopSpec {
    HopSpec {
        link: Link::new(CapacityProfile::constant(bps), ms(rtt_ms)),
        scheduler: SchedulerSpec::new(kind),
    }
}

fn mixed(kind: SchedulerKind) -> SimConfig {
    let mut flows = vec![FlowSpec::video(CcaKind::Fluid, 30, 0), FlowSpec::bulk(CcaKind::Cubic, ms(500))];
    flows.extend(spawn_web_page(&[15_000; 9], 2_000.0, 0).unwrap());
    SimConfig::new(vec![hop(kind, 12e6, 40)], flows)
}

fn flow_rate(t: &SimTrace, flow: u32, from: u64) -> Vec<(u64, f64)> {
    t.rates.iter().filter(|r| r.flow == FlowId(flow) && r.time >= from).map(|r| (r.time, r.rate_bps)).collect()
}

#[test]
fn same_seed_same_trace() {
    for kind in [SchedulerKind::Confucius, SchedulerKind::Red, SchedulerKind::FqCodel] {
        let a = run(mixed(kind), secs(6), 7).unwrap();
        let b = run(mixed(kind), secs(6), 7).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn zero_horizon_gives_empty_trace() {
    let t = run(mixed(SchedulerKind::Fifo), 0, 1).unwrap();
    assert!(t.deliveries.is_empty() && t.drops.is_empty() && t.frames.is_empty());
    assert_eq!(t.counters.sent, 0);
}

#[test]
fn missing_link_is_a_config_error() {
    let cfg = SimConfig::new(vec![], vec![FlowSpec::bulk(CcaKind::Cubic, 0)]);
    assert!(matches!(run(cfg, secs(1), 1), Err(Error::Config(_))));
}

#[test]
fn packets_balance() {
    for kind in confucius_core::sched::SchedulerKind::ALL {
        let t = run(mixed(kind), secs(5), 3).unwrap();
        let c = t.counters;
        assert_eq!(c.sent, c.delivered + c.dropped + c.in_network, "{kind:?}");
        assert_eq!(c.dropped as usize, t.drops.len());
        assert!(t.idle_violations.is_empty(), "{kind:?}");
    }
}

#[test]
fn web_flows_deliver_exactly_their_size() {
    let t = run(mixed(SchedulerKind::Confucius), secs(8), 2).unwrap();
    for f in t.flows.iter().filter(|f| matches!(f.spec.kind, SourceKind::Web { .. })) {
        let SourceKind::Web { size } = f.spec.kind else { unreachable!() };
        assert_eq!(f.delivered_bytes, size);
        assert!(f.completed.is_some());
    }
}

#[test]
fn single_packet_flow() {
    let cfg = SimConfig::new(vec![hop(SchedulerKind::Fifo, 12e6, 40)], spawn_web_page(&[100], 0.0, 0).unwrap());
    let t = run(cfg, secs(1), 1).unwrap();
    assert_eq!(t.deliveries.len(), 1);
    assert_eq!(t.flows[0].delivered_bytes, 100);
}

#[test]
fn page_respects_serialization_floor() {
    let cfg = SimConfig::new(vec![hop(SchedulerKind::Fifo, 25e6, 40)], spawn_web_page(&[15_000; 9], 0.0, 0).unwrap());
    let t = run(cfg, secs(5), 1).unwrap();
    let r = RunReport::from_trace(&t);
    assert!(r.plt_ms[0].ms >= 43.2, "{}", r.plt_ms[0].ms);
    assert!(!r.plt_ms[0].incomplete);
}

#[test]
fn fifty_flows_at_fifty_mbps() {
    let mut flows = vec![FlowSpec::video(CcaKind::Fluid, 30, 0)];
    flows.extend(spawn_web_page(&[15_000; 49], 1_000.0, 0).unwrap());
    let cfg = SimConfig::new(vec![hop(SchedulerKind::Confucius, 50e6, 40)], flows);
    let t = run(cfg, secs(100), 1).unwrap();
    let r = RunReport::from_trace(&t);
    assert_eq!(r.flows.len(), 50);
    assert!(r.plt_ms.iter().all(|p| !p.incomplete));
}

#[test]
fn fluid_equilibrium() {
    let cfg = SimConfig::new(vec![hop(SchedulerKind::Fifo, 25e6, 40)], vec![FlowSpec::bulk(CcaKind::Fluid, 0)]);
    let (k, q0) = (cfg.cca.fluid_k, cfg.cca.fluid_q0_ms);
    let settle = (20.0 / k.sqrt() * 1000.0) as u64;
    let t = run(cfg, secs(30), 1).unwrap();
    let delivered: u64 = t.deliveries.iter().filter(|d| d.delivered >= settle).map(|d| d.size as u64).sum();
    let rate = delivered as f64 * 8.0 / ((t.end - settle) as f64 / 1e6);
    let qd: Vec<f64> = t.deliveries.iter().filter(|d| d.delivered >= settle).map(|d| d.queued as f64 / 1000.0).collect();
    let qd = mean(&qd).unwrap();
    assert!((rate / 25e6 - 1.0).abs() < 0.05, "rate {rate}");
    assert!((qd / q0 - 1.0).abs() < 0.05, "queueing delay {qd}");
}

#[test]
fn fluid_oscillation_period() {
    // Short feedback loop so the delay barely stretches the period.
    let mut cfg = SimConfig::new(vec![hop(SchedulerKind::Fifo, 25e6, 10)], vec![FlowSpec::bulk(CcaKind::Fluid, 0)]);
    cfg.cca.fluid_k = 0.0004;
    cfg.cca.initial_rate_bps = 12e6;
    cfg.sample_every = 1_000;
    let t = run(cfg, secs(5), 1).unwrap();
    let r = flow_rate(&t, 0, 0);
    let mut ups = vec![];
    for w in r.windows(2) {
        if w[0].1 < 25e6 && w[1].1 >= 25e6 {
            ups.push(w[1].0 as f64 / 1000.0);
        }
    }
    assert!(ups.len() >= 3, "{ups:?}");
    let periods: Vec<f64> = ups.windows(2).take(3).map(|w| w[1] - w[0]).collect();
    let p = mean(&periods).unwrap();
    let want = probe_period(0.0004);
    assert!((p / want - 1.0).abs() < 0.1, "period {p} want {want} {ups:?}");
}

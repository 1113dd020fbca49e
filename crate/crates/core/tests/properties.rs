use std::collections::{BTreeMap, BTreeSet};

use confucius_core::cca::CcaKind;
use confucius_core::link::{CapacityProfile, Link};
use confucius_core::metrics::{jfi, stall_duration, FrameDelaySeries};
use confucius_core::packet::{FlowId, Packet};
use confucius_core::sched::confucius::{compute_flow_weight, intra_decision, NEW, WEIGHT_ONE};
use confucius_core::sched::{Confucius, ConfuciusConfig, Scheduler, SchedulerKind, SchedulerSpec};
use confucius_core::sim::{run, HopSpec, SimConfig};
use confucius_core::source::{spawn_web_page, FlowSpec};
use confucius_core::{ms, MTU};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Enqueue { flow: u32, size: u32 },
    Dequeue(u8),
    Advance(u32),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0u32..12, 64u32..=1500).prop_map(|(flow, size)| Op::Enqueue { flow, size }),
        3 => (1u8..6).prop_map(Op::Dequeue),
        1 => (1u32..120_000).prop_map(Op::Advance),
    ]
}

fn partition_holds(c: &Confucius) -> bool {
    let live: BTreeSet<FlowId> = c.live_flows().collect();
    let mut seen = BTreeSet::new();
    for q in 0..c.num_queues() {
        for f in c.members(q) {
            if !seen.insert(f) {
                return false;
            }
        }
    }
    seen == live
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn confucius_structure(ops in prop::collection::vec(op(), 1..400), limit in 6_000u64..200_000) {
        let cfg = ConfuciusConfig { idle_timeout_ms: 1e9, ..ConfuciusConfig::default() };
        let mut c = Confucius::new(cfg, limit).unwrap();
        let mut now = 0u64;
        let mut next_seq: BTreeMap<u32, u64> = BTreeMap::new();
        let mut last_out: BTreeMap<FlowId, u64> = BTreeMap::new();
        let mut arrival: BTreeMap<FlowId, u64> = BTreeMap::new();
        let mut weight: BTreeMap<FlowId, u32> = BTreeMap::new();
        let mut outstanding: BTreeMap<(FlowId, u64), u32> = BTreeMap::new();
        let (mut admitted_bytes, mut gone_bytes) = (0u64, 0u64);
        for o in ops {
            match o {
                Op::Enqueue { flow, size } => {
                    let s = next_seq.entry(flow).or_default();
                    let p = Packet::new(FlowId(flow), *s, size, now);
                    *s += 1;
                    arrival.entry(FlowId(flow)).or_insert(now);
                    outstanding.insert((FlowId(flow), p.seq), size);
                    admitted_bytes += size as u64;
                    c.enqueue(p, now);
                }
                Op::Dequeue(n) => {
                    for _ in 0..n {
                        let Some(p) = c.dequeue(now) else { break };
                        if let Some(&prev) = last_out.get(&p.flow) {
                            prop_assert!(p.seq > prev, "flow {:?} seq {} after {}", p.flow, p.seq, prev);
                        }
                        last_out.insert(p.flow, p.seq);
                        prop_assert!(outstanding.remove(&(p.flow, p.seq)).is_some());
                        gone_bytes += p.size as u64;
                    }
                }
                Op::Advance(dt) => {
                    now += dt as u64;
                    c.poll(now);
                }
            }
            for p in c.take_drops() {
                prop_assert!(outstanding.remove(&(p.flow, p.seq)).is_some());
                gone_bytes += p.size as u64;
            }
            prop_assert!(c.len_bytes() <= limit);
            prop_assert_eq!(admitted_bytes - gone_bytes, c.len_bytes());
            prop_assert!(partition_holds(&c));
            for f in c.live_flows().collect::<Vec<_>>() {
                let w = c.flow_weight(f).unwrap();
                // Arrivals at the current instant still share one snapshot.
                if arrival[&f] == now {
                    continue;
                }
                if let Some(&prev) = weight.get(&f) {
                    prop_assert!(w >= prev, "weight of {:?} fell {} -> {}", f, prev, w);
                    if prev == WEIGHT_ONE {
                        prop_assert_eq!(w, WEIGHT_ONE);
                    }
                }
                weight.insert(f, w);
                let in_new = c.flow_queue(f) == Some(NEW);
                if w < WEIGHT_ONE {
                    prop_assert!(in_new, "{:?} left NEW at weight {}", f, w);
                } else if in_new {
                    // Only before the flow's first reweight tick.
                    prop_assert!(now <= arrival[&f], "{:?} still NEW at full weight", f);
                }
            }
        }
    }

    #[test]
    fn hysteresis_dead_zone(n in 1usize..64, alpha in 0.001f64..0.49, u in -0.999f64..0.999) {
        let fair = 1.0 / n as f64;
        prop_assert_eq!(intra_decision(fair, n, alpha), None);
        prop_assert_eq!(intra_decision(fair + u * alpha, n, alpha), None);
    }

    #[test]
    fn weight_grows_with_age(a in 0.0f64..5000.0, b in 0.0f64..5000.0, f in 0.001f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(compute_flow_weight(lo, f, 0.004) <= compute_flow_weight(hi, f, 0.004));
        prop_assert!(compute_flow_weight(hi, f, 0.004) <= 1.0);
    }

    #[test]
    fn dwrr_tracks_weight_ratio(k in 2u32..16, s_old in 64u32..=1500, s_new in 64u32..=1500, pulls in 200usize..4000) {
        // One graduated flow in Q1 against k simultaneous newcomers held in NEW.
        let mut c = Confucius::new(ConfuciusConfig::default(), u64::MAX / 4).unwrap();
        c.enqueue(Packet::new(FlowId(0), 0, s_old, 0), 0);
        c.poll(1);
        let backlog = 5000;
        for s in 1..backlog {
            c.enqueue(Packet::new(FlowId(0), s, s_old, 2), 2);
        }
        for f in 1..=k {
            for s in 0..backlog {
                c.enqueue(Packet::new(FlowId(f), s, s_new, 2), 2);
            }
        }
        let w_new: u32 = (1..=k).map(|f| c.flow_weight(FlowId(f)).unwrap()).sum();
        prop_assert_eq!(c.queue_weight(NEW), w_new);
        let w_old = WEIGHT_ONE;
        let mut got = [0u64; 2];
        for _ in 0..pulls {
            let p = c.dequeue(3).unwrap();
            got[(p.flow.0 != 0) as usize] += p.size as u64;
        }
        // Independent tally: textbook DWRR over two saturated queues.
        let weights = [w_old as u64, w_new as u64];
        let heads = [s_old as u64, s_new as u64];
        let mut want = [0u64; 2];
        let mut deficit = [0u64; 2];
        let mut taken = 0;
        'outer: loop {
            for q in [1usize, 0] {
                deficit[q] += MTU as u64 * weights[q];
                while deficit[q] >= heads[q] * 128 {
                    deficit[q] -= heads[q] * 128;
                    want[q] += heads[q];
                    taken += 1;
                    if taken == pulls {
                        break 'outer;
                    }
                }
            }
        }
        let quantum = MTU as f64;
        let share = w_old as f64 / (w_old + w_new) as f64;
        let total = (got[0] + got[1]) as f64;
        prop_assert!((got[0] as f64 - total * share).abs() <= 2.0 * quantum, "got {:?} w {}/{}", got, w_old, w_new);
        let total_w = (want[0] + want[1]) as f64;
        prop_assert!((want[0] as f64 - total_w * share).abs() <= 2.0 * quantum, "oracle {:?}", want);
    }

    #[test]
    fn jfi_scale_invariant(xs in prop::collection::vec(0.0f64..1e9, 1..20), s in 1e-3f64..1e3) {
        prop_assume!(xs.iter().any(|&x| x > 0.0));
        let a = jfi(&xs).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| x * s).collect();
        let b = jfi(&scaled).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a > 0.0 && a <= 1.0 + 1e-12);
    }

    #[test]
    fn stall_monotone_in_threshold(delays in prop::collection::vec(0.0f64..1000.0, 1..200), t1 in 0.0f64..1000.0, t2 in 0.0f64..1000.0) {
        let interval = 1000.0 / 30.0;
        let s = FrameDelaySeries {
            interval_ms: interval,
            points: delays.iter().enumerate().map(|(i, &d)| (i as f64 * interval, d)).collect(),
        };
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(stall_duration(&s, hi) <= stall_duration(&s, lo));
    }
}

fn scenario() -> impl Strategy<Value = (SimConfig, u64)> {
    let kinds = prop::sample::select(SchedulerKind::ALL.to_vec());
    let ccas = prop::sample::select(vec![CcaKind::Fluid, CcaKind::Cubic, CcaKind::Copa, CcaKind::Gcc, CcaKind::Bbr]);
    (
        kinds,
        prop::collection::vec((ccas, 0u64..500, any::<bool>()), 1..4),
        prop::collection::vec(100u64..60_000, 0..12),
        2e6f64..40e6,
        10u64..120,
        any::<u64>(),
    )
        .prop_map(|(kind, long, page, bps, rtt, seed)| {
            let mut flows: Vec<FlowSpec> = long
                .into_iter()
                .map(|(cca, start, video)| {
                    if video {
                        FlowSpec::video(cca, 30, ms(start))
                    } else {
                        FlowSpec::bulk(cca, ms(start))
                    }
                })
                .collect();
            if !page.is_empty() {
                flows.extend(spawn_web_page(&page, 300.0, 0).unwrap());
            }
            let hop = HopSpec {
                link: Link::new(CapacityProfile::constant(bps), ms(rtt)),
                scheduler: SchedulerSpec::new(kind),
            };
            (SimConfig::new(vec![hop], flows), seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn simulation_conserves_and_stays_busy((cfg, seed) in scenario()) {
        let t = run(cfg, ms(1500), seed).unwrap();
        let c = t.counters;
        prop_assert_eq!(c.sent, c.delivered + c.dropped + c.in_network);
        prop_assert!(t.idle_violations.is_empty(), "{:?}", &t.idle_violations[..t.idle_violations.len().min(5)]);
        for f in &t.flows {
            prop_assert!(f.delivered_bytes <= f.sent_bytes);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn confucius_ignores_labels((mut cfg, seed) in scenario()) {
        cfg.hops[0].scheduler = SchedulerSpec::new(SchedulerKind::Confucius);
        let a = run(cfg.clone(), ms(1500), seed).unwrap();
        cfg.strip_labels = true;
        let b = run(cfg, ms(1500), seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

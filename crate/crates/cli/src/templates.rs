//! Canonical experiment set-ups at desk scale.
//!
//! | name             | link                                   | traffic                                         | run  |
//! |------------------|----------------------------------------|-------------------------------------------------|------|
//! | website_compete  | synthetic trace, mean 25 Mbps, 40 ms   | COPA video; generated pages at 10 s and 63 s    | 80 s |
//! | sweep_n          | 25 Mbps, 40 ms                         | FLUID video; N x 15 KB page at 10 s             | 20 s |
//! | sweep_size       | 25 Mbps, 40 ms                         | FLUID video; 5 x B page at 10 s                 | 60 s |
//! | four_cca         | 25 Mbps, 40 ms                         | CUBIC, BBR, COPA, GCC bulk flows                | 100 s|
//! | abrf_sweep       | 25 Mbps cut to 25/f at 10 s, 40 ms     | one video flow, FIFO                            | 40 s |
//! | probing          | 25 Mbps, RTT 20..160 ms                | one BBR bulk flow                               | 40 s |
//! | multi_bottleneck | A -> B -> C, 10+20+10 ms; 20 Mbps at A or C, 100 otherwise | FLUID video; 50 x 15 KB page at 10 s | 30 s |
//! | multi_video      | 25 Mbps, 40 ms                         | k FLUID videos; 50 x 15 KB pages at 10 s, 20 s  | 30 s |

use confucius_core::cca::CcaKind;
use confucius_core::sched::SchedulerKind;

use crate::error::{config, Result};
use crate::scenario::{BulkSection, LinkSection, PageSection, Scenario, VideoSection};
use crate::traces::SyntheticTrace;

pub const NAMES: [&str; 8] = [
    "website_compete",
    "sweep_n",
    "sweep_size",
    "four_cca",
    "abrf_sweep",
    "probing",
    "multi_bottleneck",
    "multi_video",
];

pub const CAPACITY_MBPS: f64 = 25.0;
pub const RTT_MS: f64 = 40.0;
pub const WEB_FLOW_BYTES: u64 = 15_000;
/// Inter-page gap of the website competition run.
pub const PAGE_GAP_MS: f64 = 53_000.0;
pub const SWEEP_N: [usize; 7] = [5, 10, 20, 40, 60, 80, 100];
pub const SWEEP_SIZE: [u64; 6] = [15_000, 100_000, 500_000, 1_000_000, 3_000_000, 9_000_000];
pub const SWEEP_SIZE_FLOWS: usize = 5;
pub const ABRF_FACTORS: [u32; 4] = [2, 4, 8, 16];
pub const ABRF_CUT_MS: f64 = 10_000.0;
pub const ABRF_STAGE_MS: f64 = 250.0;
pub const ABRF_CCAS: [CcaKind; 4] = [CcaKind::Fluid, CcaKind::Copa, CcaKind::Gcc, CcaKind::Bbr];
pub const PROBING_RTTS: [f64; 5] = [20.0, 40.0, 80.0, 120.0, 160.0];
pub const MULTI_VIDEO_PAGE_FLOWS: usize = 50;
pub const FOUR_CCAS: [CcaKind; 4] = [CcaKind::Cubic, CcaKind::Bbr, CcaKind::Copa, CcaKind::Gcc];

fn base(name: &str, secs: f64, scheduler: SchedulerKind) -> Scenario {
    Scenario::new(name, secs, scheduler, LinkSection::constant(CAPACITY_MBPS, RTT_MS))
}

pub fn website_compete(trace_seed: u64) -> Scenario {
    let link = LinkSection {
        capacity_mbps: None,
        synthetic: Some(SyntheticTrace::new(CAPACITY_MBPS, trace_seed)),
        ..LinkSection::constant(CAPACITY_MBPS, RTT_MS)
    };
    let mut s = Scenario::new("website_compete", 80.0, SchedulerKind::Confucius, link);
    s.video.push(VideoSection::new(CcaKind::Copa));
    s.pages.push(PageSection::generated(10_000.0, 2 * trace_seed - 1));
    s.pages.push(PageSection::generated(10_000.0 + PAGE_GAP_MS, 2 * trace_seed));
    s
}

pub fn sweep_n(n: usize) -> Scenario {
    let mut s = base("sweep_n", 20.0, SchedulerKind::Confucius);
    s.video.push(VideoSection::new(CcaKind::Fluid));
    s.pages.push(PageSection::uniform(10_000.0, n, WEB_FLOW_BYTES));
    s
}

pub fn sweep_size(bytes: u64) -> Scenario {
    let mut s = base("sweep_size", 60.0, SchedulerKind::Confucius);
    s.video.push(VideoSection::new(CcaKind::Fluid));
    s.pages.push(PageSection::uniform(10_000.0, SWEEP_SIZE_FLOWS, bytes));
    s
}

pub fn four_cca() -> Scenario {
    let mut s = base("four_cca", 100.0, SchedulerKind::Confucius);
    s.bulk = FOUR_CCAS.iter().map(|&c| BulkSection::new(c)).collect();
    s
}

/// Capacity drops by `factor` at 10 s, at once or by halving every 250 ms.
pub fn abrf(cca: CcaKind, factor: u32, staged: bool) -> Scenario {
    let c = CAPACITY_MBPS;
    let steps = if staged {
        let n = factor.max(1).ilog2();
        let mut v = vec![(0.0, c)];
        v.extend((0..n).map(|i| (ABRF_CUT_MS + ABRF_STAGE_MS * i as f64, c / 2f64.powi(i as i32 + 1))));
        v
    } else {
        vec![(0.0, c), (ABRF_CUT_MS, c / factor as f64)]
    };
    let link = LinkSection { capacity_mbps: None, steps: Some(steps), ..LinkSection::constant(c, RTT_MS) };
    let mut s = Scenario::new("abrf_sweep", 40.0, SchedulerKind::Fifo, link);
    s.video.push(VideoSection::new(cca));
    s
}

pub fn probing(rtt_ms: f64) -> Scenario {
    let mut s = Scenario::new("probing", 40.0, SchedulerKind::Confucius, LinkSection::constant(CAPACITY_MBPS, rtt_ms));
    s.bulk.push(BulkSection::new(CcaKind::Bbr));
    s
}

/// Where the limited link sits relative to the managed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bottleneck {
    /// Link A, before the managed link.
    Before,
    /// Link C, after the managed link.
    After,
}

pub const BOTTLENECK_MBPS: f64 = 20.0;
pub const FAST_MBPS: f64 = 100.0;

/// Links A, B, C in series. B runs the scenario scheduler, A and C run FIFO;
/// one of A and C is limited to 20 Mbps, the other two carry 100 Mbps.
pub fn multi_bottleneck(at: Bottleneck) -> Scenario {
    // Buffers hold twice each link's BDP over the end-to-end RTT.
    let bdp2 = |mbps: f64| (2.0 * mbps * 1e6 * RTT_MS / 8e3) as u64;
    let hop = |mbps: f64, rtt: f64, sched: Option<SchedulerKind>| LinkSection {
        buffer_bytes: Some(bdp2(mbps)),
        scheduler: sched,
        ..LinkSection::constant(mbps, rtt)
    };
    let (a, c) = match at {
        Bottleneck::Before => (BOTTLENECK_MBPS, FAST_MBPS),
        Bottleneck::After => (FAST_MBPS, BOTTLENECK_MBPS),
    };
    let mut s = base("multi_bottleneck", 30.0, SchedulerKind::Confucius);
    s.links = vec![
        hop(a, 10.0, Some(SchedulerKind::Fifo)),
        hop(FAST_MBPS, 20.0, None),
        hop(c, 10.0, Some(SchedulerKind::Fifo)),
    ];
    s.video.push(VideoSection::new(CcaKind::Fluid));
    s.pages.push(PageSection::uniform(10_000.0, 50, WEB_FLOW_BYTES));
    s
}

pub fn multi_video(k: usize, with_pages: bool) -> Scenario {
    let mut s = base("multi_video", 30.0, SchedulerKind::Confucius);
    s.video = (0..k).map(|_| VideoSection::new(CcaKind::Fluid)).collect();
    if with_pages {
        for t in [10_000.0, 20_000.0] {
            s.pages.push(PageSection::uniform(t, MULTI_VIDEO_PAGE_FLOWS, WEB_FLOW_BYTES));
        }
    }
    s
}

pub fn template(name: &str) -> Result<Scenario> {
    Ok(match name {
        "website_compete" => website_compete(1),
        "sweep_n" => sweep_n(20),
        "sweep_size" => sweep_size(1_000_000),
        "four_cca" => four_cca(),
        "abrf_sweep" => abrf(CcaKind::Fluid, 8, false),
        "probing" => probing(RTT_MS),
        "multi_bottleneck" => multi_bottleneck(Bottleneck::After),
        "multi_video" => multi_video(1, true),
        _ => return config(format!("unknown template `{name}` (known: {})", NAMES.join(", "))),
    })
}

/// The parameter grid each template is swept over, labelled.
pub fn variants(name: &str) -> Result<Vec<(String, Scenario)>> {
    Ok(match name {
        "website_compete" => (1..=5).map(|s| (format!("trace{s}"), website_compete(s))).collect(),
        "sweep_n" => SWEEP_N.iter().map(|&n| (format!("n{n}"), sweep_n(n))).collect(),
        "sweep_size" => SWEEP_SIZE.iter().map(|&b| (format!("b{b}"), sweep_size(b))).collect(),
        "four_cca" => [SchedulerKind::Confucius, SchedulerKind::Fq, SchedulerKind::Fifo]
            .iter()
            .map(|&k| {
                let mut s = four_cca();
                s.scheduler = k;
                (k.name().to_string(), s)
            })
            .collect(),
        "abrf_sweep" => {
            let mut v = Vec::new();
            for cca in ABRF_CCAS {
                for f in ABRF_FACTORS {
                    for staged in [false, true] {
                        let tag = if staged { "staged" } else { "oneshot" };
                        v.push((format!("{}_f{f}_{tag}", cca.name()), abrf(cca, f, staged)));
                    }
                }
            }
            v
        }
        "probing" => PROBING_RTTS.iter().map(|&r| (format!("rtt{r}"), probing(r))).collect(),
        "multi_bottleneck" => {
            let mut v = Vec::new();
            for (tag, at) in [("a", Bottleneck::Before), ("c", Bottleneck::After)] {
                for k in [SchedulerKind::Confucius, SchedulerKind::Fifo] {
                    let mut s = multi_bottleneck(at);
                    s.scheduler = k;
                    v.push((format!("btlnk_{tag}_{}", k.name()), s));
                }
            }
            v
        }
        "multi_video" => (1..=5)
            .flat_map(|k| [(format!("k{k}"), multi_video(k, true)), (format!("k{k}_nopages"), multi_video(k, false))])
            .collect(),
        _ => return config(format!("unknown template `{name}`")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn every_template_builds() {
        for name in NAMES {
            let s = template(name).unwrap();
            assert_eq!(s.name, name);
            s.build(Path::new(".")).unwrap();
            for (_, v) in variants(name).unwrap() {
                v.build(Path::new(".")).unwrap();
            }
        }
        assert!(template("nope").is_err());
    }

    #[test]
    fn sweep_grids() {
        let n: Vec<usize> = variants("sweep_n").unwrap().iter().map(|v| v.1.pages[0].count.unwrap()).collect();
        assert_eq!(n, vec![5, 10, 20, 40, 60, 80, 100]);
        for (_, v) in variants("sweep_n").unwrap() {
            assert_eq!(v.pages[0].size_bytes, Some(15_000));
        }
        let s = variants("sweep_size").unwrap();
        assert_eq!(s.first().unwrap().1.pages[0].size_bytes, Some(15_000));
        assert_eq!(s.last().unwrap().1.pages[0].size_bytes, Some(9_000_000));
        assert!(s.iter().all(|v| v.1.pages[0].count == Some(5)));
    }

    #[test]
    fn abrf_profiles() {
        let cfg = abrf(CcaKind::Fluid, 16, true).build(Path::new(".")).unwrap();
        let segs = cfg.hops[0].link.profile.segments().to_vec();
        assert_eq!(segs.len(), 5);
        assert_eq!(segs[4], (10_750_000, 25e6 / 16.0));
        let cfg = abrf(CcaKind::Fluid, 16, false).build(Path::new(".")).unwrap();
        assert_eq!(cfg.hops[0].link.profile.segments(), &[(0, 25e6), (10_000_000, 25e6 / 16.0)]);
        assert_eq!(variants("abrf_sweep").unwrap().len(), 32);
    }

    #[test]
    fn website_pages_are_a_gap_apart() {
        let s = website_compete(1);
        assert_eq!(s.pages[1].start_ms - s.pages[0].start_ms, 53_000.0);
    }
}

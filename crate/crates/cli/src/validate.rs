//! Acceptance checks shared by `confucius validate` and the acceptance test target.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use confucius_core::cca::CcaKind;
use confucius_core::fluid::{
    evaluate, fit_responsiveness, qmax_confucius_series, qmax_confucius_simplified, FluidParams,
    Policy,
};
use confucius_core::link::{CapacityProfile, Link};
use confucius_core::metrics::{mean, RunReport};
use confucius_core::packet::{FlowId, Packet};
use confucius_core::sched::confucius::{intra_decision, NEW, WEIGHT_ONE};
use confucius_core::sched::{Confucius, ConfuciusConfig, Scheduler, SchedulerKind, SchedulerSpec};
use confucius_core::sim::{run, HopSpec, SimConfig, SimTrace};
use confucius_core::source::{spawn_web_page, FlowSpec};
use confucius_core::{ms, MTU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::commands::simulate;
use crate::error::Result;
use crate::scenario::Scenario;
use crate::templates::{self, Bottleneck, ABRF_CCAS, ABRF_FACTORS, PROBING_RTTS, SWEEP_N, SWEEP_SIZE};

pub const FRAME_INTERVAL_MS: f64 = 1000.0 / 30.0;
pub const STRUCTURAL_CASES: usize = 1000;
pub const IDS: [u32; 14] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14];

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Empty means every criterion.
    pub only: Vec<u32>,
    /// Applied to every simulated scenario the checks build.
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: u32,
    pub title: &'static str,
    pub subs: Vec<SubCheck>,
    pub elapsed: Duration,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.subs.iter().all(|s| s.passed)
    }

    /// `criterion N PASS|FAIL title: sub [ok|FAIL] detail; ...`
    pub fn line(&self) -> String {
        let subs: Vec<String> = self
            .subs
            .iter()
            .map(|s| format!("{} [{}] {}", s.name, if s.passed { "ok" } else { "FAIL" }, s.detail))
            .collect();
        format!(
            "criterion {:>2} {} {} ({:.1} s): {}",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64(),
            subs.join("; ")
        )
    }
}

fn sub(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> SubCheck {
    SubCheck { name: name.into(), passed, detail: detail.into() }
}

pub fn title(id: u32) -> &'static str {
    match id {
        1 => "fluid oracle agreement",
        2 => "worked-example peak delay",
        3 => "responsiveness fit",
        4 => "scaling with page size N",
        5 => "FCT penalty bound",
        6 => "bandwidth reduction response",
        7 => "classification convergence",
        8 => "fairness",
        9 => "label blindness",
        10 => "structural properties",
        11 => "probing robustness",
        12 => "non-bottleneck neutrality",
        13 => "multiple real-time flows",
        14 => "determinism and budget",
        _ => "unknown",
    }
}

pub fn table(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&r.line());
        s.push('\n');
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    s.push_str(&format!("{} of {} criteria passed\n", results.len() - failed, results.len()));
    s
}

/// Memoized simulation runs shared between checks within one suite.
pub struct Suite {
    opts: Options,
    cache: Mutex<HashMap<(String, u64), Arc<Outcome>>>,
    started: Instant,
}

pub struct Outcome {
    pub report: RunReport,
    pub trace: SimTrace,
}

impl Suite {
    pub fn new(opts: Options) -> Self {
        Self { opts, cache: Mutex::new(HashMap::new()), started: Instant::now() }
    }

    /// Applies the suite overrides to a check scenario.
    pub fn prepare(&self, s: &Scenario) -> Result<Scenario> {
        s.with_overrides(&self.opts.overrides)
    }

    pub fn run(&self, s: &Scenario, seed: u64) -> Result<Arc<Outcome>> {
        let s = self.prepare(s)?;
        let key = (s.to_toml(), seed);
        if let Some(o) = self.cache.lock().unwrap().get(&key) {
            return Ok(o.clone());
        }
        let r = simulate(&s, Path::new("."), seed)?;
        let o = Arc::new(Outcome { report: r.report, trace: r.trace });
        self.cache.lock().unwrap().insert(key, o.clone());
        Ok(o)
    }

    /// Runs every scenario in parallel; results keep the input order.
    pub fn run_all(&self, jobs: &[(Scenario, u64)]) -> Result<Vec<Arc<Outcome>>> {
        jobs.par_iter().map(|(s, seed)| self.run(s, *seed)).collect()
    }

    pub fn check(&self, id: u32) -> Result<CheckResult> {
        let t = Instant::now();
        let subs = match id {
            1 => c1_fluid_grid(),
            2 => c2_worked_example(),
            3 => c3_fit(),
            4 => self.c4_scaling()?,
            5 => self.c5_fct()?,
            6 => self.c6_abrf()?,
            7 => self.c7_classification()?,
            8 => self.c8_fairness()?,
            9 => self.c9_labels()?,
            10 => c10_structural(STRUCTURAL_CASES),
            11 => self.c11_probing()?,
            12 => self.c12_neutrality()?,
            13 => self.c13_multi_video()?,
            14 => self.c14_determinism()?,
            _ => return crate::error::config(format!("no criterion {id}")),
        };
        Ok(CheckResult { id, title: title(id), subs, elapsed: t.elapsed() })
    }
}

pub fn run_suite(opts: &Options) -> Result<Vec<CheckResult>> {
    let ids: Vec<u32> = if opts.only.is_empty() { IDS.to_vec() } else { opts.only.clone() };
    for id in &ids {
        if !IDS.contains(id) {
            return crate::error::config(format!("no criterion {id} (known: 1-14)"));
        }
    }
    let suite = Suite::new(opts.clone());
    ids.iter().map(|&id| suite.check(id)).collect()
}

// ---- fluid-model criteria ----

pub fn fluid_grid() -> Vec<FluidParams> {
    let mut v = Vec::new();
    for k in [0.0004, 0.001] {
        for q0 in [1.0, 5.0, 10.0] {
            for tau in [20.0, 40.0] {
                for n in [2u32, 9, 50] {
                    v.push(FluidParams { k, q0, tau, n, lambda: 0.004, ..FluidParams::default() });
                }
            }
        }
    }
    v
}

fn c1_fluid_grid() -> Vec<SubCheck> {
    let t = Instant::now();
    let grid = fluid_grid();
    let cells: Vec<(FluidParams, [(f64, f64); 4])> = grid
        .par_iter()
        .map(|p| {
            let mut out = [(0.0, 0.0); 4];
            for (i, pol) in Policy::ALL.iter().enumerate() {
                let b = evaluate(*pol, p).expect("grid parameters are valid");
                out[i] = (b.q_max_closed, b.q_max_integrated);
            }
            (*p, out)
        })
        .collect();
    let elapsed = t.elapsed().as_secs_f64();
    let n = cells.len();
    let mut subs = Vec::new();
    for (i, pol) in Policy::ALL.iter().enumerate() {
        let errs: Vec<f64> = cells.iter().map(|c| (c.1[i].0 - c.1[i].1).abs() / c.1[i].1).collect();
        let ok = errs.iter().filter(|&&e| e <= 0.25).count();
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        subs.push(sub(format!("{} within 25%", pol.name()), ok == n, format!("{ok}/{n} cells, worst {:.0}%", worst * 100.0)));
    }
    let fifo = Policy::ALL.iter().position(|p| *p == Policy::Fifo).unwrap();
    let dir = cells.iter().filter(|c| c.1[fifo].0 <= c.1[fifo].1).count();
    subs.push(sub("fifo lower bound", dir == n, format!("closed <= integrated in {dir}/{n} cells")));
    let conf = Policy::ALL.iter().position(|p| *p == Policy::Confucius).unwrap();
    let chain = cells
        .iter()
        .filter(|c| {
            let simp = qmax_confucius_simplified(&c.0);
            let series = qmax_confucius_series(&c.0);
            simp >= series && series >= c.1[conf].1
        })
        .count();
    subs.push(sub("confucius upper bound", chain == n, format!("simplified >= series >= integrated in {chain}/{n} cells")));
    subs.push(sub("runtime", elapsed < 60.0, format!("{elapsed:.1} s")));
    subs
}

fn c2_worked_example() -> Vec<SubCheck> {
    let (lo, hi) = (640.0 * 0.9, 640.0 * 1.1);
    let mut subs = Vec::new();
    for (name, f) in [
        ("series", qmax_confucius_series as fn(&FluidParams) -> f64),
        ("simplified", qmax_confucius_simplified),
    ] {
        let vals: Vec<f64> = [1.0, 2.0]
            .iter()
            .map(|&q0| f(&FluidParams { k: 0.001, tau: 40.0, q0, lambda: 0.004, ..FluidParams::default() }))
            .collect();
        let ok = vals.iter().all(|v| (lo..=hi).contains(v));
        subs.push(sub(name, ok, format!("q0=1,2 -> {:.1}, {:.1} ms (want {lo:.0}-{hi:.0})", vals[0], vals[1])));
    }
    subs
}

fn c3_fit() -> Vec<SubCheck> {
    [("copa 5 RTT", 200.0, 0.001), ("bbr 8 RTT", 320.0, 0.0004)]
        .iter()
        .map(|&(name, period, want)| {
            let k = fit_responsiveness(period).expect("positive period");
            let err = (k - want).abs() / want;
            sub(name, err <= 0.02, format!("k={k:.6} vs {want} ({:.1}% off)", err * 100.0))
        })
        .collect()
}

// ---- simulation criteria ----

fn with_scheduler(mut s: Scenario, k: SchedulerKind) -> Scenario {
    s.scheduler = k;
    s
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.0}")).collect::<Vec<_>>().join("/")
}

/// Mean completion time of page 0's flows; `None` if any of them did not finish.
fn page_mean_fct(r: &RunReport) -> Option<f64> {
    let fcts: Vec<Option<f64>> = r.flows.iter().filter(|f| f.kind == "web").map(|f| f.fct_ms).collect();
    if fcts.is_empty() || fcts.iter().any(Option::is_none) {
        return None;
    }
    mean(&fcts.into_iter().flatten().collect::<Vec<_>>())
}

impl Suite {
    fn sweep_n_runs(&self, k: SchedulerKind, ns: &[usize]) -> Result<Vec<Arc<Outcome>>> {
        let jobs: Vec<(Scenario, u64)> = ns.iter().map(|&n| (with_scheduler(templates::sweep_n(n), k), 1)).collect();
        self.run_all(&jobs)
    }

    fn c4_scaling(&self) -> Result<Vec<SubCheck>> {
        let t = Instant::now();
        let fq = self.sweep_n_runs(SchedulerKind::Fq, &SWEEP_N)?;
        let conf = self.sweep_n_runs(SchedulerKind::Confucius, &SWEEP_N)?;
        let fq_extra = self.sweep_n_runs(SchedulerKind::Fq, &[10, 50])?;
        let stall = |v: &[Arc<Outcome>]| v.iter().map(|o| o.report.stall_ms).collect::<Vec<_>>();
        let (sf, sc) = (stall(&fq), stall(&conf));
        let mono = sf.windows(2).all(|w| w[1] >= w[0]) && sf.last() > sf.first();
        let ratio = fq_extra[1].report.max_frame_delay_ms / fq_extra[0].report.max_frame_delay_ms;
        let (lo, hi) = sc.iter().fold((f64::MAX, 0.0f64), |a, &x| (a.0.min(x), a.1.max(x)));
        let allowed = (0.10 * hi).max(FRAME_INTERVAL_MS);
        let elapsed = t.elapsed().as_secs_f64();
        Ok(vec![
            sub("fq stall grows with N", mono, format!("N=5..100 stall {} ms", fmt_list(&sf))),
            sub(
                "fq q_max(50)/q_max(10)",
                (3.5..=6.5).contains(&ratio),
                format!(
                    "max frame delay {:.1}/{:.1} ms = {ratio:.2}",
                    fq_extra[1].report.max_frame_delay_ms, fq_extra[0].report.max_frame_delay_ms
                ),
            ),
            sub(
                "confucius flat",
                hi - lo <= allowed + 1e-9,
                format!("stall {} ms, spread {:.1} <= {allowed:.1}", fmt_list(&sc), hi - lo),
            ),
            sub("runtime", elapsed < 300.0, format!("{elapsed:.1} s")),
        ])
    }

    fn c5_fct(&self) -> Result<Vec<SubCheck>> {
        let bound = confucius_core::fluid::fct_delta_confucius_bound(0.004);
        let mut cells: Vec<(String, Scenario, Option<u64>)> = Vec::new();
        for n in SWEEP_N {
            cells.push((format!("n{n}"), templates::sweep_n(n), None));
        }
        for b in SWEEP_SIZE {
            cells.push((format!("b{b}"), templates::sweep_size(b), Some(b)));
        }
        let mut jobs = Vec::new();
        for c in &cells {
            jobs.push((with_scheduler(c.1.clone(), SchedulerKind::Confucius), 1));
            jobs.push((with_scheduler(c.1.clone(), SchedulerKind::Fq), 1));
        }
        let out = self.run_all(&jobs)?;
        let (mut abs_ok, mut rel_ok, mut rel_n) = (true, true, 0);
        let mut detail = Vec::new();
        let mut rel_detail = Vec::new();
        for (i, (label, _, size)) in cells.iter().enumerate() {
            let (c, f) = (page_mean_fct(&out[2 * i].report), page_mean_fct(&out[2 * i + 1].report));
            let Some((c, f)) = c.zip(f) else {
                abs_ok = false;
                detail.push(format!("{label}: incomplete"));
                continue;
            };
            let d = c - f;
            abs_ok &= d <= bound;
            detail.push(format!("{label}:{d:.0}"));
            if size.is_some_and(|b| b >= 1_000_000) {
                rel_n += 1;
                let r = d / f;
                rel_ok &= r <= 0.10;
                rel_detail.push(format!("{label}:{:.1}%", r * 100.0));
            }
        }
        Ok(vec![
            sub("delta <= log2(e)/lambda", abs_ok, format!("{} ms vs {bound:.1}", detail.join(" "))),
            sub("relative <= 10% for B >= 1 MB", rel_ok && rel_n > 0, rel_detail.join(" ")),
        ])
    }

    fn c6_abrf(&self) -> Result<Vec<SubCheck>> {
        let mut jobs = Vec::new();
        for cca in ABRF_CCAS {
            for f in ABRF_FACTORS {
                for staged in [false, true] {
                    jobs.push((templates::abrf(cca, f, staged), 1));
                }
            }
        }
        let out = self.run_all(&jobs)?;
        let y = |c: usize, f: usize, staged: bool| out[c * 8 + f * 2 + staged as usize].report.stall_ms;
        let (mut super_n, mut env_n) = (0, 0);
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for (c, cca) in ABRF_CCAS.iter().enumerate() {
            let (y2, y16) = (y(c, 0, false), y(c, 3, false));
            let superlinear = if y2 > 0.0 { y16 / y2 > 8.0 } else { y16 > 0.0 };
            super_n += superlinear as usize;
            let one: Vec<f64> = (0..4).map(|f| y(c, f, false)).collect();
            d1.push(format!("{}:{}{}", cca.name(), fmt_list(&one), if superlinear { "" } else { "(x)" }));
            let (s2, s16) = (y(c, 0, true), y(c, 3, true));
            let env = 2.5 * (16f64.log2() / 2f64.log2()) * s2;
            let within = s16 <= env + 1e-9;
            env_n += within as usize;
            let st: Vec<f64> = (0..4).map(|f| y(c, f, true)).collect();
            d2.push(format!("{}:{}{}", cca.name(), fmt_list(&st), if within { "" } else { "(x)" }));
        }
        Ok(vec![
            sub("one-shot y16/y2 > 8", super_n >= 3, format!("{super_n}/4 [{}] ms", d1.join(" "))),
            sub("staged y16 <= 10 y2", env_n >= 3, format!("{env_n}/4 [{}] ms", d2.join(" "))),
        ])
    }

    fn c7_classification(&self) -> Result<Vec<SubCheck>> {
        let four = self.run(&templates::four_cca(), 1)?;
        let solo: Vec<Arc<Outcome>> = [CcaKind::Copa, CcaKind::Gcc]
            .par_iter()
            .map(|&c| {
                let mut s = templates::four_cca();
                s.name = format!("solo_{}", c.name());
                s.bulk.retain(|b| b.cca == c);
                self.run(&s, 1)
            })
            .collect::<Result<_>>()?;
        let a = assignment(&four.trace, &[3, 2, 1, 1], 10_000_000);
        let mut subs = vec![
            sub(
                "converges within 10 s",
                a.first_correct.is_some_and(|t| t <= 10_000_000),
                a.first_correct.map_or("never".into(), |t| format!("at {:.1} s", t as f64 / 1e6)),
            ),
            sub("holds >= 90%", a.hold >= 0.90, format!("{:.1}% of samples after 10 s", a.hold * 100.0)),
        ];
        for (i, (flow, solo)) in [(2u32, &solo[0]), (3u32, &solo[1])].iter().enumerate() {
            let solo_mean = window_queueing(&solo.trace, FlowId(0), 10_000_000, u64::MAX);
            let windows: Vec<f64> = (1..10u64)
                .map(|w| window_queueing(&four.trace, FlowId(*flow), w * 10_000_000, (w + 1) * 10_000_000))
                .collect();
            let worst = windows.iter().cloned().fold(0.0, f64::max);
            let name = if i == 0 { "copa" } else { "gcc" };
            subs.push(sub(
                format!("{name} delay < 2x solo"),
                worst < 2.0 * solo_mean,
                format!("worst 10 s window {worst:.2} ms vs solo {solo_mean:.2} ms"),
            ));
        }
        Ok(subs)
    }

    fn c8_fairness(&self) -> Result<Vec<SubCheck>> {
        let conf = self.run(&templates::four_cca(), 1)?;
        let fq = self.run(&with_scheduler(templates::four_cca(), SchedulerKind::Fq), 1)?;
        let (jc, jf) = (conf.report.jfi.unwrap_or(0.0), fq.report.jfi.unwrap_or(0.0));
        Ok(vec![
            sub("confucius >= 0.95", jc >= 0.95, format!("JFI {jc:.4}")),
            sub("fq >= 0.99", jf >= 0.99, format!("JFI {jf:.4}")),
        ])
    }

    fn c9_labels(&self) -> Result<Vec<SubCheck>> {
        let seeds: Vec<u64> = (1..=10).collect();
        let same: Vec<bool> = seeds
            .par_iter()
            .map(|&seed| {
                let s = with_scheduler(templates::website_compete(seed), SchedulerKind::Confucius);
                let mut stripped = s.clone();
                stripped.strip_labels = true;
                let a = self.run(&s, seed)?;
                let b = self.run(&stripped, seed)?;
                let ja = serde_json::to_vec(&a.report).expect("report serializes");
                let jb = serde_json::to_vec(&b.report).expect("report serializes");
                Ok(ja == jb)
            })
            .collect::<Result<_>>()?;
        let n = same.iter().filter(|&&x| x).count();
        Ok(vec![sub("identical reports", n == seeds.len(), format!("{n}/{} seeded scenarios", seeds.len()))])
    }

    fn c11_probing(&self) -> Result<Vec<SubCheck>> {
        let jobs: Vec<(Scenario, u64)> = PROBING_RTTS.iter().map(|&r| (templates::probing(r), 1)).collect();
        let out = self.run_all(&jobs)?;
        let moves: Vec<usize> = out.iter().map(|o| queue_moves(&o.trace, FlowId(0), 10_000_000)).collect();
        let queues: Vec<String> = out
            .iter()
            .map(|o| o.trace.classes.iter().filter(|c| c.1.flow == FlowId(0)).last().map_or("-".into(), |c| format!("Q{}", c.1.queue)))
            .collect();
        Ok(vec![sub(
            "no moves after 10 s",
            moves.iter().all(|&m| m == 0),
            format!(
                "RTT {} ms: moves {:?}, final {}",
                fmt_list(&PROBING_RTTS),
                moves,
                queues.join("/")
            ),
        )])
    }

    fn c12_neutrality(&self) -> Result<Vec<SubCheck>> {
        let mut subs = Vec::new();
        for (name, at) in [("bottleneck before", Bottleneck::Before), ("bottleneck after", Bottleneck::After)] {
            let jobs = [
                (with_scheduler(templates::multi_bottleneck(at), SchedulerKind::Confucius), 1),
                (with_scheduler(templates::multi_bottleneck(at), SchedulerKind::Fifo), 1),
            ];
            let out = self.run_all(&jobs)?;
            let (c, f) = (&out[0].report, &out[1].report);
            let rel = |a: f64, b: f64| if a.max(b) <= 1e-9 { 0.0 } else { (a - b).abs() / a.max(b) };
            let r = rel(c.stall_ms, f.stall_ms);
            let rm = rel(c.max_frame_delay_ms, f.max_frame_delay_ms);
            subs.push(sub(
                name,
                r < 0.05,
                format!(
                    "stall {:.1} vs {:.1} ms ({:.1}%), max frame delay {:.1} vs {:.1} ms ({:.1}%)",
                    c.stall_ms,
                    f.stall_ms,
                    r * 100.0,
                    c.max_frame_delay_ms,
                    f.max_frame_delay_ms,
                    rm * 100.0
                ),
            ));
        }
        Ok(subs)
    }

    fn c13_multi_video(&self) -> Result<Vec<SubCheck>> {
        let mut jobs = Vec::new();
        for k in 1..=5 {
            for sched in [SchedulerKind::Confucius, SchedulerKind::Fq] {
                for pages in [true, false] {
                    jobs.push((with_scheduler(templates::multi_video(k, pages), sched), 1));
                }
            }
        }
        let out = self.run_all(&jobs)?;
        let at = |k: usize, fq: bool, pages: bool| &out[(k - 1) * 4 + fq as usize * 2 + (!pages) as usize].report;
        let per_flow = |r: &RunReport| r.flows.iter().filter_map(|f| f.stall_ms).collect::<Vec<_>>();
        let single = at(1, false, true).stall_ms;
        let mut conf_ok = true;
        let mut worst: f64 = 0.0;
        for k in 1..=5 {
            for s in per_flow(at(k, false, true)) {
                conf_ok &= s <= 2.0 * single + 1e-9;
                worst = worst.max(s);
            }
        }
        let fq_with: Vec<f64> = (1..=5).map(|k| at(k, true, true).stall_ms).collect();
        let fq_without: Vec<f64> = (1..=5).map(|k| at(k, true, false).stall_ms).collect();
        let fq_ok = fq_with.iter().zip(&fq_without).all(|(w, wo)| w > wo);
        let conf_mean: Vec<f64> = (1..=5).map(|k| at(k, false, true).stall_ms).collect();
        Ok(vec![
            sub(
                "confucius per-flow <= 2x single",
                conf_ok,
                format!("single {single:.1} ms, worst flow {worst:.1} ms, means k=1..5 {}", fmt_list(&conf_mean)),
            ),
            sub(
                "fq grows with pages",
                fq_ok,
                format!("with pages {} vs without {} ms", fmt_list(&fq_with), fmt_list(&fq_without)),
            ),
        ])
    }

    fn c14_determinism(&self) -> Result<Vec<SubCheck>> {
        let jobs: Vec<Scenario> = templates::NAMES
            .iter()
            .map(|n| self.prepare(&templates::template(n).expect("known template")))
            .collect::<Result<_>>()?;
        let same: Vec<(String, bool)> = jobs
            .par_iter()
            .map(|s| {
                let a = simulate(s, Path::new("."), 7)?;
                let b = simulate(s, Path::new("."), 7)?;
                let ra = serde_json::to_vec(&a.report).expect("report serializes");
                let rb = serde_json::to_vec(&b.report).expect("report serializes");
                Ok((s.name.clone(), a.trace == b.trace && ra == rb))
            })
            .collect::<Result<_>>()?;
        let cached_same = self
            .cache
            .lock()
            .unwrap()
            .iter()
            .take(8)
            .map(|((toml, seed), o)| (Scenario::from_toml(toml).expect("cached scenario parses"), *seed, o.clone()))
            .collect::<Vec<_>>()
            .par_iter()
            .all(|(s, seed, o)| simulate(s, Path::new("."), *seed).is_ok_and(|r| r.trace == o.trace));
        let bad: Vec<&str> = same.iter().filter(|x| !x.1).map(|x| x.0.as_str()).collect();
        let total = self.started.elapsed().as_secs_f64();
        Ok(vec![
            sub(
                "bit-exact reruns",
                bad.is_empty() && cached_same,
                if bad.is_empty() { format!("{} templates twice each, cached runs repeat", same.len()) } else { format!("differs: {}", bad.join(",")) },
            ),
            sub("suite under 15 min", total < 900.0, format!("{total:.0} s so far")),
        ])
    }
}

pub struct Assignment {
    pub first_correct: Option<u64>,
    /// Fraction of examination instants after `from` with every flow in its wanted queue.
    pub hold: f64,
}

/// Tracks queue membership of flows `0..want.len()` at hop 0 through the class samples.
pub fn assignment(trace: &SimTrace, want: &[u8], from: u64) -> Assignment {
    let mut cur: BTreeMap<u32, u8> = BTreeMap::new();
    let (mut ok, mut n) = (0usize, 0usize);
    let mut first = None;
    let samples: Vec<_> = trace.classes.iter().filter(|c| c.0 == 0).map(|c| &c.1).collect();
    for (i, s) in samples.iter().enumerate() {
        cur.insert(s.flow.0, s.queue);
        let last_of_instant = samples.get(i + 1).is_none_or(|n| n.time != s.time);
        if !last_of_instant {
            continue;
        }
        let correct = want.iter().enumerate().all(|(f, q)| cur.get(&(f as u32)) == Some(q));
        if correct && first.is_none() {
            first = Some(s.time);
        }
        if s.time > from {
            n += 1;
            ok += correct as usize;
        }
    }
    Assignment { first_correct: first, hold: ok as f64 / n.max(1) as f64 }
}

/// Number of queue changes of `flow` at hop 0 strictly after `from`.
pub fn queue_moves(trace: &SimTrace, flow: FlowId, from: u64) -> usize {
    let mut last = None;
    let mut moves = 0;
    for (_, c) in trace.classes.iter().filter(|c| c.0 == 0 && c.1.flow == flow) {
        if let Some(q) = last {
            if q != c.queue && c.time > from {
                moves += 1;
            }
        }
        last = Some(c.queue);
    }
    moves
}

/// Mean queueing delay (ms) of packets of `flow` delivered in `[from, to)`.
pub fn window_queueing(trace: &SimTrace, flow: FlowId, from: u64, to: u64) -> f64 {
    let xs: Vec<f64> = trace
        .deliveries
        .iter()
        .filter(|d| d.flow == flow && d.delivered >= from && d.delivered < to)
        .map(|d| d.queued as f64 / 1000.0)
        .collect();
    mean(&xs).unwrap_or(0.0)
}

// ---- structural properties ----

fn c10_structural(cases: usize) -> Vec<SubCheck> {
    let results: Vec<(usize, std::result::Result<(), String>)> = (0..cases)
        .into_par_iter()
        .map(|i| (i, structural_case(i as u64)))
        .collect();
    let scheduler_fail: Vec<String> = results.iter().filter_map(|(i, r)| r.as_ref().err().map(|e| format!("case {i}: {e}"))).collect();
    let sims: Vec<(usize, std::result::Result<(), String>)> =
        (0..cases).into_par_iter().map(|i| (i, simulation_case(i as u64))).collect();
    let sim_fail: Vec<String> = sims.iter().filter_map(|(i, r)| r.as_ref().err().map(|e| format!("case {i}: {e}"))).collect();
    let hyst = (0..cases).all(|i| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4859_0000 + i as u64);
        let n = rng.random_range(1..64usize);
        let alpha = rng.random_range(0.001..0.49);
        let u = rng.random_range(-0.999..0.999);
        let fair = 1.0 / n as f64;
        intra_decision(fair, n, alpha).is_none() && intra_decision(fair + u * alpha, n, alpha).is_none()
    });
    let dwrr: Vec<String> = (0..cases).into_par_iter().filter_map(|i| dwrr_case(i as u64).err()).collect();
    let first = |v: &[String]| v.first().cloned().unwrap_or_default();
    vec![
        sub(
            "order/weights/partition/bytes",
            scheduler_fail.is_empty(),
            if scheduler_fail.is_empty() { format!("{cases} cases") } else { first(&scheduler_fail) },
        ),
        sub(
            "packet and work conservation",
            sim_fail.is_empty(),
            if sim_fail.is_empty() { format!("{cases} cases") } else { first(&sim_fail) },
        ),
        sub("hysteresis dead zone", hyst, format!("{cases} cases")),
        sub(
            "dwrr byte share",
            dwrr.is_empty(),
            if dwrr.is_empty() { format!("{cases} cases within one quantum") } else { first(&dwrr) },
        ),
    ]
}

/// Random enqueue/dequeue/advance against the scheduler's invariants.
pub fn structural_case(seed: u64) -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = rng.random_range(6_000u64..200_000);
    let cfg = ConfuciusConfig { idle_timeout_ms: 1e9, ..ConfuciusConfig::default() };
    let mut c = Confucius::new(cfg, limit).map_err(|e| e.to_string())?;
    let mut now = 0u64;
    let mut next_seq: BTreeMap<u32, u64> = BTreeMap::new();
    let mut last_out: BTreeMap<FlowId, u64> = BTreeMap::new();
    let mut arrival: BTreeMap<FlowId, u64> = BTreeMap::new();
    let mut weight: BTreeMap<FlowId, u32> = BTreeMap::new();
    let mut outstanding: BTreeSet<(FlowId, u64)> = BTreeSet::new();
    let (mut admitted, mut gone) = (0u64, 0u64);
    let ops = rng.random_range(1..400);
    for _ in 0..ops {
        match rng.random_range(0..8) {
            0..=3 => {
                let flow = rng.random_range(0u32..12);
                let size = rng.random_range(64u32..=1500);
                let s = next_seq.entry(flow).or_default();
                let p = Packet::new(FlowId(flow), *s, size, now);
                *s += 1;
                arrival.entry(FlowId(flow)).or_insert(now);
                outstanding.insert((FlowId(flow), p.seq));
                admitted += size as u64;
                c.enqueue(p, now);
            }
            4..=6 => {
                for _ in 0..rng.random_range(1..6) {
                    let Some(p) = c.dequeue(now) else { break };
                    if last_out.get(&p.flow).is_some_and(|&prev| p.seq <= prev) {
                        return Err(format!("{:?} reordered at seq {}", p.flow, p.seq));
                    }
                    last_out.insert(p.flow, p.seq);
                    if !outstanding.remove(&(p.flow, p.seq)) {
                        return Err("unknown packet dequeued".into());
                    }
                    gone += p.size as u64;
                }
            }
            _ => {
                now += rng.random_range(1u64..120_000);
                c.poll(now);
            }
        }
        for p in c.take_drops() {
            if !outstanding.remove(&(p.flow, p.seq)) {
                return Err("unknown packet dropped".into());
            }
            gone += p.size as u64;
        }
        if c.len_bytes() > limit || admitted - gone != c.len_bytes() {
            return Err(format!("byte accounting: queued {} admitted-gone {}", c.len_bytes(), admitted - gone));
        }
        let live: BTreeSet<FlowId> = c.live_flows().collect();
        let mut seen = BTreeSet::new();
        for q in 0..c.num_queues() {
            for f in c.members(q) {
                if !seen.insert(f) {
                    return Err(format!("{f:?} in two queues"));
                }
            }
        }
        if seen != live {
            return Err("queues do not partition the live flows".into());
        }
        for f in live {
            let w = c.flow_weight(f).unwrap_or(0);
            if arrival[&f] == now {
                continue;
            }
            if let Some(&prev) = weight.get(&f) {
                if w < prev || (prev == WEIGHT_ONE && w != WEIGHT_ONE) {
                    return Err(format!("weight of {f:?} went {prev} -> {w}"));
                }
            }
            weight.insert(f, w);
            let in_new = c.flow_queue(f) == Some(NEW);
            if w < WEIGHT_ONE && !in_new {
                return Err(format!("{f:?} left NEW at weight {w}"));
            }
            if w == WEIGHT_ONE && in_new && now > arrival[&f] {
                return Err(format!("{f:?} not graduated at full weight"));
            }
        }
    }
    Ok(())
}

/// A short random simulation: packets balance and no link idles with a backlog.
pub fn simulation_case(seed: u64) -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5349_4d00 ^ seed);
    let kind = SchedulerKind::ALL[rng.random_range(0..SchedulerKind::ALL.len())];
    let ccas = [CcaKind::Fluid, CcaKind::Cubic, CcaKind::Copa, CcaKind::Gcc, CcaKind::Bbr];
    let mut flows: Vec<FlowSpec> = (0..rng.random_range(1..4))
        .map(|_| {
            let cca = ccas[rng.random_range(0..ccas.len())];
            let start = ms(rng.random_range(0..500));
            if rng.random_bool(0.5) {
                FlowSpec::video(cca, 30, start)
            } else {
                FlowSpec::bulk(cca, start)
            }
        })
        .collect();
    let page: Vec<u64> = (0..rng.random_range(0..12)).map(|_| rng.random_range(100..60_000)).collect();
    if !page.is_empty() {
        flows.extend(spawn_web_page(&page, 300.0, 0).map_err(|e| e.to_string())?);
    }
    let hop = HopSpec {
        link: Link::new(CapacityProfile::constant(rng.random_range(2e6..40e6)), ms(rng.random_range(10..120))),
        scheduler: SchedulerSpec::new(kind),
    };
    let t = run(SimConfig::new(vec![hop], flows), ms(1500), rng.random()).map_err(|e| e.to_string())?;
    let c = t.counters;
    if c.sent != c.delivered + c.dropped + c.in_network {
        return Err(format!("{}: sent {} != delivered {} + dropped {} + in flight {}", kind.name(), c.sent, c.delivered, c.dropped, c.in_network));
    }
    if let Some(v) = t.idle_violations.first() {
        return Err(format!("{}: link idle with backlog at hop {} t={}", kind.name(), v.0, v.1));
    }
    Ok(())
}

/// One graduated flow against k newcomers; byte share tracks the weight ratio.
pub fn dwrr_case(seed: u64) -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4457_5252 ^ seed);
    let k = rng.random_range(2u32..16);
    let s_old = rng.random_range(64u32..=1500);
    let s_new = rng.random_range(64u32..=1500);
    let pulls = rng.random_range(200usize..4000);
    let mut c = Confucius::new(ConfuciusConfig::default(), u64::MAX / 4).map_err(|e| e.to_string())?;
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
    let w_new = c.queue_weight(NEW) as f64;
    let w_old = WEIGHT_ONE as f64;
    let mut old = 0u64;
    let mut total = 0u64;
    for _ in 0..pulls {
        let p = c.dequeue(3).ok_or("queue ran dry")?;
        total += p.size as u64;
        if p.flow.0 == 0 {
            old += p.size as u64;
        }
    }
    let want = total as f64 * w_old / (w_old + w_new);
    if (old as f64 - want).abs() > 2.0 * MTU as f64 {
        return Err(format!("k={k} sizes {s_old}/{s_new}: old flow got {old} of {total}, want {want:.0}"));
    }
    Ok(())
}

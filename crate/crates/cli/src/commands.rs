//! Subcommands behind the `confucius` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use confucius_core::fluid::{
    default_horizon, default_step, evaluate, integrate_fluid, FluidParams, Policy,
};
use confucius_core::metrics::{mean, RunReport};
use confucius_core::sched::SchedulerKind;
use confucius_core::sim::{run, SimTrace};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{config, CliError, Result};
use crate::output::{csv_bytes, output_root, to_json, write_atomic, write_run, Invocation, ReportFile};
use crate::scenario::Scenario;
use crate::templates;
use crate::validate;

#[derive(Debug, Parser)]
#[command(name = "confucius", version, about = "Bottleneck scheduling simulator and fluid-model analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write report.json plus CSV series.
    Run(RunArgs),
    /// Run every variant of a template (or the given scenario) over several seeds.
    Sweep(SweepArgs),
    /// Evaluate the fluid-model bounds against the integrator.
    Analyze(AnalyzeArgs),
    /// Run a scenario under several schedulers and seeds.
    Compare(CompareArgs),
    /// Run the acceptance checks and print a table.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct Source {
    /// Scenario file (TOML).
    pub scenario: Option<PathBuf>,
    /// Built-in template instead of a scenario file.
    #[arg(long, short)]
    pub template: Option<String>,
    /// Dotted-key assignment applied to the scenario, e.g. `confucius.alpha=0.2`.
    #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Source {
    /// The scenario before overrides and the directory its relative paths resolve against.
    pub fn load(&self) -> Result<(Scenario, PathBuf)> {
        match (&self.scenario, &self.template) {
            (Some(_), Some(_)) => config("give a scenario file or --template, not both"),
            (None, None) => config("a scenario file or --template is required"),
            (None, Some(t)) => Ok((templates::template(t)?, PathBuf::from("."))),
            (Some(p), None) => {
                let base = p.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
                Ok((Scenario::load(p)?, base))
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to `$CONFUCIUS_OUT/<name>-seed<seed>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Repeat the run recorded in an invocation.json.
    #[arg(long, conflicts_with_all = ["scenario", "template", "overrides", "seed"])]
    pub replay: Option<PathBuf>,
    /// Validate and print the resolved scenario without running it.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: Source,
    /// Seeds: `N` (1..=N), `a..b` (inclusive) or `a,b,c`.
    #[arg(long, default_value = "1")]
    pub seeds: String,
    /// Extra axis, `key=v1,v2,...`; crossed with the template's own variants.
    #[arg(long, value_name = "KEY=V1,V2")]
    pub vary: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Parameter file with `key = value` lines.
    pub params: Option<PathBuf>,
    /// Parameter assignment on the command line, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for per-policy trajectories `<policy>.csv`.
    #[arg(long)]
    pub series: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: Source,
    /// Comma-separated scheduler names.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub schedulers: Vec<String>,
    /// Seeds: `N` (1..=N), `a..b` (inclusive) or `a,b,c`.
    #[arg(long, default_value = "1")]
    pub seeds: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Run only these criteria (comma-separated numbers).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
    /// Dotted-key assignment applied to every simulated check scenario.
    #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

pub struct Run {
    pub trace: SimTrace,
    pub report: RunReport,
}

pub fn simulate(s: &Scenario, base: &Path, seed: u64) -> Result<Run> {
    let cfg = s.build(base)?;
    let trace = run(cfg, s.horizon(), seed)?;
    let report = RunReport::from_trace(&trace);
    Ok(Run { trace, report })
}

pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Config(format!("bad seed list `{spec}`"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let seeds = if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else if spec.contains(',') {
        spec.split(',').map(num).collect::<Result<Vec<_>>>()?
    } else {
        (1..=num(spec)?).collect()
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

/// Runs an invocation and writes its artifacts into `dir`.
pub fn run_invocation(inv: &Invocation, dir: &Path) -> Result<RunReport> {
    let s = inv.scenario.with_overrides(&inv.overrides)?;
    let r = simulate(&s, &inv.base_dir, inv.seed)?;
    let file = ReportFile {
        scenario: s.name.clone(),
        scheduler: s.scheduler.name().to_string(),
        seed: inv.seed,
        report: r.report,
    };
    write_run(dir, &file, &r.trace, inv)?;
    Ok(file.report)
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let inv = match &a.replay {
        Some(p) => Invocation::load(p)?,
        None => {
            let (scenario, base_dir) = a.source.load()?;
            let seed = a.seed.unwrap_or(scenario.seed);
            Invocation { command: "run".into(), scenario, base_dir, overrides: a.source.overrides.clone(), seed }
        }
    };
    if a.dry_run {
        let s = inv.scenario.with_overrides(&inv.overrides)?;
        s.build(&inv.base_dir)?;
        print!("{}", s.to_toml());
        return Ok(());
    }
    let dir = a.out.clone().unwrap_or_else(|| output_root().join(format!("{}-seed{}", inv.scenario.name, inv.seed)));
    let r = run_invocation(&inv, &dir)?;
    println!(
        "{}: stall {:.1} ms, mean PLT {}, JFI {} -> {}",
        inv.scenario.name,
        r.stall_ms,
        r.mean_plt_ms.map_or("-".into(), |v| format!("{v:.1} ms")),
        r.jfi.map_or("-".into(), |v| format!("{v:.3}")),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    variant: String,
    seed: u64,
    scheduler: String,
    stall_ms: f64,
    max_frame_delay_ms: f64,
    mean_plt_ms: Option<f64>,
    mean_fct_ms: Option<f64>,
    jfi: Option<f64>,
    drops: u64,
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let seeds = parse_seeds(&a.seeds)?;
    let (mut variants, base_dir) = match (&a.source.scenario, &a.source.template) {
        (None, Some(t)) => (templates::variants(t)?, PathBuf::from(".")),
        _ => {
            let (s, b) = a.source.load()?;
            (vec![("base".to_string(), s)], b)
        }
    };
    for axis in &a.vary {
        let (key, vals) = axis.split_once('=').ok_or_else(|| CliError::Config(format!("bad --vary `{axis}`")))?;
        let mut next = Vec::new();
        for (label, s) in &variants {
            for v in vals.split(',') {
                let o = format!("{key}={v}");
                next.push((format!("{label}_{}{v}", key.rsplit('.').next().unwrap()), s.with_overrides(&[o])?));
            }
        }
        variants = next;
    }
    let out = a.out.clone().unwrap_or_else(|| output_root().join(format!("sweep-{}", variants[0].1.name)));
    let jobs: Vec<(String, Invocation)> = variants
        .iter()
        .flat_map(|(label, s)| {
            seeds.iter().map(|&seed| {
                let inv = Invocation {
                    command: "run".into(),
                    scenario: s.clone(),
                    base_dir: base_dir.clone(),
                    overrides: a.source.overrides.clone(),
                    seed,
                };
                (label.clone(), inv)
            })
        })
        .collect();
    let rows = pool(a.jobs)?.install(|| {
        jobs.par_iter()
            .map(|(label, inv)| {
                let r = run_invocation(inv, &out.join(label).join(format!("seed{}", inv.seed)))?;
                Ok(SweepRow {
                    variant: label.clone(),
                    seed: inv.seed,
                    scheduler: inv.scenario.with_overrides(&inv.overrides)?.scheduler.name().to_string(),
                    stall_ms: r.stall_ms,
                    max_frame_delay_ms: r.max_frame_delay_ms,
                    mean_plt_ms: r.mean_plt_ms,
                    mean_fct_ms: r.mean_fct_ms,
                    jfi: r.jfi,
                    drops: r.drops,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_atomic(&out.join("sweep.csv"), &csv_bytes(&rows)?)?;
    println!("{} runs -> {}", rows.len(), out.join("sweep.csv").display());
    Ok(())
}

/// Reads `key = value` lines into fluid parameters. Capacity is given in Mbps.
pub fn parse_fluid_params(text: &str, mut p: FluidParams) -> Result<FluidParams> {
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("line {}: `{}` is not a number", i + 1, v.trim())))?;
        match k.trim() {
            "k" => p.k = v,
            "q0_ms" => p.q0 = v,
            "tau_ms" => p.tau = v,
            "lambda_per_ms" => p.lambda = v,
            "capacity_mbps" => p.c = v * 1000.0,
            "n" if v >= 0.0 && v.fract() == 0.0 => p.n = v as u32,
            "b_bytes" => p.b = v,
            "b0_bytes" => p.b0 = v,
            other => return config(format!("line {}: unknown or invalid parameter `{other}`", i + 1)),
        }
    }
    p.validate()?;
    Ok(p)
}

#[derive(Serialize)]
struct AnalyzeRow {
    policy: &'static str,
    q_max_closed_ms: f64,
    q_max_integrated_ms: f64,
    fct_delta_ms: f64,
    bound_flag: bool,
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let mut p = FluidParams::default();
    if let Some(path) = &a.params {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        p = parse_fluid_params(&text, p).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    p = parse_fluid_params(&a.set.join("\n"), p)?;
    for w in p.validate()? {
        eprintln!("warning: {w:?}");
    }
    let rows = Policy::ALL
        .iter()
        .map(|&pol| {
            let b = evaluate(pol, &p)?;
            Ok(AnalyzeRow {
                policy: pol.name(),
                q_max_closed_ms: b.q_max_closed,
                q_max_integrated_ms: b.q_max_integrated,
                fct_delta_ms: b.fct_delta_vs_fq,
                bound_flag: b.bound_flag,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bytes = csv_bytes(&rows)?;
    match &a.out {
        Some(o) => write_atomic(o, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    if let Some(dir) = &a.series {
        for pol in Policy::ALL {
            let t = integrate_fluid(&p, pol, default_horizon(&p), default_step(&p))?;
            let rows = (0..t.q.len()).map(|i| (t.time(i), t.s[i], t.p[i], t.q[i]));
            let mut bytes = b"time_ms,s_bits_per_ms,p_bits,q_ms\n".to_vec();
            let body = csv_bytes(rows)?;
            bytes.extend_from_slice(&body);
            write_atomic(&dir.join(format!("{}.csv", pol.name())), &bytes)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub scheduler: String,
    /// A seed number, or `mean` for the per-scheduler aggregate.
    pub seed: String,
    pub stall_ms: f64,
    pub plt_ms: Option<f64>,
    pub jfi: Option<f64>,
}

/// Cross product of schedulers and seeds, followed by one mean row per scheduler.
pub fn compare(
    scenario: &Scenario,
    base: &Path,
    overrides: &[String],
    schedulers: &[SchedulerKind],
    seeds: &[u64],
) -> Result<Vec<CompareRow>> {
    if schedulers.is_empty() {
        return config("the scheduler list is empty");
    }
    if seeds.is_empty() {
        return config("the seed list is empty");
    }
    let s = scenario.with_overrides(overrides)?;
    let cells: Vec<(SchedulerKind, u64)> =
        schedulers.iter().flat_map(|&k| seeds.iter().map(move |&seed| (k, seed))).collect();
    let mut rows = cells
        .par_iter()
        .map(|&(k, seed)| {
            let mut sc = s.clone();
            sc.scheduler = k;
            let r = simulate(&sc, base, seed)?.report;
            Ok(CompareRow {
                scheduler: k.name().to_string(),
                seed: seed.to_string(),
                stall_ms: r.stall_ms,
                plt_ms: r.mean_plt_ms,
                jfi: r.jfi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by: BTreeMap<usize, Vec<&CompareRow>> = BTreeMap::new();
    for r in &rows {
        let i = schedulers.iter().position(|k| k.name() == r.scheduler).unwrap();
        by.entry(i).or_default().push(r);
    }
    let opt_mean = |xs: Vec<Option<f64>>| mean(&xs.into_iter().flatten().collect::<Vec<_>>());
    let means: Vec<CompareRow> = by
        .values()
        .map(|rs| CompareRow {
            scheduler: rs[0].scheduler.clone(),
            seed: "mean".into(),
            stall_ms: mean(&rs.iter().map(|r| r.stall_ms).collect::<Vec<_>>()).unwrap_or(0.0),
            plt_ms: opt_mean(rs.iter().map(|r| r.plt_ms).collect()),
            jfi: opt_mean(rs.iter().map(|r| r.jfi).collect()),
        })
        .collect();
    rows.extend(means);
    Ok(rows)
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let (s, base) = a.source.load()?;
    let kinds = a
        .schedulers
        .iter()
        .filter(|n| !n.trim().is_empty())
        .map(|n| Ok(SchedulerKind::parse(n.trim())?))
        .collect::<Result<Vec<_>>>()?;
    let seeds = parse_seeds(&a.seeds)?;
    let rows = pool(a.jobs)?.install(|| compare(&s, &base, &a.source.overrides, &kinds, &seeds))?;
    let out = a.out.clone().unwrap_or_else(|| output_root().join(format!("compare-{}", s.name)));
    write_atomic(&out.join("compare.csv"), &csv_bytes(&rows)?)?;
    let inv = serde_json::json!({
        "command": "compare",
        "scenario": s,
        "overrides": a.source.overrides,
        "schedulers": a.schedulers,
        "seeds": seeds,
    });
    write_atomic(&out.join("invocation.json"), to_json(&inv).as_bytes())?;
    println!("{} rows -> {}", rows.len(), out.join("compare.csv").display());
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let opts = validate::Options { only: a.only.clone(), overrides: a.overrides.clone() };
    let results = pool(a.jobs)?.install(|| validate::run_suite(&opts))?;
    print!("{}", validate::table(&results));
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

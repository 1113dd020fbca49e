//! Run artifacts: report.json, CSV series and invocation.json, each written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use confucius_core::metrics::RunReport;
use confucius_core::sim::SimTrace;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::scenario::Scenario;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "CONFUCIUS_OUT";
pub const DEFAULT_OUT: &str = "confucius-out";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from)
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Config(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub scenario: String,
    pub scheduler: String,
    pub seed: u64,
    #[serde(flatten)]
    pub report: RunReport,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub command: String,
    /// The scenario before overrides.
    pub scenario: Scenario,
    /// Directory trace and page paths are resolved against.
    pub base_dir: PathBuf,
    pub overrides: Vec<String>,
    pub seed: u64,
}

impl Invocation {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Serialize)]
struct FrameRow {
    flow: u32,
    frame: u64,
    generated_ms: f64,
    bytes: u64,
    completed_ms: Option<f64>,
    delay_ms: Option<f64>,
}

#[derive(Serialize)]
struct FlowRow<'a> {
    flow: u32,
    kind: &'a str,
    cca: &'a str,
    start_ms: f64,
    delivered_bytes: u64,
    retransmitted_bytes: u64,
    fct_ms: Option<f64>,
    throughput_bps: f64,
    stall_ms: Option<f64>,
    max_frame_delay_ms: Option<f64>,
    queueing_p50_ms: f64,
    queueing_p99_ms: f64,
}

#[derive(Serialize)]
struct RateRow {
    time_ms: f64,
    flow: u32,
    rate_bps: f64,
}

#[derive(Serialize)]
struct ClassRow {
    time_ms: f64,
    hop: u32,
    flow: u32,
    queue: u8,
    weight_q128: u32,
    occupancy_ema: f64,
}

fn ms(us: u64) -> f64 {
    us as f64 / 1000.0
}

pub fn write_run(dir: &Path, file: &ReportFile, trace: &SimTrace, inv: &Invocation) -> Result<()> {
    write_atomic(&dir.join("report.json"), to_json(file).as_bytes())?;
    write_atomic(&dir.join("invocation.json"), to_json(inv).as_bytes())?;
    let frames = trace.frames.iter().map(|f| FrameRow {
        flow: f.flow.0,
        frame: f.frame,
        generated_ms: ms(f.generated),
        bytes: f.bytes,
        completed_ms: f.completed.map(ms),
        delay_ms: f.completed.map(|c| ms(c - f.generated)),
    });
    write_atomic(&dir.join("frames.csv"), &csv_bytes(frames)?)?;
    let flows = file.report.flows.iter().map(|f| FlowRow {
        flow: f.flow,
        kind: &f.kind,
        cca: &f.cca,
        start_ms: f.start_ms,
        delivered_bytes: f.delivered_bytes,
        retransmitted_bytes: f.retransmitted_bytes,
        fct_ms: f.fct_ms,
        throughput_bps: f.throughput_bps,
        stall_ms: f.stall_ms,
        max_frame_delay_ms: f.max_frame_delay_ms,
        queueing_p50_ms: f.queueing_delay.p50,
        queueing_p99_ms: f.queueing_delay.p99,
    });
    write_atomic(&dir.join("flows.csv"), &csv_bytes(flows)?)?;
    let rates = trace.rates.iter().map(|r| RateRow { time_ms: ms(r.time), flow: r.flow.0, rate_bps: r.rate_bps });
    write_atomic(&dir.join("rates.csv"), &csv_bytes(rates)?)?;
    let classes = trace.classes.iter().map(|(hop, c)| ClassRow {
        time_ms: ms(c.time),
        hop: *hop,
        flow: c.flow.0,
        queue: c.queue,
        weight_q128: c.weight_q128,
        occupancy_ema: c.occupancy_ema,
    });
    write_atomic(&dir.join("classes.csv"), &csv_bytes(classes)?)?;
    Ok(())
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

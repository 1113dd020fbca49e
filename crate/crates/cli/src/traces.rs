//! Bandwidth traces: `time_ms,capacity_mbps` files and a synthetic generator.

use std::fs;
use std::io::Write;
use std::path::Path;

use confucius_core::link::CapacityProfile;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 2] = ["time_ms", "capacity_mbps"];

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthTrace {
    /// `(time_ms, capacity_mbps)` records as read.
    pub points: Vec<(f64, f64)>,
    /// Value of a `# mean_mbps=` comment, if the file carries one.
    pub declared_mean_mbps: Option<f64>,
}

impl BandwidthTrace {
    pub fn profile(&self) -> Result<CapacityProfile> {
        let pts: Vec<(f64, f64)> = self.points.iter().map(|&(t, c)| (t, c * 1e6)).collect();
        Ok(CapacityProfile::from_ms(&pts)?)
    }

    /// Time-weighted mean over `[0, last record]`; the last record only marks the end.
    pub fn mean_mbps(&self) -> f64 {
        summary(&self.points).0
    }

    pub fn std_dev_mbps(&self) -> f64 {
        summary(&self.points).1
    }
}

fn summary(points: &[(f64, f64)]) -> (f64, f64) {
    if points.len() < 2 {
        return (points[0].1, 0.0);
    }
    let end = points.last().unwrap().0;
    let seg = |i: usize| points[i + 1].0 - points[i].0;
    let m = (0..points.len() - 1).map(|i| points[i].1 * seg(i)).sum::<f64>() / end;
    let v = (0..points.len() - 1).map(|i| (points[i].1 - m).powi(2) * seg(i)).sum::<f64>() / end;
    (m, v.sqrt())
}

pub fn load_bandwidth_trace(path: &Path) -> Result<BandwidthTrace> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_bandwidth_trace(&text, path)
}

/// 1-based line numbers of the lines the CSV reader treats as records
/// (it skips blank lines and lines starting with `#`).
pub(crate) fn record_lines(text: &str) -> Vec<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, _)| i + 1)
        .collect()
}

pub fn parse_bandwidth_trace(text: &str, path: &Path) -> Result<BandwidthTrace> {
    let err = |line: usize, msg: String| CliError::Parse { path: path.to_path_buf(), line, msg };
    let mut declared = None;
    for (i, l) in text.lines().enumerate() {
        if let Some(v) = l.trim().strip_prefix('#').and_then(|c| c.trim().strip_prefix("mean_mbps=")) {
            declared = Some(v.trim().parse::<f64>().map_err(|e| err(i + 1, format!("bad mean_mbps comment: {e}")))?);
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        let line = text.lines().position(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#')).map_or(1, |i| i + 1);
        return Err(err(line, format!("expected header `{}`", HEADER.join(","))));
    }
    let lines = record_lines(text);
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // Record i sits on the (i + 1)-th data line, after the header.
        let line = lines.get(i + 1).copied().unwrap_or(0);
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        let num = |i: usize, what: &str| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| err(line, format!("{what} `{}` is not a number", &rec[i])))
        };
        let (t, c) = (num(0, "time")?, num(1, "capacity")?);
        match points.last() {
            None if t != 0.0 => return Err(err(line, format!("first record must be at time 0, got {t}"))),
            Some(&(prev, _)) if !(t > prev) => {
                return Err(err(line, format!("time {t} does not increase (previous {prev})")));
            }
            _ => {}
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(err(line, format!("capacity must be positive, got {c}")));
        }
        points.push((t, c));
    }
    if points.is_empty() {
        return Err(err(1, "trace has no records".into()));
    }
    Ok(BandwidthTrace { points, declared_mean_mbps: declared })
}

pub fn write_bandwidth_trace(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# mean_mbps={}", summary(points).0).unwrap();
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(HEADER).unwrap();
    for &(t, c) in points {
        w.serialize((t, c)).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let buf = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    crate::output::write_atomic(path, &buf)
}

/// Log-normal capacity with AR(1) correlation between equal-length segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTrace {
    pub mean_mbps: f64,
    /// Coefficient of variation of the per-segment capacity.
    #[serde(default = "default_cv")]
    pub cv: f64,
    /// Lag-one correlation of the underlying Gaussian.
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_segment")]
    pub segment_ms: f64,
    /// Defaults to the scenario duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default = "default_trace_seed")]
    pub seed: u64,
}

fn default_cv() -> f64 {
    0.4
}
fn default_rho() -> f64 {
    0.5
}
fn default_segment() -> f64 {
    1000.0
}
fn default_trace_seed() -> u64 {
    1
}

impl SyntheticTrace {
    pub fn new(mean_mbps: f64, seed: u64) -> Self {
        Self {
            mean_mbps,
            cv: default_cv(),
            rho: default_rho(),
            segment_ms: default_segment(),
            duration_s: None,
            seed,
        }
    }

    /// Records covering `duration_s`, plus a terminal record. The per-segment
    /// arithmetic mean equals `mean_mbps` exactly (up to rounding).
    pub fn generate(&self, duration_s: f64) -> Result<Vec<(f64, f64)>> {
        if !(self.mean_mbps > 0.0 && self.segment_ms > 0.0 && duration_s > 0.0) {
            return crate::error::config("synthetic trace needs positive mean, segment and duration");
        }
        if !(self.cv >= 0.0) || !(self.rho > -1.0 && self.rho < 1.0) {
            return crate::error::config("synthetic trace needs cv >= 0 and |rho| < 1");
        }
        let n = ((duration_s * 1000.0 / self.segment_ms).ceil() as usize).max(1);
        let sigma = (1.0 + self.cv * self.cv).ln().sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut z: f64 = StandardNormal.sample(&mut rng);
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push((sigma * z).exp());
            let e: f64 = StandardNormal.sample(&mut rng);
            z = self.rho * z + (1.0 - self.rho * self.rho).sqrt() * e;
        }
        // Keep a floor at a tenth of the mean, then rescale; a few passes settle both.
        let floor = 0.1;
        for _ in 0..8 {
            let m = v.iter().sum::<f64>() / n as f64;
            for x in v.iter_mut() {
                *x = (*x / m).max(floor);
            }
        }
        let m = v.iter().sum::<f64>() / n as f64;
        let mut pts: Vec<(f64, f64)> = v
            .iter()
            .enumerate()
            .map(|(i, x)| (i as f64 * self.segment_ms, x / m * self.mean_mbps))
            .collect();
        pts.push((n as f64 * self.segment_ms, pts[n - 1].1));
        Ok(pts)
    }
}

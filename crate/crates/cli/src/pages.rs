//! Web pages: `start_offset_ms,size_bytes` files and a seeded page generator.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CliError, Result};
use crate::traces::record_lines;

pub const HEADER: [&str; 2] = ["start_offset_ms", "size_bytes"];

/// Flow count: discretized log-normal with median 8 and 90th percentile 19.
pub const COUNT_MEDIAN: f64 = 8.0;
pub const COUNT_P90: f64 = 19.0;
pub const COUNT_MAX: usize = 250;
/// Sizes: log-uniform halves on either side of the median.
pub const SIZE_MIN: f64 = 100.0;
pub const SIZE_MEDIAN: f64 = 15_000.0;
pub const SIZE_MAX: f64 = 100_000.0;

/// z-score of the 90th percentile of the standard normal.
const Z90: f64 = 1.281_551_565_545;

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    /// `(start_offset_ms, size_bytes)` per flow.
    pub flows: Vec<(f64, u64)>,
}

impl Page {
    pub fn sizes(&self) -> Vec<u64> {
        self.flows.iter().map(|f| f.1).collect()
    }
}

pub fn count_sigma() -> f64 {
    (COUNT_P90 / COUNT_MEDIAN).ln() / Z90
}

/// One page with simultaneous flow starts; `stagger_ms` spreads starts uniformly instead.
pub fn generate_web_page(seed: u64, stagger_ms: Option<f64>) -> Page {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: f64 = StandardNormal.sample(&mut rng);
    let n = (COUNT_MEDIAN.ln() + count_sigma() * z).exp().round().clamp(1.0, COUNT_MAX as f64) as usize;
    let flows = (0..n)
        .map(|_| {
            let (lo, hi) = if rng.random_bool(0.5) { (SIZE_MIN, SIZE_MEDIAN) } else { (SIZE_MEDIAN, SIZE_MAX) };
            let size = (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp().round() as u64;
            let off = stagger_ms.map_or(0.0, |s| (rng.random::<f64>() * s * 1000.0).round() / 1000.0);
            (off, size)
        })
        .collect();
    Page { flows }
}

pub fn load_page(path: &Path) -> Result<Page> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_page(&text, path)
}

/// The header line is optional.
pub fn parse_page(text: &str, path: &Path) -> Result<Page> {
    let err = |line: usize, msg: String| CliError::Parse { path: path.to_path_buf(), line, msg };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let lines = record_lines(text);
    let mut flows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = lines.get(i).copied().unwrap_or(0);
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        if i == 0 && rec.iter().collect::<Vec<_>>() == HEADER {
            continue;
        }
        if rec.len() != 2 {
            return Err(err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let off: f64 = rec[0].parse().map_err(|_| err(line, format!("offset `{}` is not a number", &rec[0])))?;
        let size: u64 = rec[1].parse().map_err(|_| err(line, format!("size `{}` is not a byte count", &rec[1])))?;
        if !(off >= 0.0 && off.is_finite()) {
            return Err(err(line, format!("offset must be non-negative, got {off}")));
        }
        if size == 0 {
            return Err(err(line, "size must be positive".into()));
        }
        flows.push((off, size));
    }
    if flows.is_empty() {
        return Err(err(1, "page has no flows".into()));
    }
    Ok(Page { flows })
}

pub fn write_page(path: &Path, page: &Page) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).unwrap();
    for f in &page.flows {
        w.serialize(f).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let buf = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    crate::output::write_atomic(path, &buf)
}

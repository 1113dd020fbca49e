//! Scenario files (TOML) and their translation into a simulator configuration.
//!
//! ```toml
//! name = "example"
//! duration_s = 30.0
//! seed = 1
//! scheduler = "confucius"
//!
//! [confucius]            # optional, any ConfuciusConfig field
//! lambda_per_ms = 0.004
//!
//! [[links]]
//! rtt_ms = 40.0
//! capacity_mbps = 25.0   # or trace = "bw.csv", steps = [[0, 25], [10000, 12.5]],
//!                        # or [links.synthetic] mean_mbps = 25
//! buffer_bdp = 2.0       # or buffer_bytes
//!
//! [[video]]
//! cca = "fluid"
//!
//! [[bulk]]
//! cca = "cubic"
//! start_ms = 0.0
//!
//! [[pages]]
//! start_ms = 10000.0
//! count = 20             # with size_bytes, or sizes = [...], file = "page.csv",
//! size_bytes = 15000     # or generator_seed = 3
//! ```

use std::path::{Path, PathBuf};

use confucius_core::cca::{CcaKind, CcaParams};
use confucius_core::link::{CapacityProfile, Link};
use confucius_core::sched::{BaselineConfig, ConfuciusConfig, SchedulerKind, SchedulerSpec};
use confucius_core::sim::{HopSpec, SimConfig};
use confucius_core::source::{spawn_web_page_staggered, FlowSpec};
use confucius_core::{Micros, MTU};
use serde::{Deserialize, Serialize};

use crate::error::{config, CliError, Result};
use crate::pages::{generate_web_page, load_page};
use crate::traces::{load_bandwidth_trace, SyntheticTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "one")]
    pub seed: u64,
    pub scheduler: SchedulerKind,
    #[serde(default = "pacing")]
    pub video_pacing: f64,
    #[serde(default)]
    pub strip_labels: bool,
    #[serde(default = "sample_ms")]
    pub sample_ms: f64,
    #[serde(default)]
    pub confucius: ConfuciusConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub cca: CcaParams,
    pub links: Vec<LinkSection>,
    #[serde(default)]
    pub video: Vec<VideoSection>,
    #[serde(default)]
    pub bulk: Vec<BulkSection>,
    #[serde(default)]
    pub pages: Vec<PageSection>,
}

fn one() -> u64 {
    1
}
fn pacing() -> f64 {
    2.5
}
fn sample_ms() -> f64 {
    10.0
}
fn fps() -> u32 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub rtt_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_mbps: Option<f64>,
    /// Bandwidth trace file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// `[start_ms, mbps]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_bytes: Option<u64>,
    /// Buffer in multiples of the bandwidth-delay product at peak capacity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_bdp: Option<f64>,
    /// Discipline at this hop; the scenario-wide scheduler when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<SchedulerKind>,
}

impl LinkSection {
    pub fn constant(mbps: f64, rtt_ms: f64) -> Self {
        Self {
            rtt_ms,
            capacity_mbps: Some(mbps),
            trace: None,
            steps: None,
            synthetic: None,
            buffer_bytes: None,
            buffer_bdp: None,
            scheduler: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoSection {
    pub cca: CcaKind,
    #[serde(default = "fps")]
    pub fps: u32,
    #[serde(default)]
    pub start_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_ms: Option<f64>,
    #[serde(default)]
    pub extra_rtt_ms: f64,
}

impl VideoSection {
    pub fn new(cca: CcaKind) -> Self {
        Self { cca, fps: fps(), start_ms: 0.0, stop_ms: None, extra_rtt_ms: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BulkSection {
    pub cca: CcaKind,
    #[serde(default)]
    pub start_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_ms: Option<f64>,
    #[serde(default)]
    pub extra_rtt_ms: f64,
}

impl BulkSection {
    pub fn new(cca: CcaKind) -> Self {
        Self { cca, start_ms: 0.0, stop_ms: None, extra_rtt_ms: 0.0 }
    }
}

/// One web page. Flows come from exactly one of: `count` + `size_bytes`,
/// `sizes` (optionally with `offsets_ms`), `file`, or `generator_seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageSection {
    pub start_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets_ms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_seed: Option<u64>,
    /// Spread generated flow starts uniformly over this many milliseconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stagger_ms: Option<f64>,
    #[serde(default)]
    pub extra_rtt_ms: f64,
}

impl PageSection {
    pub fn uniform(start_ms: f64, count: usize, size_bytes: u64) -> Self {
        Self { start_ms, count: Some(count), size_bytes: Some(size_bytes), ..Self::default() }
    }

    pub fn generated(start_ms: f64, seed: u64) -> Self {
        Self { start_ms, generator_seed: Some(seed), ..Self::default() }
    }

    /// `(offset_ms, size)` per flow.
    pub fn flows(&self, base: &Path) -> Result<Vec<(f64, u64)>> {
        let given = [
            self.count.is_some() || self.size_bytes.is_some(),
            self.sizes.is_some(),
            self.file.is_some(),
            self.generator_seed.is_some(),
        ];
        if given.iter().filter(|&&g| g).count() != 1 {
            return config("a page needs exactly one of count+size_bytes, sizes, file, generator_seed");
        }
        if self.offsets_ms.is_some() && self.sizes.is_none() {
            return config("offsets_ms is only valid together with sizes");
        }
        if let (Some(n), Some(b)) = (self.count, self.size_bytes) {
            if n == 0 {
                return config("page count must be positive");
            }
            return Ok(vec![(0.0, b); n]);
        }
        if self.count.is_some() || self.size_bytes.is_some() {
            return config("count and size_bytes go together");
        }
        if let Some(sizes) = &self.sizes {
            let offs = match &self.offsets_ms {
                Some(o) if o.len() != sizes.len() => return config("offsets_ms and sizes differ in length"),
                Some(o) => o.clone(),
                None => vec![0.0; sizes.len()],
            };
            return Ok(offs.into_iter().zip(sizes.iter().copied()).collect());
        }
        if let Some(f) = &self.file {
            return Ok(load_page(&base.join(f))?.flows);
        }
        Ok(generate_web_page(self.generator_seed.unwrap(), self.stagger_ms).flows)
    }
}

fn us(ms: f64) -> Micros {
    (ms * 1000.0).round().max(0.0) as Micros
}

impl Scenario {
    /// A single constant link with nothing attached.
    pub fn new(name: &str, duration_s: f64, scheduler: SchedulerKind, link: LinkSection) -> Self {
        Self {
            name: name.to_string(),
            duration_s,
            seed: 1,
            scheduler,
            video_pacing: pacing(),
            strip_labels: false,
            sample_ms: sample_ms(),
            confucius: ConfuciusConfig::default(),
            baseline: BaselineConfig::default(),
            cca: CcaParams::default(),
            links: vec![link],
            video: Vec::new(),
            bulk: Vec::new(),
            pages: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn horizon(&self) -> Micros {
        us(self.duration_s * 1000.0)
    }

    pub fn capacity(&self, link: &LinkSection, base: &Path) -> Result<CapacityProfile> {
        let n = [link.capacity_mbps.is_some(), link.trace.is_some(), link.steps.is_some(), link.synthetic.is_some()]
            .iter()
            .filter(|&&g| g)
            .count();
        if n != 1 {
            return config("a link needs exactly one of capacity_mbps, trace, steps, synthetic");
        }
        if let Some(c) = link.capacity_mbps {
            if !(c > 0.0) {
                return config("capacity_mbps must be positive");
            }
            return Ok(CapacityProfile::constant(c * 1e6));
        }
        if let Some(t) = &link.trace {
            return load_bandwidth_trace(&base.join(t))?.profile();
        }
        let pts = match (&link.steps, &link.synthetic) {
            (Some(s), _) => s.clone(),
            (_, Some(g)) => g.generate(g.duration_s.unwrap_or(self.duration_s))?,
            _ => unreachable!(),
        };
        let pts: Vec<(f64, f64)> = pts.iter().map(|&(t, c)| (t, c * 1e6)).collect();
        Ok(CapacityProfile::from_ms(&pts)?)
    }

    pub fn hop(&self, link: &LinkSection, base: &Path) -> Result<HopSpec> {
        let profile = self.capacity(link, base)?;
        if !(link.rtt_ms >= 0.0) {
            return config("rtt_ms must be non-negative");
        }
        let mut l = Link::new(profile, us(link.rtt_ms));
        match (link.buffer_bytes, link.buffer_bdp) {
            (Some(_), Some(_)) => return config("give buffer_bytes or buffer_bdp, not both"),
            (Some(b), None) => l = l.with_buffer(b),
            (None, Some(x)) => {
                let bdp = l.profile.peak() * link.rtt_ms / 8e3;
                l = l.with_buffer(((x * bdp).ceil() as u64).max(MTU as u64));
            }
            (None, None) => {}
        }
        let mut scheduler = SchedulerSpec::new(link.scheduler.unwrap_or(self.scheduler));
        scheduler.confucius = self.confucius.clone();
        scheduler.baseline = self.baseline.clone();
        Ok(HopSpec { link: l, scheduler })
    }

    /// Flows are numbered video first, then bulk, then pages in order.
    pub fn build(&self, base: &Path) -> Result<SimConfig> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return config("duration_s must be positive");
        }
        if self.links.is_empty() {
            return config("at least one [[links]] entry is required");
        }
        if !(self.sample_ms > 0.0) {
            return config("sample_ms must be positive");
        }
        let hops = self.links.iter().map(|l| self.hop(l, base)).collect::<Result<Vec<_>>>()?;
        let mut flows = Vec::new();
        for v in &self.video {
            let mut f = FlowSpec::video(v.cca, v.fps, us(v.start_ms));
            f.stop = v.stop_ms.map(us);
            f.extra_rtt = us(v.extra_rtt_ms);
            flows.push(f);
        }
        for b in &self.bulk {
            let mut f = FlowSpec::bulk(b.cca, us(b.start_ms));
            f.stop = b.stop_ms.map(us);
            f.extra_rtt = us(b.extra_rtt_ms);
            flows.push(f);
        }
        for (i, p) in self.pages.iter().enumerate() {
            let fl = p.flows(base)?;
            for mut f in spawn_web_page_staggered(&fl, p.start_ms, i as u32)? {
                f.extra_rtt = us(p.extra_rtt_ms);
                flows.push(f);
            }
        }
        let mut cfg = SimConfig::new(hops, flows);
        cfg.cca = self.cca.clone();
        cfg.video_pacing = self.video_pacing;
        cfg.strip_labels = self.strip_labels;
        cfg.sample_every = us(self.sample_ms);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `a.b.0.c=value` assignments. Values are read as TOML literals,
    /// falling back to a bare string. Intermediate keys must exist; the result
    /// is re-checked against the schema, so misspelt leaves are rejected too.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
            let value = parse_value(raw.trim());
            set_path(&mut root, key.trim(), value).map_err(|m| CliError::Config(format!("override `{o}`: {m}")))?;
        }
        root.try_into::<Scenario>().map_err(|e| CliError::Config(format!("after overrides: {e}")))
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("x = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> std::result::Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err("empty key segment".into());
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    let known = t.contains_key(*part);
                    if !known && !optional_leaf(part) {
                        return Err(format!("no key `{}`", parts[..=i].join(".")));
                    }
                    t.insert(part.to_string(), value);
                    return Ok(());
                }
                t.get_mut(*part).ok_or_else(|| format!("no key `{}`", parts[..=i].join(".")))?
            }
            toml::Value::Array(a) => {
                let idx: usize = part.parse().map_err(|_| format!("`{part}` is not an index"))?;
                let len = a.len();
                let slot = a.get_mut(idx).ok_or_else(|| format!("index {idx} out of range (len {len})"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(format!("`{}` is not a table or array", parts[..i].join("."))),
        };
    }
    unreachable!()
}

/// Optional fields are absent from the serialized tree until set.
fn optional_leaf(name: &str) -> bool {
    const OPTIONAL: &[&str] = &[
        "capacity_mbps",
        "trace",
        "steps",
        "synthetic",
        "buffer_bytes",
        "buffer_bdp",
        "scheduler",
        "stop_ms",
        "count",
        "size_bytes",
        "sizes",
        "offsets_ms",
        "file",
        "generator_seed",
        "stagger_ms",
        "duration_s",
        "reweight_period_ms",
        "cbq_weights",
    ];
    OPTIONAL.contains(&name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Scenario {
        let mut s = Scenario::new("t", 5.0, SchedulerKind::Confucius, LinkSection::constant(25.0, 40.0));
        s.video.push(VideoSection::new(CcaKind::Fluid));
        s.bulk.push(BulkSection::new(CcaKind::Cubic));
        s.pages.push(PageSection::uniform(1000.0, 3, 15_000));
        s.pages.push(PageSection::generated(2000.0, 4));
        s
    }

    #[test]
    fn toml_round_trip() {
        let s = sample();
        let text = s.to_toml();
        assert_eq!(Scenario::from_toml(&text).unwrap(), s);
    }

    #[test]
    fn flows_are_ordered() {
        let cfg = sample().build(Path::new(".")).unwrap();
        assert!(cfg.flows[0].is_realtime());
        assert_eq!(cfg.flows[1].cca, CcaKind::Cubic);
        assert_eq!(cfg.flows[2].page, Some(0));
        assert_eq!(cfg.flows.last().unwrap().page, Some(1));
    }

    #[test]
    fn overrides() {
        let s = sample();
        let o = s
            .with_overrides(&["scheduler=fifo".into(), "confucius.lambda_per_ms=10".into(), "pages.0.count=7".into()])
            .unwrap();
        assert_eq!(o.scheduler, SchedulerKind::Fifo);
        assert_eq!(o.confucius.lambda_per_ms, 10.0);
        assert_eq!(o.pages[0].count, Some(7));
        let o = s.with_overrides(&["links.0.buffer_bytes=30000".into()]).unwrap();
        assert_eq!(o.links[0].buffer_bytes, Some(30_000));
        for bad in ["nope=1", "confucius.lamda=1", "pages.5.count=1", "scheduler=warp", "seed", "links.x.rtt_ms=1"] {
            assert!(s.with_overrides(&[bad.into()]).is_err(), "{bad}");
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut s = sample();
        s.links[0].steps = Some(vec![(0.0, 10.0)]);
        assert!(s.build(Path::new(".")).is_err());
        let mut s = sample();
        s.duration_s = 0.0;
        assert!(s.build(Path::new(".")).is_err());
        let mut s = sample();
        s.pages[0].sizes = Some(vec![1]);
        assert!(s.build(Path::new(".")).is_err());
        assert!(Scenario::from_toml("name='x'\nduration_s=1\nscheduler='fq'\nlinks=[]\nbogus=1\n").is_err());
    }

    #[test]
    fn buffer_in_bdp() {
        let mut s = sample();
        s.links[0].buffer_bdp = Some(1.0);
        let cfg = s.build(Path::new(".")).unwrap();
        assert_eq!(cfg.hops[0].link.buffer_limit, 125_000);
    }
}

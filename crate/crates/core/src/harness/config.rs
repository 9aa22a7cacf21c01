use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::distributions::WeightDistribution;
use crate::error::{FppError, Result};
use crate::path_search::DEFAULT_NODE_BUDGET;
use crate::renewal::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = FppError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            _ => Err(FppError::InvalidConfig(format!("unknown format {s:?}"))),
        }
    }
}

/// Where the `(W, W~)` pairs of the mixed-Poisson reference come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceSource {
    /// Branching random walk at depth `w_depth`.
    Brw,
    /// `(W_r, W~_r)` measured on the simulated graphs.
    Graph,
}

impl FromStr for ReferenceSource {
    type Err = FppError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brw" => Ok(ReferenceSource::Brw),
            "graph" => Ok(ReferenceSource::Graph),
            _ => Err(FppError::InvalidConfig(format!("unknown reference {s:?}"))),
        }
    }
}

/// Flat `key = value` configuration of a batch of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub lambda: f64,
    pub dist: WeightDistribution,
    pub window: Window,
    pub trials: usize,
    pub master_seed: u64,
    pub radius_override: Option<usize>,
    pub hop_cap_override: Option<usize>,
    pub node_budget: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub records_out: Option<PathBuf>,
    pub format: OutputFormat,
    pub plot_spec: bool,
    pub record_timing: bool,
    pub reference: ReferenceSource,
    pub w_depth: usize,
    pub w_pairs: usize,
}

const KEYS: &[&str] = &[
    "n",
    "lambda",
    "dist",
    "x_lo",
    "x_hi",
    "h_lo",
    "h_hi",
    "trials",
    "master_seed",
    "radius_override",
    "hop_cap_override",
    "node_budget",
    "workers",
    "records_out",
    "format",
    "plot_spec",
    "record_timing",
    "reference",
    "w_depth",
    "w_pairs",
];

fn bad(msg: String) -> FppError {
    FppError::InvalidConfig(msg)
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(format!("{key}: cannot parse {v:?}")))
}

/// Accepts `inf`, `+inf`, `-inf` besides ordinary floats.
fn parse_real(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse_value(key, v)?;
    if x.is_nan() {
        return Err(bad(format!("{key}: NaN")));
    }
    Ok(x)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FppError::io(path, e))?;
        text.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(bad(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.lambda > 0.0 && self.lambda < self.n as f64) {
            return Err(bad(format!("need 0 < lambda < n, got {}", self.lambda)));
        }
        if self.trials == 0 {
            return Err(bad("trials must be at least 1".into()));
        }
        self.window
            .validate()
            .map_err(|e| bad(e.to_string()))?;
        if !self.window.x_hi.is_finite() {
            return Err(bad("x_hi must be finite".into()));
        }
        if self.workers == Some(0) {
            return Err(bad("workers must be positive".into()));
        }
        if self.w_pairs == 0 {
            return Err(bad("w_pairs must be positive".into()));
        }
        Ok(())
    }

    /// `key = value` lines in a fixed order; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("n", self.n.to_string());
        put("lambda", format!("{:?}", self.lambda));
        put("dist", self.dist.to_string());
        put("x_lo", format!("{:?}", self.window.x_lo));
        put("x_hi", format!("{:?}", self.window.x_hi));
        put("h_lo", format!("{:?}", self.window.h_lo));
        put("h_hi", format!("{:?}", self.window.h_hi));
        put("trials", self.trials.to_string());
        put("master_seed", self.master_seed.to_string());
        if let Some(r) = self.radius_override {
            put("radius_override", r.to_string());
        }
        if let Some(h) = self.hop_cap_override {
            put("hop_cap_override", h.to_string());
        }
        put("node_budget", self.node_budget.to_string());
        if let Some(w) = self.workers {
            put("workers", w.to_string());
        }
        if let Some(p) = &self.records_out {
            put("records_out", p.display().to_string());
        }
        put(
            "format",
            match self.format {
                OutputFormat::Csv => "csv",
                OutputFormat::Jsonl => "jsonl",
            }
            .into(),
        );
        put("plot_spec", self.plot_spec.to_string());
        put("record_timing", self.record_timing.to_string());
        put(
            "reference",
            match self.reference {
                ReferenceSource::Brw => "brw",
                ReferenceSource::Graph => "graph",
            }
            .into(),
        );
        put("w_depth", self.w_depth.to_string());
        put("w_pairs", self.w_pairs.to_string());
        s
    }
}

impl FromStr for ExperimentConfig {
    type Err = FppError;

    /// Blank lines and `#` comments are skipped; unknown or repeated keys are
    /// rejected.
    fn from_str(text: &str) -> Result<Self> {
        let mut seen: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(bad(format!("line {}: unknown key {k:?}", lineno + 1)));
            }
            if seen.iter().any(|(s, _)| s == k) {
                return Err(bad(format!("line {}: repeated key {k:?}", lineno + 1)));
            }
            seen.push((k.to_string(), v.to_string()));
        }
        let get = |k: &str| seen.iter().find(|(s, _)| s == k).map(|(_, v)| v.as_str());
        let need = |k: &str| get(k).ok_or_else(|| bad(format!("missing key {k:?}")));

        let dist: WeightDistribution = need("dist")?
            .parse()
            .map_err(|e: FppError| bad(format!("dist: {e}")))?;
        let real_or = |k: &str, d: f64| get(k).map_or(Ok(d), |v| parse_real(k, v));
        let window = Window {
            x_lo: real_or("x_lo", f64::NEG_INFINITY)?,
            x_hi: parse_real("x_hi", need("x_hi")?)?,
            h_lo: real_or("h_lo", f64::NEG_INFINITY)?,
            h_hi: real_or("h_hi", f64::INFINITY)?,
        };
        let opt_count = |k: &str| get(k).map(|v| parse_value::<usize>(k, v)).transpose();
        let cfg = ExperimentConfig {
            n: parse_value("n", need("n")?)?,
            lambda: parse_real("lambda", need("lambda")?)?,
            dist,
            window,
            trials: parse_value("trials", need("trials")?)?,
            master_seed: parse_value("master_seed", need("master_seed")?)?,
            radius_override: opt_count("radius_override")?,
            hop_cap_override: opt_count("hop_cap_override")?,
            node_budget: get("node_budget").map_or(Ok(DEFAULT_NODE_BUDGET), |v| parse_value("node_budget", v))?,
            workers: opt_count("workers")?,
            records_out: get("records_out").map(PathBuf::from),
            format: get("format").map_or(Ok(OutputFormat::Csv), str::parse)?,
            plot_spec: get("plot_spec").map_or(Ok(false), |v| parse_bool("plot_spec", v))?,
            record_timing: get("record_timing").map_or(Ok(false), |v| parse_bool("record_timing", v))?,
            reference: get("reference").map_or(Ok(ReferenceSource::Brw), str::parse)?,
            w_depth: get("w_depth").map_or(Ok(crate::brw_cox::DEFAULT_W_DEPTH), |v| parse_value("w_depth", v))?,
            w_pairs: get("w_pairs").map_or(Ok(2000), |v| parse_value("w_pairs", v))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

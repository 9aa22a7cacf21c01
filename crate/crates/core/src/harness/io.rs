use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{FppError, Result};
use crate::path_search::Verdict;
use crate::renewal::IntensityMeasure;
use crate::special::normal_quantile;

use super::{OutputFormat, TrialRecord, TrialStatus};

pub const CSV_HEADER: [&str; 16] = [
    "trial_index",
    "seed",
    "status",
    "g1",
    "g2",
    "g3",
    "g_all",
    "w_r",
    "wt_r",
    "count_in_window",
    "x_star",
    "h_star",
    "conditional_intensity_approx",
    "nodes_expanded",
    "unverified_tail",
    "runtime_ms",
];

/// 17 significant digits, which round-trips every `f64`.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fields(r: &TrialRecord) -> [String; 16] {
    let opt = |x: Option<f64>| x.map(real).unwrap_or_default();
    [
        r.trial_index.to_string(),
        r.seed.to_string(),
        r.status.as_str().into(),
        r.g1.as_str().into(),
        r.g2.as_str().into(),
        r.g3.as_str().into(),
        r.g_all.to_string(),
        real(r.w_r),
        real(r.wt_r),
        r.count_in_window.to_string(),
        opt(r.x_star),
        opt(r.h_star),
        real(r.conditional_intensity_approx),
        r.nodes_expanded.to_string(),
        r.unverified_tail.to_string(),
        r.runtime_ms.to_string(),
    ]
}

fn json_line(r: &TrialRecord) -> String {
    let f = fields(r);
    let mut s = String::from("{");
    for (i, (k, v)) in CSV_HEADER.iter().zip(f.iter()).enumerate() {
        if i > 0 {
            s.push(',');
        }
        let quoted = matches!(*k, "status" | "g1" | "g2" | "g3");
        let is_real = matches!(
            *k,
            "w_r" | "wt_r" | "x_star" | "h_star" | "conditional_intensity_approx"
        );
        let body = if v.is_empty() {
            "null".to_string()
        } else if quoted || (is_real && v.parse::<f64>().is_ok_and(|x| !x.is_finite())) {
            format!("\"{v}\"")
        } else {
            v.clone()
        };
        s.push_str(&format!("\"{k}\":{body}"));
    }
    s.push('}');
    s
}

/// Writes records as CSV (header plus one line each) or JSONL.
pub fn write_records<W: Write>(out: &mut W, records: &[TrialRecord], format: OutputFormat) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "{}", CSV_HEADER.join(","))?;
            for r in records {
                writeln!(out, "{}", fields(r).join(","))?;
            }
        }
        OutputFormat::Jsonl => {
            for r in records {
                writeln!(out, "{}", json_line(r))?;
            }
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| FppError::io(path, e))
}

/// Companion plot file path: `<records>.plot.json`.
pub fn plot_spec_path(records_path: &Path) -> PathBuf {
    let mut s = records_path.as_os_str().to_owned();
    s.push(".plot.json");
    PathBuf::from(s)
}

/// Writes the records file and, when `plot` is given, the plot companion.
pub fn emit_outputs(
    records: &[TrialRecord],
    path: &Path,
    format: OutputFormat,
    plot: Option<(&IntensityMeasure, &[(f64, f64)])>,
) -> Result<()> {
    let mut out = create(path)?;
    write_records(&mut out, records, format)
        .and_then(|_| out.flush())
        .map_err(|e| FppError::io(path, e))?;
    if let Some((im, pairs)) = plot {
        let p = plot_spec_path(path);
        let mut out = create(&p)?;
        let text = serde_json::to_string_pretty(&plot_spec_json(records, im, pairs))
            .map_err(|e| FppError::Parse(e.to_string()))?;
        writeln!(out, "{text}")
            .and_then(|_| out.flush())
            .map_err(|e| FppError::io(&p, e))?;
    }
    Ok(())
}

/// Histogram of gated counts, empirical against limiting cdf of `X*`, and
/// normal QQ data for `H*`.
pub fn plot_spec_json(records: &[TrialRecord], im: &IntensityMeasure, pairs: &[(f64, f64)]) -> Value {
    let counts: Vec<u64> = records
        .iter()
        .filter(|r| r.status == TrialStatus::Ok)
        .map(|r| r.gated_count())
        .collect();
    let freq = super::stats::empirical_pmf(&counts);
    let mut xs: Vec<f64> = records.iter().filter_map(|r| r.x_star).collect();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let (alpha, gamma) = (im.constants.alpha, im.constants.gamma);
    let positive: Vec<f64> = pairs.iter().map(|(a, b)| a * b).filter(|p| *p > 0.0).collect();
    let limit_cdf = |x: f64| {
        if positive.is_empty() {
            return f64::NAN;
        }
        let surv: f64 = positive.iter().map(|p| (-p * gamma * (alpha * x).exp()).exp()).sum();
        1.0 - surv / positive.len() as f64
    };
    let mut hs: Vec<f64> = records.iter().filter_map(|r| r.h_star).collect();
    hs.sort_by(f64::total_cmp);
    let hm = hs.len() as f64;
    json!({
        "count_histogram": {
            "x_label": "gated count in window",
            "y_label": "relative frequency",
            "k": (0..freq.len()).collect::<Vec<_>>(),
            "frequency": freq,
        },
        "x_star_cdf": {
            "x_label": "rescaled minimum weight",
            "y_label": "cumulative probability",
            "x": xs,
            "empirical": (1..=xs.len()).map(|i| i as f64 / m).collect::<Vec<_>>(),
            "limit": xs.iter().map(|&x| limit_cdf(x)).collect::<Vec<_>>(),
        },
        "h_star_qq": {
            "x_label": "standard normal quantile",
            "y_label": "rescaled hopcount of the minimum",
            "theoretical": (0..hs.len()).map(|i| normal_quantile((i as f64 + 0.5) / hm)).collect::<Vec<_>>(),
            "sample": hs,
        },
    })
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> FppError {
    FppError::Parse(format!("line {line}: {msg}"))
}

fn build(line: usize, f: &[&str]) -> Result<TrialRecord> {
    let e = |m: &str| parse_err(line, m);
    let int = |i: usize| f[i].parse::<u64>().map_err(|_| e(CSV_HEADER[i]));
    let flt = |i: usize| f[i].parse::<f64>().map_err(|_| e(CSV_HEADER[i]));
    let opt = |i: usize| if f[i].is_empty() { Ok(None) } else { flt(i).map(Some) };
    let verdict = |i: usize| Verdict::parse(f[i]).ok_or_else(|| e(CSV_HEADER[i]));
    let boolean = |i: usize| f[i].parse::<bool>().map_err(|_| e(CSV_HEADER[i]));
    Ok(TrialRecord {
        trial_index: int(0)?,
        seed: int(1)?,
        status: TrialStatus::parse(f[2]).ok_or_else(|| e("status"))?,
        g1: verdict(3)?,
        g2: verdict(4)?,
        g3: verdict(5)?,
        g_all: boolean(6)?,
        w_r: flt(7)?,
        wt_r: flt(8)?,
        count_in_window: int(9)?,
        x_star: opt(10)?,
        h_star: opt(11)?,
        conditional_intensity_approx: flt(12)?,
        nodes_expanded: int(13)?,
        unverified_tail: boolean(14)?,
        runtime_ms: int(15)?,
    })
}

pub fn parse_records_csv<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| parse_err(i + 1, e))?;
        if i == 0 {
            if line.trim() != CSV_HEADER.join(",") {
                return Err(parse_err(1, "unexpected header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != CSV_HEADER.len() {
            return Err(parse_err(i + 1, format!("expected {} fields", CSV_HEADER.len())));
        }
        out.push(build(i + 1, &f)?);
    }
    Ok(out)
}

pub fn parse_records_jsonl<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| parse_err(i + 1, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?;
        let obj = v.as_object().ok_or_else(|| parse_err(i + 1, "not an object"))?;
        if obj.len() != CSV_HEADER.len() {
            return Err(parse_err(i + 1, "unexpected field set"));
        }
        let texts: Vec<String> = CSV_HEADER
            .iter()
            .map(|k| match obj.get(*k) {
                Some(Value::Null) => Ok(String::new()),
                Some(Value::String(s)) => Ok(s.clone()),
                Some(Value::Number(n)) => Ok(n.to_string()),
                Some(Value::Bool(b)) => Ok(b.to_string()),
                _ => Err(parse_err(i + 1, format!("missing or malformed {k}"))),
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        out.push(build(i + 1, &refs)?);
    }
    Ok(out)
}

/// Reads a records file, choosing the format from the first byte.
pub fn parse_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = File::open(path).map_err(|e| FppError::io(path, e))?;
    let mut r = BufReader::new(file);
    let first = r.fill_buf().map_err(|e| FppError::io(path, e))?.first().copied();
    if first == Some(b'{') {
        parse_records_jsonl(r)
    } else {
        parse_records_csv(r)
    }
}

pub fn write_w_pairs(path: &Path, pairs: &[(f64, f64)]) -> Result<()> {
    let mut out = create(path)?;
    let body = (|| {
        writeln!(out, "w,wt")?;
        for &(a, b) in pairs {
            writeln!(out, "{},{}", real(a), real(b))?;
        }
        out.flush()
    })();
    body.map_err(|e| FppError::io(path, e))
}

/// Reads `w,wt` lines; the header is optional.
pub fn read_w_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = File::open(path).map_err(|e| FppError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FppError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == "w,wt") {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| parse_err(i + 1, "expected w,wt"))?;
        let a: f64 = a.trim().parse().map_err(|_| parse_err(i + 1, "bad w"))?;
        let b: f64 = b.trim().parse().map_err(|_| parse_err(i + 1, "bad wt"))?;
        if !(a >= 0.0 && b >= 0.0) {
            return Err(parse_err(i + 1, "W values must be non-negative"));
        }
        out.push((a, b));
    }
    Ok(out)
}

//! Result records, scan tables, comparison reports and the key=value config
//! format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chern::ChernResult;
use crate::error::{Error, Result};
use crate::gauss::C64;
use crate::kitaev::MeasureResult;
use crate::laughlin::Estimate;

pub const SCHEMA: u32 = 1;

/// Build identifier embedded in every record: crate version, plus the
/// `TME_BUILD_ID` value (e.g. a git hash) when set at compile time.
pub fn build_id() -> String {
    match option_env!("TME_BUILD_ID") {
        Some(id) => format!("{}+{id}", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub schema: u32,
    pub build: String,
    pub kind: String,
    pub measure: String,
    /// Config snapshot the value was produced under.
    pub params: Value,
    #[serde(with = "nullable")]
    pub value_re: f64,
    #[serde(with = "nullable")]
    pub value_im: f64,
    #[serde(with = "nullable")]
    pub phase: f64,
    #[serde(with = "nullable")]
    pub magnitude: f64,
    pub sectors: usize,
    pub seed: Option<u64>,
    pub runtime_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<f64>,
    /// Set on diagnostic records written for failed runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Record {
    pub fn new(kind: &str, measure: &str, params: Value, value: C64) -> Self {
        Record {
            schema: SCHEMA,
            build: build_id(),
            kind: kind.into(),
            measure: measure.into(),
            params,
            value_re: value.re,
            value_im: value.im,
            phase: value.arg(),
            magnitude: value.norm(),
            sectors: 0,
            seed: None,
            runtime_s: 0.0,
            stderr: None,
            prediction: None,
            error: None,
        }
    }

    pub fn value(&self) -> C64 {
        C64::new(self.value_re, self.value_im)
    }

    pub fn failure(kind: &str, measure: &str, params: Value, err: &Error) -> Self {
        let mut r = Record::new(kind, measure, params, C64::new(f64::NAN, f64::NAN));
        r.phase = f64::NAN;
        r.magnitude = f64::NAN;
        r.error = Some(err.to_string());
        r
    }

    pub fn from_kitaev(m: &MeasureResult, config: Value) -> Self {
        let mut r = Record::new("kitaev", &m.measure, config, m.value);
        r.phase = m.phase;
        r.magnitude = m.magnitude;
        r.sectors = m.sectors_evaluated;
        r.runtime_s = m.wall_time_s;
        r
    }

    pub fn from_chern(m: &ChernResult, config: Value) -> Self {
        let mut r = Record::new("chern", &m.measure, config, m.value);
        r.sectors = 1;
        r.runtime_s = m.wall_time_s;
        r
    }

    pub fn from_estimate(measure: &str, e: &Estimate, config: Value, seed: u64, runtime_s: f64) -> Self {
        let mut r = Record::new("laughlin", measure, config, e.mean);
        r.seed = Some(seed);
        r.stderr = Some(e.stderr);
        r.runtime_s = runtime_s;
        r
    }

    pub fn with_prediction(mut self, p: f64) -> Self {
        self.prediction = Some(p);
        self
    }
}

pub fn to_json(records: &[Record]) -> Result<String> {
    Ok(serde_json::to_string_pretty(records)?)
}

/// Accepts a single record or an array of records.
pub fn from_json(text: &str) -> Result<Vec<Record>> {
    let v: Value = serde_json::from_str(text)?;
    let out: Vec<Record> = match v {
        Value::Array(_) => serde_json::from_value(v)?,
        Value::Object(_) => vec![serde_json::from_value(v)?],
        _ => return Err(Error::Parse("expected a record or an array of records".into())),
    };
    if let Some(r) = out.iter().find(|r| r.schema != SCHEMA) {
        return Err(Error::Parse(format!("unsupported schema {}", r.schema)));
    }
    Ok(out)
}

// JSON has no NaN; failed runs carry their numbers as null.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

pub fn write_json(path: &Path, records: &[Record]) -> Result<()> {
    fs::write(path, to_json(records)? + "\n")?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Vec<Record>> {
    from_json(&fs::read_to_string(path)?)
}

/// Scan series as CSV: one row per grid value.
pub fn scan_csv(param: &str, grid: &[f64], records: &[Record]) -> Result<String> {
    if grid.len() != records.len() {
        return Err(Error::SizeMismatch { expected: grid.len(), got: records.len() });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([param, "measure", "value_re", "value_im", "phase", "phase_unwrapped", "magnitude", "sectors", "runtime_s"])
        .map_err(csv_err)?;
    let unwrapped = unwrap_phases(&records.iter().map(|r| r.phase).collect::<Vec<_>>());
    for ((g, r), u) in grid.iter().zip(records).zip(unwrapped) {
        w.write_record([
            g.to_string(),
            r.measure.clone(),
            r.value_re.to_string(),
            r.value_im.to_string(),
            r.phase.to_string(),
            u.to_string(),
            r.magnitude.to_string(),
            r.sectors.to_string(),
            r.runtime_s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Raw Monte Carlo bins, one row per bin: `label, bin, re, im`. Bins of
/// successive chains are concatenated in rotation order.
pub fn bins_csv(label: &str, values: &[f64], estimates: &[Estimate]) -> Result<String> {
    if values.len() != estimates.len() {
        return Err(Error::SizeMismatch { expected: values.len(), got: estimates.len() });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([label, "bin", "re", "im"]).map_err(csv_err)?;
    for (v, e) in values.iter().zip(estimates) {
        for (k, b) in e.bins.iter().enumerate() {
            w.write_record([v.to_string(), k.to_string(), b.re.to_string(), b.im.to_string()]).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Nearest-branch continuation of a phase series.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(phases.len());
    for &p in phases {
        match out.last() {
            None => out.push(p),
            Some(&prev) => out.push(prev + crate::predict::wrap_phase(p - prev)),
        }
    }
    out
}

/// Below this predicted magnitude the comparison uses absolute error.
pub const ABSOLUTE_FALLBACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub measure: String,
    pub numeric: f64,
    pub predicted: f64,
    pub error: f64,
    pub relative: bool,
    pub pass: bool,
}

/// `|arg_num − arg_pred| / |arg_pred|`, or the absolute difference when the
/// prediction is essentially zero.
pub fn compare_phase(measure: &str, numeric: f64, predicted: f64, tol: f64) -> Comparison {
    let diff = crate::predict::wrap_phase(numeric - predicted).abs();
    let relative = predicted.abs() >= ABSOLUTE_FALLBACK;
    let error = if relative { diff / predicted.abs() } else { diff };
    Comparison { measure: measure.into(), numeric, predicted, error, relative, pass: error < tol }
}

pub fn comparison_table(rows: &[Comparison]) -> String {
    let mut s = String::from("measure    numeric       predicted     error        kind  status\n");
    for r in rows {
        s.push_str(&format!(
            "{:<10} {:<13.7} {:<13.7} {:<12.3e} {:<5} {}\n",
            r.measure,
            r.numeric,
            r.predicted,
            r.error,
            if r.relative { "rel" } else { "abs" },
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    s
}

/// Sectioned `key = value` text. Keys are returned as `section.key`; keys
/// before the first header have no prefix. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse(format!("line {}: unclosed section", ln + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("line {}: expected key = value", ln + 1)))?;
        let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key {key}", ln + 1)));
        }
    }
    Ok(out)
}

/// Parses `start:stop:count` into `count` evenly spaced values.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Parse(format!("grid must be start:stop:count, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| (a * (n - 1 - k) as f64 + b * k as f64) / (n - 1) as f64).collect(),
    })
}

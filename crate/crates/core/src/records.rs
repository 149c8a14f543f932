//! Sweep configuration files, CSV experiment records and plot data.
//!
//! Config files hold one `key = value` pair per line; `#` starts a comment.
//! Required keys: `dist`, `n_list`, `delta`, `oracle`, `approx`, `grid.m`,
//! `grid.s`, `out`. Optional: `seed`, `h`, `samples`, `tail_tol`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::harness::{SweepConfig, SweepResult};

pub const CSV_HEADER: [&str; 12] = [
    "dist",
    "n",
    "delta",
    "x",
    "approx_kind",
    "approx_value",
    "oracle_kind",
    "oracle_value",
    "oracle_half_width",
    "abs_err_per_delta",
    "seed",
    "timestamp",
];

/// Prefix of `approx_kind` on per-`n` summary rows.
pub const SUMMARY_PREFIX: &str = "sup_";

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub dist: String,
    pub n: u64,
    pub delta: f64,
    pub x: f64,
    pub approx_kind: String,
    pub approx_value: f64,
    pub oracle_kind: String,
    pub oracle_value: f64,
    pub oracle_half_width: f64,
    pub abs_err_per_delta: f64,
    pub seed: u64,
    pub timestamp: String,
}

impl ExperimentRecord {
    pub fn is_summary(&self) -> bool {
        self.approx_kind.starts_with(SUMMARY_PREFIX)
    }

    fn fields(&self) -> [String; 12] {
        [
            self.dist.clone(),
            self.n.to_string(),
            num(self.delta),
            num(self.x),
            self.approx_kind.clone(),
            num(self.approx_value),
            self.oracle_kind.clone(),
            num(self.oracle_value),
            num(self.oracle_half_width),
            num(self.abs_err_per_delta),
            self.seed.to_string(),
            self.timestamp.clone(),
        ]
    }
}

/// 17 significant digits, enough for an exact `f64` round trip.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn now_timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// One row per grid point followed by one summary row per `n`.
pub fn records_from_sweep(
    cfg: &SweepConfig,
    results: &[SweepResult],
    timestamp: &str,
) -> Vec<ExperimentRecord> {
    let mut rows = Vec::new();
    let oracle_kind = cfg.oracle.as_str();
    for res in results {
        let row = |kind: String, p: &crate::harness::PointError| ExperimentRecord {
            dist: cfg.dist.clone(),
            n: res.n,
            delta: cfg.delta,
            x: p.x,
            approx_kind: kind,
            approx_value: p.approx_value,
            oracle_kind: oracle_kind.to_string(),
            oracle_value: p.oracle.value,
            oracle_half_width: p.oracle.error_half_width,
            abs_err_per_delta: p.abs_err_per_delta,
            seed: cfg.seed,
            timestamp: timestamp.to_string(),
        };
        for p in &res.points {
            rows.push(row(res.approx.as_str().to_string(), p));
        }
        rows.push(row(
            format!("{SUMMARY_PREFIX}{}", res.approx.as_str()),
            res.sup_point(),
        ));
    }
    rows
}

pub fn write_csv_to<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    write_csv_to(BufWriter::new(File::create(path)?), records)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim().parse().map_err(|_| Error::Config {
        key: CSV_HEADER[i].to_string(),
        reason: format!("cannot parse `{raw}` on line {line}"),
    })
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Config {
            key: "header".into(),
            reason: format!("expected `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(ExperimentRecord {
            dist: field(&rec, 0, line)?,
            n: field(&rec, 1, line)?,
            delta: field(&rec, 2, line)?,
            x: field(&rec, 3, line)?,
            approx_kind: field(&rec, 4, line)?,
            approx_value: field(&rec, 5, line)?,
            oracle_kind: field(&rec, 6, line)?,
            oracle_value: field(&rec, 7, line)?,
            oracle_half_width: field(&rec, 8, line)?,
            abs_err_per_delta: field(&rec, 9, line)?,
            seed: field(&rec, 10, line)?,
            timestamp: field(&rec, 11, line)?,
        });
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    read_csv_from(File::open(path)?)
}

/// `(n, sup error)` pairs from summary rows, in file order.
pub fn summary_points(records: &[ExperimentRecord]) -> Vec<(u64, f64)> {
    records
        .iter()
        .filter(|r| r.is_summary())
        .map(|r| (r.n, r.abs_err_per_delta))
        .collect()
}

/// Two whitespace-separated columns `ln n` and `ln err`.
pub fn write_plot_data(path: &Path, points: &[(u64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# ln_n ln_sup_err")?;
    for &(n, e) in points.iter().filter(|p| p.1 > 0.0) {
        writeln!(w, "{} {}", num((n as f64).ln()), num(e.ln()))?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed sweep config file.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepFile {
    pub config: SweepConfig,
    pub out: PathBuf,
    /// Seed given in the file, if any.
    pub seed: Option<u64>,
}

const REQUIRED: [&str; 8] = [
    "dist", "n_list", "delta", "oracle", "approx", "grid.m", "grid.s", "out",
];
const OPTIONAL: [&str; 4] = ["seed", "h", "samples", "tail_tol"];

fn cfg_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| cfg_err(key, format!("cannot parse `{raw}`: {e}")))
}

pub fn parse_config(text: &str) -> Result<SweepFile> {
    let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(line, format!("line {} is not `key = value`", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
            return Err(cfg_err(key, "unknown key"));
        }
        if value.is_empty() {
            return Err(cfg_err(key, "empty value"));
        }
        if kv.insert(key, value).is_some() {
            return Err(cfg_err(key, "given more than once"));
        }
    }
    if let Some(missing) = REQUIRED.iter().find(|k| !kv.contains_key(*k)) {
        return Err(cfg_err(missing, "missing"));
    }
    let n_list = kv["n_list"]
        .split(',')
        .map(|s| parse_value::<u64>("n_list", s.trim()))
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = SweepConfig::new(kv["dist"], n_list, parse_value("delta", kv["delta"])?);
    cfg.oracle = kv["oracle"]
        .parse()
        .map_err(|e: String| cfg_err("oracle", e))?;
    cfg.approx = kv["approx"]
        .parse()
        .map_err(|e: String| cfg_err("approx", e))?;
    cfg.grid_m = parse_value("grid.m", kv["grid.m"])?;
    cfg.grid_s = parse_value("grid.s", kv["grid.s"])?;
    let seed = kv.get("seed").map(|s| parse_value("seed", s)).transpose()?;
    if let Some(v) = kv.get("h") {
        cfg.h = parse_value("h", v)?;
    }
    if let Some(v) = kv.get("samples") {
        cfg.samples = parse_value("samples", v)?;
    }
    if let Some(v) = kv.get("tail_tol") {
        cfg.tail_tol = parse_value("tail_tol", v)?;
    }
    cfg.seed = seed.unwrap_or(0);
    cfg.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => cfg_err(name, reason),
        Error::UnknownDistribution { name, valid } => cfg_err(
            "dist",
            format!("unknown `{name}`; valid: {}", valid.join(", ")),
        ),
        other => other,
    })?;
    Ok(SweepFile {
        config: cfg,
        out: PathBuf::from(kv["out"]),
        seed,
    })
}

pub fn read_config(path: &Path) -> Result<SweepFile> {
    parse_config(&std::fs::read_to_string(path)?)
}

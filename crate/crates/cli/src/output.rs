//! Result rows, the CSV table and the JSON summary.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::Serialize;

pub const CSV_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COLUMNS: [&str; 7] = ["experiment", "t", "epsilon", "quantity", "value", "tolerance", "status"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Info,
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
            Status::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "pass" => Some(Status::Pass),
            "fail" => Some(Status::Fail),
            "info" => Some(Status::Info),
            "error" => Some(Status::Error),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub t: Option<f64>,
    pub epsilon: Option<f64>,
    pub quantity: String,
    pub value: Value,
    pub tolerance: Option<f64>,
    pub status: Status,
    /// Library operation that produced the value.
    pub source: &'static str,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), String> {
    let file = File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(COLUMNS).map_err(|e| e.to_string())?;
    for r in rows {
        let value = match &r.value {
            Value::Num(x) => num(*x),
            Value::Text(s) => s.clone(),
        };
        let tol = r.tolerance.map(num).unwrap_or_default();
        w.write_record([r.experiment.as_str(), &opt(r.t), &opt(r.epsilon), &r.quantity, &value, &tol, r.status.as_str()])
            .map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: usize,
    pub failed: usize,
    pub errors: usize,
    pub runtime_seconds: f64,
    /// Quantity name to the library operation that produced it.
    pub sources: BTreeMap<String, String>,
}

impl ExperimentSummary {
    pub fn from_rows(name: &str, kind: &str, seed: u64, rows: &[Row], runtime_seconds: f64) -> Self {
        let checks = rows.iter().filter(|r| matches!(r.status, Status::Pass | Status::Fail)).count();
        let failed = rows.iter().filter(|r| r.status == Status::Fail).count();
        let errors = rows.iter().filter(|r| r.status == Status::Error).count();
        let sources = rows.iter().map(|r| (r.quantity.clone(), r.source.to_string())).collect();
        Self { name: name.into(), kind: kind.into(), seed, pass: failed == 0 && errors == 0, checks, failed, errors, runtime_seconds, sources }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary<'a, C: Serialize> {
    pub tool: &'static str,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub seed: u64,
    pub threads: usize,
    pub pass: bool,
    pub experiments: Vec<ExperimentSummary>,
    pub config: &'a C,
}

pub fn write_summary<C: Serialize>(path: &Path, summary: &Summary<C>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| e.to_string())?;
    std::fs::write(path, text + "\n").map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Per-experiment tallies read back from a results table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub info: usize,
    pub error: usize,
    pub failing: Vec<String>,
}

pub fn read_tallies(path: &Path) -> Result<Vec<(String, Tally)>, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let header: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    if header != COLUMNS {
        return Err(format!("unexpected columns {header:?}"));
    }
    let mut out: Vec<(String, Tally)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let status = Status::parse(&record[6]).ok_or_else(|| format!("unknown status {:?}", &record[6]))?;
        let name = record[0].to_string();
        let idx = match out.iter().position(|(n, _)| *n == name) {
            Some(i) => i,
            None => {
                out.push((name, Tally::default()));
                out.len() - 1
            }
        };
        let tally = &mut out[idx].1;
        match status {
            Status::Pass => tally.pass += 1,
            Status::Fail => {
                tally.fail += 1;
                tally.failing.push(format!("{} (t={}, ε={}) = {}", &record[3], &record[1], &record[2], &record[4]));
            }
            Status::Info => tally.info += 1,
            Status::Error => {
                tally.error += 1;
                tally.failing.push(format!("error: {}", &record[4]));
            }
        }
    }
    Ok(out)
}

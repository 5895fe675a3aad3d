//! Shared CLI plumbing: the exit-code error type, small columnar CSV
//! readers for regression/study inputs, and run-metadata sidecars.

use chrono::NaiveDate;
use gridtrace_core::baseline::BaselineError;
use gridtrace_core::ingest::IngestError;
use gridtrace_core::learners::LearnError;
use gridtrace_core::regress::RegressError;
use gridtrace_core::studies::StudyError;
use gridtrace_core::viz::VizError;
use serde::Serialize;
use std::path::Path;

/// Exit-code contract: 0 success, 2 usage/validation, 3 I/O, 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::BadSpec(_) | LearnError::UnknownFeature(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<RegressError> for CliError {
    fn from(e: RegressError) -> Self {
        match e {
            RegressError::BadSpec(_) | RegressError::UnknownFeature(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::UnsupportedLevel(_) => CliError::Usage(e.to_string()),
            BaselineError::Learn(l) => l.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Baseline(b) => b.into(),
            StudyError::Regress(r) => r.into(),
            StudyError::Learn(l) => l.into(),
            StudyError::Misaligned(_) | StudyError::UnitMismatch { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<VizError> for CliError {
    fn from(e: VizError) -> Self {
        match e {
            VizError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<gridtrace_core::frame::FrameError> for CliError {
    fn from(e: gridtrace_core::frame::FrameError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("bad JSON: {e}"))
    }
}

/// Columnar numeric CSV: header with column names, numeric rows.
pub fn read_columns(path: &Path) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| usage(format!("{}: empty file", path.display())))?;
    let names: Vec<String> = header
        .trim_end_matches('\r')
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut columns: Vec<(String, Vec<f64>)> =
        names.into_iter().map(|n| (n, Vec::new())).collect();
    for (i, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(usage(format!(
                "{} row {}: {} fields for {} columns",
                path.display(),
                i + 2,
                fields.len(),
                columns.len()
            )));
        }
        for (col, field) in columns.iter_mut().zip(fields) {
            let v: f64 = field.trim().parse().map_err(|_| {
                usage(format!(
                    "{} row {}: bad number {field:?}",
                    path.display(),
                    i + 2
                ))
            })?;
            col.1.push(v);
        }
    }
    Ok(columns)
}

/// Dated value CSV: header `date,<name>`, rows `YYYY-MM-DD,value`.
pub fn read_dated(path: &Path) -> Result<Vec<(NaiveDate, f64)>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let _header = lines
        .next()
        .ok_or_else(|| usage(format!("{}: empty file", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (d, v) = line
            .split_once(',')
            .ok_or_else(|| usage(format!("{} row {}: expected date,value", path.display(), i + 2)))?;
        let date = NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d")
            .map_err(|_| usage(format!("{} row {}: bad date {d:?}", path.display(), i + 2)))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{} row {}: bad number {v:?}", path.display(), i + 2)))?;
        out.push((date, value));
    }
    out.sort_by_key(|(d, _)| *d);
    Ok(out)
}

pub fn parse_date(s: &str) -> Result<NaiveDate, CliError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| usage(format!("bad date {s:?}, expected YYYY-MM-DD")))
}

/// Run metadata written next to every artifact so outputs are auditable
/// and byte-stable (no wall-clock fields).
#[derive(Serialize)]
pub struct RunMeta<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub inputs: Vec<String>,
}

pub fn write_meta(path: &Path, meta: &RunMeta<'_>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// Writes a JSON report with an embedded meta block.
pub fn write_report<T: Serialize>(
    path: &Path,
    meta: &RunMeta<'_>,
    body: &T,
) -> Result<(), CliError> {
    let doc = serde_json::json!({
        "meta": { "command": meta.command, "seed": meta.seed, "inputs": meta.inputs },
        "report": body,
    });
    std::fs::write(path, serde_json::to_string_pretty(&doc).expect("report serializes") + "\n")?;
    Ok(())
}

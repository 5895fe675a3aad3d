//! Wide-frame CSV loading, repair, and quality control.
//!
//! The on-disk format is fixed: header `date,0,1,...,23`, dates as
//! `YYYY-MM-DD`, empty fields for missing cells, LF written (CRLF accepted).
//! Repairs interpolate short gaps, fall back to week-aligned history for
//! long ones, and every touched cell lands in a [`QualityReport`].

use crate::frame::{align_week, flatten, Timestamp, WideFrame, HOURS_PER_DAY};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bad-header: expected `date,0,1,...,23`, got {0:?}")]
    BadHeader(String),
    #[error("bad-cell: row {row} column {column}: {reason}")]
    BadCell {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("dup-date: {0}")]
    DupDate(NaiveDate),
    #[error("window-too-long: {window_hours}h rolling window exceeds the {span_hours}h frame span")]
    WindowTooLong { window_hours: usize, span_hours: usize },
    #[error("bad-rule: {0}")]
    BadRule(String),
    #[error("io-error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Frame(#[from] crate::frame::FrameError),
}

/// Repair and flagging parameters. One rule object carries the settings of
/// the gap-interpolate, week-fill and outlier-flag rule kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityRule {
    /// Longest gap (hours) closed by linear interpolation; longer gaps use week-aligned fill.
    pub max_gap_hours: usize,
    /// Robust z-score threshold for outlier flagging.
    pub z_threshold: f64,
    /// Rolling window length in days for the outlier median/MAD.
    pub window_days: usize,
}

impl Default for QualityRule {
    fn default() -> Self {
        Self {
            max_gap_hours: 3,
            z_threshold: 5.0,
            window_days: 7,
        }
    }
}

impl QualityRule {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.max_gap_hours < 1 {
            return Err(IngestError::BadRule("max_gap_hours must be >= 1".into()));
        }
        if self.z_threshold <= 0.0 {
            return Err(IngestError::BadRule("z_threshold must be positive".into()));
        }
        if self.window_days < 1 {
            return Err(IngestError::BadRule("window_days must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QualityAction {
    FilledInterpolate,
    FilledWeekAligned,
    FlaggedOutlier,
    LeftMissing,
}

/// One touched cell: what happened, and the before/after values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityEntry {
    pub ts: Timestamp,
    pub action: QualityAction,
    pub old: Option<f64>,
    pub new: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QualityReport {
    pub entries: Vec<QualityEntry>,
}

impl QualityReport {
    pub fn count(&self, action: QualityAction) -> usize {
        self.entries.iter().filter(|e| e.action == action).count()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One JSON object per line, append-friendly.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}", serde_json::to_string(e).expect("entry serializes"));
        }
        out
    }
}

/// Loads a wide-frame CSV; rows come back sorted, duplicate dates rejected.
pub fn load_csv(
    path: impl AsRef<Path>,
    region: &str,
    variable: &str,
    unit: &str,
) -> Result<WideFrame, IngestError> {
    let file = std::fs::File::open(path)?;
    read_csv(BufReader::new(file), region, variable, unit)
}

/// Same as [`load_csv`] over any reader; useful for in-memory fixtures.
pub fn read_csv(
    reader: impl Read,
    region: &str,
    variable: &str,
    unit: &str,
) -> Result<WideFrame, IngestError> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(IngestError::BadHeader(String::new())),
    };
    let header = header.trim_end_matches('\r');
    if header != expected_header() {
        return Err(IngestError::BadHeader(header.to_string()));
    }
    let mut data = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in lines.enumerate() {
        let row_no = i + 2; // 1-based, after the header
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != HOURS_PER_DAY + 1 {
            return Err(IngestError::BadCell {
                row: row_no,
                column: "date".into(),
                reason: format!("expected 25 fields, got {}", fields.len()),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d").map_err(|_| {
            IngestError::BadCell {
                row: row_no,
                column: "date".into(),
                reason: format!("invalid date {:?}", fields[0]),
            }
        })?;
        if !seen.insert(date) {
            return Err(IngestError::DupDate(date));
        }
        let mut row = [None; HOURS_PER_DAY];
        for (h, cell) in fields[1..].iter().enumerate() {
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| IngestError::BadCell {
                row: row_no,
                column: h.to_string(),
                reason: format!("unparseable number {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(IngestError::BadCell {
                    row: row_no,
                    column: h.to_string(),
                    reason: format!("non-finite value {cell:?}"),
                });
            }
            row[h] = Some(v);
        }
        data.push((date, row));
    }
    Ok(WideFrame::new(region, variable, unit, data)?)
}

fn expected_header() -> String {
    let mut h = String::from("date");
    for i in 0..HOURS_PER_DAY {
        let _ = write!(h, ",{i}");
    }
    h
}

/// Serializes a frame back to the wide CSV format (LF line endings).
pub fn to_csv_string(frame: &WideFrame) -> String {
    let mut out = expected_header();
    out.push('\n');
    for (date, row) in frame.dates().iter().zip(frame.rows()) {
        let _ = write!(out, "{}", date.format("%Y-%m-%d"));
        for cell in row {
            out.push(',');
            if let Some(v) = cell {
                let _ = write!(out, "{v}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(frame: &WideFrame, path: impl AsRef<Path>) -> Result<(), IngestError> {
    std::fs::write(path, to_csv_string(frame))?;
    Ok(())
}

/// Flags cells whose deviation from the rolling-window median exceeds
/// `z_threshold` robust sigmas (MAD x 1.4826). Flags come back sorted.
pub fn detect_outliers(
    frame: &WideFrame,
    rule: &QualityRule,
) -> Result<Vec<Timestamp>, IngestError> {
    rule.validate()?;
    let series = flatten(frame);
    let n = series.len();
    let window = rule.window_days * HOURS_PER_DAY;
    if window >= n {
        return Err(IngestError::WindowTooLong {
            window_hours: window,
            span_hours: n,
        });
    }
    let half = window / 2;
    let values = series.values();
    let mut flags = Vec::new();
    let mut sample = Vec::with_capacity(window + 1);
    for i in 0..n {
        let Some(v) = values[i] else { continue };
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        sample.clear();
        sample.extend(values[lo..=hi].iter().flatten().copied());
        if sample.len() < 3 {
            continue;
        }
        sample.sort_by(f64::total_cmp);
        let med = median_sorted(&sample);
        let mut devs: Vec<f64> = sample.iter().map(|s| (s - med).abs()).collect();
        devs.sort_by(f64::total_cmp);
        let robust_sigma = median_sorted(&devs) * 1.4826;
        if (v - med).abs() > rule.z_threshold * robust_sigma {
            flags.push(series.timestamps()[i]);
        }
    }
    Ok(flags)
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Best-effort gap repair. Gaps of at most `max_gap_hours` are linearly
/// interpolated; longer gaps take the week-aligned value from one year
/// back when the frame has it; whatever remains is reported as left
/// missing. Present cells are never touched.
pub fn fill_missing(
    frame: &WideFrame,
    rule: &QualityRule,
) -> Result<(WideFrame, QualityReport), IngestError> {
    rule.validate()?;
    let series = flatten(frame);
    let n = series.len();
    let values = series.values();
    let timestamps = series.timestamps();
    let mut repaired = frame.clone();
    let mut report = QualityReport::default();

    let mut i = 0;
    while i < n {
        if values[i].is_some() {
            i += 1;
            continue;
        }
        let gap_start = i;
        while i < n && values[i].is_none() {
            i += 1;
        }
        let gap_end = i; // exclusive
        let gap_len = gap_end - gap_start;
        let before = gap_start.checked_sub(1).and_then(|j| values[j]);
        let after = values.get(gap_end).copied().flatten();

        if gap_len <= rule.max_gap_hours {
            if let (Some(a), Some(b)) = (before, after) {
                let steps = (gap_len + 1) as f64;
                for (k, idx) in (gap_start..gap_end).enumerate() {
                    let t = timestamps[idx];
                    let filled = a + (b - a) * (k + 1) as f64 / steps;
                    repaired.set(t.date(), t.hour(), filled)?;
                    report.entries.push(QualityEntry {
                        ts: t,
                        action: QualityAction::FilledInterpolate,
                        old: None,
                        new: Some(filled),
                    });
                }
                continue;
            }
        }
        // Long gap, or a short one at the frame edge: try the week-aligned
        // value from one year back, else leave missing.
        for idx in gap_start..gap_end {
            let t = timestamps[idx];
            let source = align_week(t.date(), 1);
            match frame.get(source, t.hour()) {
                Some(v) => {
                    repaired.set(t.date(), t.hour(), v)?;
                    report.entries.push(QualityEntry {
                        ts: t,
                        action: QualityAction::FilledWeekAligned,
                        old: None,
                        new: Some(v),
                    });
                }
                None => {
                    report.entries.push(QualityEntry {
                        ts: t,
                        action: QualityAction::LeftMissing,
                        old: None,
                        new: None,
                    });
                }
            }
        }
    }
    Ok((repaired, report))
}

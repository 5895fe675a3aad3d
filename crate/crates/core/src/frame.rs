//! Wide-frame data model for hourly grid time series.
//!
//! A [`WideFrame`] stores one variable for one region as a date-by-hour
//! matrix: rows are calendar dates, columns are the 24 hours of the day,
//! cells are optional (absent = missing). All calendar-aware operations
//! (aggregation, date/week alignment, filtering) live here.

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("empty-frame: operation requires at least one row")]
    EmptyFrame,
    #[error("bad-range: start {start} is after end {end}")]
    BadRange { start: NaiveDate, end: NaiveDate },
    #[error("dup-date: date {0} appears more than once")]
    DupDate(NaiveDate),
    #[error("bad-value: non-finite value at {0}")]
    NonFinite(Timestamp),
    #[error("bad-unit: unit label must be non-empty")]
    EmptyUnit,
    #[error("bad-timestamp: {0}")]
    BadTimestamp(String),
    #[error("zero-variance: series {0} is constant on the pairwise overlap")]
    ZeroVariance(usize),
    #[error("no-overlap: series {a} and {b} share fewer than 3 present timestamps")]
    NoOverlap { a: usize, b: usize },
    #[error("misaligned: series have mismatched timestamps")]
    Misaligned,
}

/// One hour of one calendar day. Serializes as `YYYY-MM-DDTHH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    date: NaiveDate,
    hour: u8,
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Timestamp {
    pub fn new(date: NaiveDate, hour: u8) -> Result<Self, FrameError> {
        if hour > 23 {
            return Err(FrameError::BadTimestamp(format!("hour {hour} out of 0-23")));
        }
        Ok(Self { date, hour })
    }

    pub fn from_ymdh(year: i32, month: u32, day: u32, hour: u8) -> Result<Self, FrameError> {
        let date = NaiveDate::from_ymd_opt(year, month, day)
            .ok_or_else(|| FrameError::BadTimestamp(format!("{year}-{month:02}-{day:02} is not a calendar date")))?;
        Self::new(date, hour)
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn hour(&self) -> u8 {
        self.hour
    }

    pub fn year(&self) -> i32 {
        self.date.year()
    }

    pub fn month(&self) -> u32 {
        self.date.month()
    }

    pub fn day(&self) -> u32 {
        self.date.day()
    }

    /// Parses the `YYYY-MM-DDTHH` form used by baseline CSV output.
    pub fn parse(s: &str) -> Result<Self, FrameError> {
        let (d, h) = s
            .split_once('T')
            .ok_or_else(|| FrameError::BadTimestamp(format!("expected YYYY-MM-DDTHH, got {s:?}")))?;
        let date = NaiveDate::parse_from_str(d, "%Y-%m-%d")
            .map_err(|_| FrameError::BadTimestamp(format!("bad date part in {s:?}")))?;
        let hour: u8 = h
            .parse()
            .map_err(|_| FrameError::BadTimestamp(format!("bad hour part in {s:?}")))?;
        Self::new(date, hour)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}T{:02}", self.date.format("%Y-%m-%d"), self.hour)
    }
}

/// Aggregation periods understood by [`aggregate_mean`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationLevel {
    Hourly,
    Daily,
    Monthly,
}

/// Date-rows by hour-columns matrix of one variable for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct WideFrame {
    region: String,
    variable: String,
    unit: String,
    dates: Vec<NaiveDate>,
    rows: Vec<[Option<f64>; HOURS_PER_DAY]>,
}

impl WideFrame {
    /// Builds a frame from unordered rows. Rows are sorted by date;
    /// duplicate dates and non-finite values are rejected.
    pub fn new(
        region: impl Into<String>,
        variable: impl Into<String>,
        unit: impl Into<String>,
        mut data: Vec<(NaiveDate, [Option<f64>; HOURS_PER_DAY])>,
    ) -> Result<Self, FrameError> {
        let unit = unit.into();
        if unit.is_empty() {
            return Err(FrameError::EmptyUnit);
        }
        data.sort_by_key(|(d, _)| *d);
        for pair in data.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(FrameError::DupDate(pair[0].0));
            }
        }
        for (date, row) in &data {
            for (h, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    if !v.is_finite() {
                        return Err(FrameError::NonFinite(Timestamp::new(*date, h as u8)?));
                    }
                }
            }
        }
        let (dates, rows) = data.into_iter().unzip();
        Ok(Self {
            region: region.into(),
            variable: variable.into(),
            unit,
            dates,
            rows,
        })
    }

    pub fn empty(
        region: impl Into<String>,
        variable: impl Into<String>,
        unit: impl Into<String>,
    ) -> Result<Self, FrameError> {
        Self::new(region, variable, unit, Vec::new())
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn variable(&self) -> &str {
        &self.variable
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn rows(&self) -> &[[Option<f64>; HOURS_PER_DAY]] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn row_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Cell lookup; `None` when the date is absent or the cell is missing.
    pub fn get(&self, date: NaiveDate, hour: u8) -> Option<f64> {
        let idx = self.row_index(date)?;
        self.rows[idx][hour as usize]
    }

    /// Replaces one cell. The value must be finite.
    pub fn set(&mut self, date: NaiveDate, hour: u8, value: f64) -> Result<(), FrameError> {
        if !value.is_finite() {
            return Err(FrameError::NonFinite(Timestamp::new(date, hour)?));
        }
        let idx = self
            .row_index(date)
            .ok_or_else(|| FrameError::BadTimestamp(format!("date {date} not in frame")))?;
        self.rows[idx][hour as usize] = Some(value);
        Ok(())
    }
}

/// Flattened chronological view of a frame (or any hourly/periodic series).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesView {
    timestamps: Vec<Timestamp>,
    values: Vec<Option<f64>>,
}

impl SeriesView {
    pub fn new(timestamps: Vec<Timestamp>, values: Vec<Option<f64>>) -> Result<Self, FrameError> {
        if timestamps.len() != values.len() {
            return Err(FrameError::Misaligned);
        }
        for pair in timestamps.windows(2) {
            if pair[0] >= pair[1] {
                return Err(FrameError::BadTimestamp(format!(
                    "timestamps not strictly increasing at {}",
                    pair[1]
                )));
            }
        }
        for (t, v) in timestamps.iter().zip(&values) {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(FrameError::NonFinite(*t));
                }
            }
        }
        Ok(Self { timestamps, values })
    }

    /// Consecutive hourly series starting at `start`.
    pub fn hourly_from(start: Timestamp, values: Vec<Option<f64>>) -> Self {
        let mut timestamps = Vec::with_capacity(values.len());
        let mut date = start.date();
        let mut hour = start.hour();
        for _ in 0..values.len() {
            timestamps.push(Timestamp { date, hour });
            hour += 1;
            if hour == 24 {
                hour = 0;
                date += Duration::days(1);
            }
        }
        Self { timestamps, values }
    }

    /// Binary-search lookup of one timestamp's value.
    pub fn value_at(&self, at: Timestamp) -> Option<f64> {
        self.timestamps
            .binary_search(&at)
            .ok()
            .and_then(|i| self.values[i])
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Iterator over (timestamp, value) pairs where the value is present.
    pub fn present(&self) -> impl Iterator<Item = (Timestamp, f64)> + '_ {
        self.timestamps
            .iter()
            .zip(&self.values)
            .filter_map(|(t, v)| v.map(|v| (*t, v)))
    }

    /// Present values only, in chronological order.
    pub fn present_values(&self) -> Vec<f64> {
        self.values.iter().filter_map(|v| *v).collect()
    }
}

/// Flattens a frame into one chronological hourly series; missing cells stay missing.
pub fn flatten(frame: &WideFrame) -> SeriesView {
    let mut timestamps = Vec::with_capacity(frame.n_rows() * HOURS_PER_DAY);
    let mut values = Vec::with_capacity(frame.n_rows() * HOURS_PER_DAY);
    for (date, row) in frame.dates.iter().zip(&frame.rows) {
        for (h, cell) in row.iter().enumerate() {
            timestamps.push(Timestamp {
                date: *date,
                hour: h as u8,
            });
            values.push(*cell);
        }
    }
    SeriesView { timestamps, values }
}

/// Mean of all present values per period. Periods with no present values
/// yield missing; counts never include missing cells.
pub fn aggregate_mean(frame: &WideFrame, level: AggregationLevel) -> Result<SeriesView, FrameError> {
    if frame.is_empty() {
        return Err(FrameError::EmptyFrame);
    }
    match level {
        AggregationLevel::Hourly => Ok(flatten(frame)),
        AggregationLevel::Daily => {
            let mut timestamps = Vec::with_capacity(frame.n_rows());
            let mut values = Vec::with_capacity(frame.n_rows());
            for (date, row) in frame.dates.iter().zip(&frame.rows) {
                timestamps.push(Timestamp { date: *date, hour: 0 });
                values.push(mean_of_present(row.iter().copied()));
            }
            Ok(SeriesView { timestamps, values })
        }
        AggregationLevel::Monthly => {
            let mut timestamps = Vec::new();
            let mut values = Vec::new();
            let mut i = 0;
            while i < frame.n_rows() {
                let (y, m) = (frame.dates[i].year(), frame.dates[i].month());
                let mut sum = 0.0;
                let mut count = 0usize;
                let mut j = i;
                while j < frame.n_rows()
                    && frame.dates[j].year() == y
                    && frame.dates[j].month() == m
                {
                    for cell in frame.rows[j].iter().flatten() {
                        sum += cell;
                        count += 1;
                    }
                    j += 1;
                }
                timestamps.push(Timestamp {
                    date: NaiveDate::from_ymd_opt(y, m, 1).expect("first of month"),
                    hour: 0,
                });
                values.push(if count > 0 { Some(sum / count as f64) } else { None });
                i = j;
            }
            Ok(SeriesView { timestamps, values })
        }
    }
}

fn mean_of_present(cells: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in cells.flatten() {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Keeps only rows with `start <= date <= end`; metadata unchanged.
pub fn filter_dates(
    frame: &WideFrame,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<WideFrame, FrameError> {
    if start > end {
        return Err(FrameError::BadRange { start, end });
    }
    let data = frame
        .dates
        .iter()
        .zip(&frame.rows)
        .filter(|(d, _)| **d >= start && **d <= end)
        .map(|(d, r)| (*d, *r))
        .collect();
    WideFrame::new(
        frame.region.clone(),
        frame.variable.clone(),
        frame.unit.clone(),
        data,
    )
}

/// Same month and day, `years_back` years earlier. Feb 29 collapses to
/// Feb 28 when the target year is not a leap year.
pub fn align_date(d: NaiveDate, years_back: u32) -> NaiveDate {
    let target_year = d.year() - years_back as i32;
    NaiveDate::from_ymd_opt(target_year, d.month(), d.day())
        .or_else(|| NaiveDate::from_ymd_opt(target_year, 2, 28))
        .expect("aligned date")
}

/// Shifts back by exactly 364 days per year gap, preserving the weekday.
pub fn align_week(d: NaiveDate, years_back: u32) -> NaiveDate {
    d - Duration::days(364 * years_back as i64)
}

/// Pairwise Pearson correlation over the intersection of present timestamps.
pub fn pearson_matrix(series: &[SeriesView]) -> Result<Vec<Vec<f64>>, FrameError> {
    if series.len() < 2 {
        return Err(FrameError::NoOverlap { a: 0, b: 0 });
    }
    let n = series.len();
    let mut out = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = pearson_pair(&series[i], &series[j], i, j)?;
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

fn pearson_pair(a: &SeriesView, b: &SeriesView, ia: usize, ib: usize) -> Result<f64, FrameError> {
    // Merge-join on strictly increasing timestamps.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let (mut p, mut q) = (0usize, 0usize);
    while p < a.len() && q < b.len() {
        match a.timestamps[p].cmp(&b.timestamps[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                if let (Some(x), Some(y)) = (a.values[p], b.values[q]) {
                    xs.push(x);
                    ys.push(y);
                }
                p += 1;
                q += 1;
            }
        }
    }
    if xs.len() < 3 {
        return Err(FrameError::NoOverlap { a: ia, b: ib });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(FrameError::ZeroVariance(ia));
    }
    if syy == 0.0 {
        return Err(FrameError::ZeroVariance(ib));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

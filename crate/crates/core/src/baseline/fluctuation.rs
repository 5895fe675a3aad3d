//! Distribution-based estimation: the Kolmogorov-Smirnov distance between
//! monthly ECDFs, and the fluctuation index I = |1 - 2 F_w(x)| which keeps
//! the distributional view at full hourly granularity. The ECDF uses the
//! mid-rank convention F(x) = (#below + half #ties + 1/2) / (n + 1), so I
//! stays strictly inside (0, 1) and ties resolve deterministically.

use super::{BaselineError, BaselineSeries};
use crate::frame::{align_date, AggregationLevel, SeriesView, Timestamp};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::VecDeque;

/// Smallest ECDF sample the index accepts; below this the 1/(n+1)
/// quantization exceeds 0.03.
pub const MIN_WINDOW_SAMPLE: usize = 30;

/// Sliding-window shape for the empirical CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowSpec {
    /// Past-only window over the previous `w` hourly slots (no lookahead).
    TrailingHours(usize),
    /// All other observations of the same calendar month.
    CalendarMonth,
}

/// A realized window: its shape and the sample inside it (kept sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionWindow {
    spec: WindowSpec,
    sample: Vec<f64>,
}

impl DistributionWindow {
    pub fn new(spec: WindowSpec, mut sample: Vec<f64>) -> Result<Self, BaselineError> {
        if sample.is_empty() {
            return Err(BaselineError::EmptyWindow);
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self { spec, sample })
    }

    pub fn spec(&self) -> WindowSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    /// Mid-rank ECDF of the window evaluated at `x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        midrank_cdf(&self.sample, x)
    }

    /// Fluctuation index of `x` against this window.
    pub fn index_of(&self, x: f64) -> f64 {
        (1.0 - 2.0 * self.ecdf(x)).abs()
    }
}

fn midrank_cdf(sorted: &[f64], x: f64) -> f64 {
    let n = sorted.len();
    let less = sorted.partition_point(|v| *v < x);
    let less_eq = sorted.partition_point(|v| *v <= x);
    let eq = less_eq - less;
    (less as f64 + 0.5 * eq as f64 + 0.5) / (n as f64 + 1.0)
}

/// Kolmogorov-Smirnov distance between the ECDFs of two windows:
/// sup_x |F_a(x) - F_b(x)|, always in [0, 1].
pub fn distribution_distance(
    a: &DistributionWindow,
    b: &DistributionWindow,
) -> Result<f64, BaselineError> {
    let (xs, ys) = (a.sample(), b.sample());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let x = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / n - j as f64 / m).abs());
    }
    // One sample exhausted: the other side still steps up to 1.
    sup = sup.max((1.0 - j as f64 / m).abs().max((1.0 - i as f64 / n).abs()));
    Ok(sup.min(1.0))
}

/// Rank-based abnormality per observation, in [0, 1]. Values are missing
/// over the warm-up (trailing mode) or wherever the window sample is
/// smaller than [`MIN_WINDOW_SAMPLE`].
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationSeries {
    timestamps: Vec<Timestamp>,
    values: Vec<Option<f64>>,
    sample_sizes: Vec<usize>,
    window: WindowSpec,
}

impl FluctuationSeries {
    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// ECDF sample size behind each index value (0 where missing).
    pub fn sample_sizes(&self) -> &[usize] {
        &self.sample_sizes
    }

    pub fn window(&self) -> WindowSpec {
        self.window
    }

    pub fn to_series(&self) -> SeriesView {
        SeriesView::new(self.timestamps.clone(), self.values.clone()).expect("index series")
    }

    /// Daily mean index I_ymd over the present hourly values.
    pub fn daily_means(&self) -> Vec<(NaiveDate, f64)> {
        period_means(&self.to_series(), |t| t.date())
            .into_iter()
            .collect()
    }
}

pub fn fluctuation_index(
    series: &SeriesView,
    window: WindowSpec,
) -> Result<FluctuationSeries, BaselineError> {
    match window {
        WindowSpec::TrailingHours(w) => {
            if w < MIN_WINDOW_SAMPLE {
                return Err(BaselineError::SmallWindow {
                    got: w,
                    min: MIN_WINDOW_SAMPLE,
                });
            }
            trailing_index(series, w)
        }
        WindowSpec::CalendarMonth => month_index(series),
    }
}

fn trailing_index(series: &SeriesView, w: usize) -> Result<FluctuationSeries, BaselineError> {
    let n = series.len();
    let mut values = Vec::with_capacity(n);
    let mut sizes = Vec::with_capacity(n);
    let mut slots: VecDeque<Option<f64>> = VecDeque::with_capacity(w + 1);
    let mut sorted: Vec<f64> = Vec::with_capacity(w);
    for v in series.values() {
        // The window covers the previous w slots, current point excluded.
        match v {
            Some(x) if sorted.len() >= MIN_WINDOW_SAMPLE => {
                values.push(Some((1.0 - 2.0 * midrank_cdf(&sorted, *x)).abs()));
                sizes.push(sorted.len());
            }
            _ => {
                values.push(None);
                sizes.push(0);
            }
        }
        slots.push_back(*v);
        if let Some(x) = v {
            let pos = sorted.partition_point(|s| *s < *x);
            sorted.insert(pos, *x);
        }
        if slots.len() > w {
            if let Some(Some(old)) = slots.pop_front() {
                let pos = sorted.partition_point(|s| *s < old);
                sorted.remove(pos);
            }
        }
    }
    Ok(FluctuationSeries {
        timestamps: series.timestamps().to_vec(),
        values,
        sample_sizes: sizes,
        window: WindowSpec::TrailingHours(w),
    })
}

fn month_index(series: &SeriesView) -> Result<FluctuationSeries, BaselineError> {
    let mut months: BTreeMap<(i32, u32), Vec<f64>> = BTreeMap::new();
    for (t, v) in series.present() {
        months.entry((t.year(), t.month())).or_default().push(v);
    }
    for sample in months.values_mut() {
        sample.sort_by(f64::total_cmp);
    }
    let n = series.len();
    let mut values = Vec::with_capacity(n);
    let mut sizes = Vec::with_capacity(n);
    for (t, v) in series.timestamps().iter().zip(series.values()) {
        let Some(x) = v else {
            values.push(None);
            sizes.push(0);
            continue;
        };
        let sample = &months[&(t.year(), t.month())];
        let m = sample.len() - 1; // window excludes the observation itself
        if m < MIN_WINDOW_SAMPLE {
            values.push(None);
            sizes.push(0);
            continue;
        }
        let less = sample.partition_point(|s| *s < *x);
        let eq = sample.partition_point(|s| *s <= *x) - less - 1;
        let f = (less as f64 + 0.5 * eq as f64 + 0.5) / (m as f64 + 1.0);
        values.push(Some((1.0 - 2.0 * f).abs()));
        sizes.push(m);
    }
    Ok(FluctuationSeries {
        timestamps: series.timestamps().to_vec(),
        values,
        sample_sizes: sizes,
        window: WindowSpec::CalendarMonth,
    })
}

/// Year-over-year baseline for an index series: hourly compares each cell
/// with its date-aligned counterpart, daily and monthly compare period
/// means (the period mean is the plain average of present index values).
pub fn index_baseline(
    idx: &FluctuationSeries,
    years_back: u32,
    level: AggregationLevel,
) -> BaselineSeries {
    let series = idx.to_series();
    match level {
        AggregationLevel::Hourly => {
            let values = series
                .timestamps()
                .iter()
                .map(|t| {
                    Timestamp::new(align_date(t.date(), years_back), t.hour())
                        .ok()
                        .and_then(|src| series.value_at(src))
                })
                .collect();
            let out = SeriesView::new(series.timestamps().to_vec(), values).expect("aligned");
            BaselineSeries::new("index", years_back, out)
        }
        AggregationLevel::Daily => {
            let means = period_means(&series, |t| t.date());
            let (ts, vals): (Vec<_>, Vec<_>) = means
                .keys()
                .map(|d| {
                    let src = align_date(*d, years_back);
                    (
                        Timestamp::new(*d, 0).expect("hour zero"),
                        means.get(&src).copied(),
                    )
                })
                .unzip();
            BaselineSeries::new(
                "index",
                years_back,
                SeriesView::new(ts, vals).expect("daily index baseline"),
            )
        }
        AggregationLevel::Monthly => {
            let means = period_means(&series, |t| {
                NaiveDate::from_ymd_opt(t.year(), t.month(), 1).expect("month start")
            });
            let (ts, vals): (Vec<_>, Vec<_>) = means
                .keys()
                .map(|d| {
                    let src = align_date(*d, years_back);
                    (
                        Timestamp::new(*d, 0).expect("hour zero"),
                        means.get(&src).copied(),
                    )
                })
                .unzip();
            BaselineSeries::new(
                "index",
                years_back,
                SeriesView::new(ts, vals).expect("monthly index baseline"),
            )
        }
    }
}

/// Mean of present values per period key.
pub(crate) fn period_means(
    series: &SeriesView,
    key: impl Fn(&Timestamp) -> NaiveDate,
) -> BTreeMap<NaiveDate, f64> {
    let mut acc: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for (t, v) in series.present() {
        let e = acc.entry(key(&t)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (sum, count))| (k, sum / count as f64))
        .collect()
}

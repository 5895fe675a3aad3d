//! The five counterfactual baseline families: date/week alignment, trend
//! and detrend estimation, machine-learning backcasts, the distribution
//! based fluctuation index, and probabilistic quantile baselines.
//!
//! A baseline is the value a quantity would have taken absent the event;
//! every estimator here maps observations to such reference values.

mod fluctuation;
mod probabilistic;

pub use fluctuation::{
    distribution_distance, fluctuation_index, index_baseline, DistributionWindow, FluctuationSeries,
    WindowSpec,
};
pub use probabilistic::{
    confidence_interval, probabilistic_baseline, ProbFamily, ProbabilisticBaseline,
    QUANTILE_LEVELS,
};

use crate::frame::{align_date, align_week, FrameError, SeriesView, Timestamp, WideFrame};
use crate::learners::{fit, FeatureMatrix, FittedModel, LearnError, LearnerSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("misaligned: {0}")]
    Misaligned(String),
    #[error("empty-window: distribution window needs at least one sample")]
    EmptyWindow,
    #[error("small-window: window of {got} samples is below the minimum of {min}")]
    SmallWindow { got: usize, min: usize },
    #[error("short-series: {0}")]
    ShortSeries(String),
    #[error("missing-values: {0}")]
    MissingValues(String),
    #[error("unsupported-level: {0}% (supported: 50, 80)")]
    UnsupportedLevel(u32),
    #[error("empty-ensemble: at least one member model is required")]
    EmptyEnsemble,
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// A point counterfactual: one baseline value (possibly missing) per target
/// timestamp, tagged with the generating method.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSeries {
    pub method: String,
    pub years_back: u32,
    series: SeriesView,
}

impl BaselineSeries {
    pub fn new(method: impl Into<String>, years_back: u32, series: SeriesView) -> Self {
        Self {
            method: method.into(),
            years_back,
            series,
        }
    }

    pub fn series(&self) -> &SeriesView {
        &self.series
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        self.series.timestamps()
    }

    pub fn values(&self) -> &[Option<f64>] {
        self.series.values()
    }

    /// Timestamps whose aligned source was absent.
    pub fn missing_count(&self) -> usize {
        self.series.values().iter().filter(|v| v.is_none()).count()
    }

    pub fn value_at(&self, at: Timestamp) -> Option<f64> {
        self.series.value_at(at)
    }
}

/// Baseline at (y,m,d,t) is the observation at (y-k,m,d,t); Feb 29 falls
/// back to Feb 28 when the source year is not a leap year.
pub fn date_aligned(frame: &WideFrame, years_back: u32) -> BaselineSeries {
    aligned_by(frame, years_back, "date-aligned", |d| align_date(d, years_back))
}

/// Baseline from the date 364 * years_back days earlier, which shares the
/// target's weekday.
pub fn week_aligned(frame: &WideFrame, years_back: u32) -> BaselineSeries {
    aligned_by(frame, years_back, "week-aligned", |d| align_week(d, years_back))
}

fn aligned_by(
    frame: &WideFrame,
    years_back: u32,
    method: &str,
    align: impl Fn(chrono::NaiveDate) -> chrono::NaiveDate,
) -> BaselineSeries {
    let flat = crate::frame::flatten(frame);
    let values = flat
        .timestamps()
        .iter()
        .map(|t| frame.get(align(t.date()), t.hour()))
        .collect();
    let series = SeriesView::new(flat.timestamps().to_vec(), values).expect("aligned series");
    BaselineSeries::new(method, years_back, series)
}

/// Centered moving average over `w` points, shrinking symmetrically at the
/// edges; missing values are skipped with renormalization.
pub fn trend_ma(series: &SeriesView, w: usize) -> Result<SeriesView, BaselineError> {
    if w < 1 {
        return Err(BaselineError::ShortSeries("window must be >= 1".into()));
    }
    if series.present().next().is_none() {
        return Err(BaselineError::ShortSeries(
            "series has no present values".into(),
        ));
    }
    let n = series.len();
    let half = w / 2;
    let values = series.values();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let reach = half.min(i).min(n - 1 - i);
        let window = &values[i - reach..=i + reach];
        let mut sum = 0.0;
        let mut count = 0usize;
        for v in window.iter().flatten() {
            sum += v;
            count += 1;
        }
        out.push((count > 0).then(|| sum / count as f64));
    }
    Ok(SeriesView::new(series.timestamps().to_vec(), out).expect("trend series"))
}

/// In-sample one-step-ahead fitted values of a CSS-calibrated ARMA model;
/// the d + p warm-up points come back missing.
pub fn trend_model(
    series: &SeriesView,
    p: usize,
    d: usize,
    q: usize,
) -> Result<SeriesView, BaselineError> {
    let values: Vec<f64> = series
        .values()
        .iter()
        .map(|v| {
            v.ok_or_else(|| {
                BaselineError::MissingValues(
                    "ARMA trend estimation needs a gap-free series; run fill_missing first".into(),
                )
            })
        })
        .collect::<Result<_, _>>()?;
    let model = crate::learners::fit_arma_css(&values, p, d, q)?;
    Ok(SeriesView::new(series.timestamps().to_vec(), model.fitted()).expect("fitted series"))
}

/// Trend-as-baseline with date alignment: the baseline of T at (y,m,d,t) is
/// T at (y-k,m,d,t), looked up inside the trend series itself.
pub fn trend_baseline(trend: &SeriesView, years_back: u32) -> BaselineSeries {
    let values = trend
        .timestamps()
        .iter()
        .map(|t| {
            let src_date = align_date(t.date(), years_back);
            Timestamp::new(src_date, t.hour())
                .ok()
                .and_then(|src| trend.value_at(src))
        })
        .collect();
    let series = SeriesView::new(trend.timestamps().to_vec(), values).expect("trend baseline");
    BaselineSeries::new("trend", years_back, series)
}

/// Detrend estimator: the trend itself is the baseline of the raw series,
/// so the residual X - T isolates any additional change.
pub fn detrend_baseline(
    series: &SeriesView,
    trend: &SeriesView,
) -> Result<BaselineSeries, BaselineError> {
    if series.timestamps() != trend.timestamps() {
        return Err(BaselineError::Misaligned(
            "series and trend cover different timestamps".into(),
        ));
    }
    let out = SeriesView::new(trend.timestamps().to_vec(), trend.values().to_vec())
        .expect("detrend baseline");
    Ok(BaselineSeries::new("detrend", 0, out))
}

/// Observation minus baseline wherever both are present.
pub fn residuals(series: &SeriesView, baseline: &BaselineSeries) -> Vec<Option<f64>> {
    series
        .timestamps()
        .iter()
        .zip(series.values())
        .map(|(t, v)| match (v, baseline.value_at(*t)) {
            (Some(x), Some(b)) => Some(x - b),
            _ => None,
        })
        .collect()
}

/// Base-model lineup for an ensemble backcast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<LearnerSpec>,
}

impl EnsembleSpec {
    pub fn single(spec: LearnerSpec) -> Self {
        Self { members: vec![spec] }
    }
}

/// Fitted ensemble; predictions are the arithmetic mean of the members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    members: Vec<FittedModel>,
}

impl Ensemble {
    pub fn members(&self) -> &[FittedModel] {
        &self.members
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, BaselineError> {
        let mut acc = vec![0.0; x.n_rows()];
        for member in &self.members {
            for (a, p) in acc.iter_mut().zip(member.predict(x)?) {
                *a += p;
            }
        }
        let k = self.members.len() as f64;
        for a in acc.iter_mut() {
            *a /= k;
        }
        Ok(acc)
    }
}

/// Combines already-fitted models into a mean ensemble.
pub fn ensemble_average(members: Vec<FittedModel>) -> Result<Ensemble, BaselineError> {
    if members.is_empty() {
        return Err(BaselineError::EmptyEnsemble);
    }
    Ok(Ensemble { members })
}

/// Calendar feature rows for the given timestamps: hour-of-day and
/// day-of-year harmonics, a weekend dummy, and the weekday index. The
/// default feature set for backcasts when no exogenous data is supplied.
pub fn calendar_features(timestamps: &[Timestamp]) -> FeatureMatrix {
    use chrono::Datelike;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut columns: Vec<(String, Vec<f64>)> = vec![
        ("hour_sin".into(), Vec::new()),
        ("hour_cos".into(), Vec::new()),
        ("doy_sin".into(), Vec::new()),
        ("doy_cos".into(), Vec::new()),
        ("weekend".into(), Vec::new()),
        ("weekday".into(), Vec::new()),
    ];
    for t in timestamps {
        let hour = t.hour() as f64 / 24.0;
        let doy = t.date().ordinal() as f64 / 366.0;
        let wd = t.date().weekday().num_days_from_monday() as f64;
        columns[0].1.push((two_pi * hour).sin());
        columns[1].1.push((two_pi * hour).cos());
        columns[2].1.push((two_pi * doy).sin());
        columns[3].1.push((two_pi * doy).cos());
        columns[4].1.push(if wd >= 5.0 { 1.0 } else { 0.0 });
        columns[5].1.push(wd);
    }
    FeatureMatrix::from_columns(columns).expect("calendar features")
}

/// Training data and prediction horizon for a backcast. Training rows must
/// come from pre-event periods only; the estimator never sees post-event
/// targets.
#[derive(Debug)]
pub struct BackcastData<'a> {
    pub train_features: &'a FeatureMatrix,
    pub train_target: &'a [f64],
    pub horizon_features: &'a FeatureMatrix,
    pub horizon: &'a [Timestamp],
}

/// Fits the ensemble on pre-event data and predicts the horizon.
pub fn backcast(
    data: &BackcastData<'_>,
    spec: &EnsembleSpec,
) -> Result<(BaselineSeries, Ensemble), BaselineError> {
    if spec.members.is_empty() {
        return Err(BaselineError::EmptyEnsemble);
    }
    if data.train_features.n_rows() != data.train_target.len() {
        return Err(BaselineError::Misaligned(format!(
            "{} training rows vs {} targets",
            data.train_features.n_rows(),
            data.train_target.len()
        )));
    }
    if data.horizon_features.n_rows() != data.horizon.len() {
        return Err(BaselineError::Misaligned(format!(
            "{} horizon rows vs {} horizon timestamps",
            data.horizon_features.n_rows(),
            data.horizon.len()
        )));
    }
    let members = spec
        .members
        .iter()
        .map(|m| fit(m, data.train_features, data.train_target))
        .collect::<Result<Vec<_>, _>>()?;
    let ensemble = ensemble_average(members)?;
    let preds = ensemble.predict(data.horizon_features)?;
    let series = SeriesView::new(data.horizon.to_vec(), preds.into_iter().map(Some).collect())?;
    Ok((BaselineSeries::new("backcast", 0, series), ensemble))
}

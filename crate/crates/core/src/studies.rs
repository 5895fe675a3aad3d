//! Study recipes built on the baseline and regression machinery: monthly
//! peak-demand reduction (point and probabilistic), extreme-price counting
//! via the fluctuation index, duck curves and renewable shares, the
//! gas-price/pandemic OLS designs, and mobility-enhanced load forecasting.

use crate::baseline::{
    fluctuation_index, BaselineError, BaselineSeries, FluctuationSeries, ProbabilisticBaseline,
    WindowSpec, QUANTILE_LEVELS,
};
use crate::frame::{FrameError, SeriesView, Timestamp, WideFrame};
use crate::learners::{fit, FeatureMatrix, LearnError, LearnerSpec, LossKind};
use crate::regress::{fit_ols, OlsReport, OlsSpec, RegressError, Term};
use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("zero-baseline: baseline for {0} is zero")]
    ZeroBaseline(NaiveDate),
    #[error("unit-mismatch: demand in {demand:?} but solar in {solar:?}")]
    UnitMismatch { demand: String, solar: String },
    #[error("share-overflow: renewable share {value:.2}% at {at} exceeds 100%")]
    ShareOverflow { at: Timestamp, value: f64 },
    #[error("zero-actual: actual value at {0} is zero")]
    ZeroActual(String),
    #[error("no-calibration-data: the calibration window selects no observations")]
    NoCalibrationData,
    #[error("no-data: {0}")]
    NoData(String),
    #[error("misaligned: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Monthly peak-demand reduction: alpha = mean over days of
/// (B_ymd - Dpeak_ymd) / B_ymd x 100.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakDemandReport {
    pub year: i32,
    pub month: u32,
    pub alpha_percent: f64,
    pub days_used: usize,
}

/// Daily peak of the hourly demand per date of the given month.
fn daily_peaks(demand: &WideFrame, year: i32, month: u32) -> Vec<(NaiveDate, f64)> {
    demand
        .dates()
        .iter()
        .zip(demand.rows())
        .filter(|(d, _)| d.year() == year && d.month() == month)
        .filter_map(|(d, row)| {
            row.iter()
                .flatten()
                .cloned()
                .fold(None::<f64>, |acc, v| Some(acc.map_or(v, |m| m.max(v))))
                .map(|peak| (*d, peak))
        })
        .collect()
}

pub fn peak_demand_reduction(
    demand: &WideFrame,
    baseline: &BaselineSeries,
    year: i32,
    month: u32,
) -> Result<PeakDemandReport, StudyError> {
    let peaks = daily_peaks(demand, year, month);
    let mut sum = 0.0;
    let mut days = 0usize;
    for (date, peak) in peaks {
        let ts = Timestamp::new(date, 0)?;
        let Some(b) = baseline.value_at(ts) else { continue };
        if b == 0.0 {
            return Err(StudyError::ZeroBaseline(date));
        }
        sum += (b - peak) / b * 100.0;
        days += 1;
    }
    if days == 0 {
        return Err(StudyError::NoData(format!(
            "no days with both demand and baseline in {year}-{month:02}"
        )));
    }
    Ok(PeakDemandReport {
        year,
        month,
        alpha_percent: sum / days as f64,
        days_used: days,
    })
}

/// Per-quantile peak reduction plus interval widths and the zero-crossing
/// check ("do the quantiles pass through zero").
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbabilisticPeakReport {
    pub year: i32,
    pub month: u32,
    pub levels: [f64; 5],
    pub alphas: [f64; 5],
    /// alpha(q75) - alpha(q25).
    pub width_50: f64,
    /// alpha(q90) - alpha(q10).
    pub width_80: f64,
    pub zero_in_50_band: bool,
    pub zero_in_80_band: bool,
    pub days_used: usize,
}

pub fn probabilistic_peak_reduction(
    demand: &WideFrame,
    pb: &ProbabilisticBaseline,
    year: i32,
    month: u32,
) -> Result<ProbabilisticPeakReport, StudyError> {
    let peaks = daily_peaks(demand, year, month);
    let mut alphas = [0.0f64; 5];
    let mut days = 0usize;
    for (date, peak) in &peaks {
        let ts = Timestamp::new(*date, 0)?;
        let Some(pos) = pb.timestamps().iter().position(|t| t == &ts) else {
            continue;
        };
        for (k, alpha) in alphas.iter_mut().enumerate() {
            let b = pb.tracks()[k][pos];
            if b == 0.0 {
                return Err(StudyError::ZeroBaseline(*date));
            }
            *alpha += (b - peak) / b * 100.0;
        }
        days += 1;
    }
    if days == 0 {
        return Err(StudyError::NoData(format!(
            "no days with both demand and probabilistic baseline in {year}-{month:02}"
        )));
    }
    for alpha in alphas.iter_mut() {
        *alpha /= days as f64;
    }
    Ok(ProbabilisticPeakReport {
        year,
        month,
        levels: QUANTILE_LEVELS,
        alphas,
        width_50: alphas[3] - alphas[1],
        width_80: alphas[4] - alphas[0],
        zero_in_50_band: alphas[1] <= 0.0 && 0.0 <= alphas[3],
        zero_in_80_band: alphas[0] <= 0.0 && 0.0 <= alphas[4],
        days_used: days,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountBucket {
    Weekly,
    Monthly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremeCount {
    pub label: String,
    pub start: NaiveDate,
    pub count: usize,
}

/// Default extreme-price threshold: the fluctuation index matching the
/// two-sided 2-sigma tail of a Gaussian.
pub const EXTREME_PRICE_THRESHOLD: f64 = 0.9544;

/// Counts hours whose fluctuation index reaches the threshold, bucketed by
/// week or calendar month. Weekly blocks are 7 days anchored at the frame's
/// first date, so ranges picked 364 days apart line up block for block.
pub fn extreme_price_count(
    price: &WideFrame,
    window: WindowSpec,
    threshold: f64,
    bucket: CountBucket,
) -> Result<Vec<ExtremeCount>, StudyError> {
    let series = crate::frame::flatten(price);
    let idx = fluctuation_index(&series, window)?;
    extreme_counts_of(&idx, threshold, bucket)
}

/// Same counting over an already-computed index series.
pub fn extreme_counts_of(
    idx: &FluctuationSeries,
    threshold: f64,
    bucket: CountBucket,
) -> Result<Vec<ExtremeCount>, StudyError> {
    let Some(first) = idx.timestamps().first() else {
        return Ok(Vec::new());
    };
    let anchor = first.date();
    let mut counts: std::collections::BTreeMap<NaiveDate, usize> = std::collections::BTreeMap::new();
    for (t, v) in idx.timestamps().iter().zip(idx.values()) {
        let key = match bucket {
            CountBucket::Weekly => {
                let days = (t.date() - anchor).num_days();
                anchor + chrono::Duration::days((days / 7) * 7)
            }
            CountBucket::Monthly => {
                NaiveDate::from_ymd_opt(t.year(), t.month(), 1).expect("month start")
            }
        };
        let entry = counts.entry(key).or_insert(0);
        if let Some(v) = v {
            if *v >= threshold {
                *entry += 1;
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|(start, count)| ExtremeCount {
            label: match bucket {
                CountBucket::Weekly => format!("week of {start}"),
                CountBucket::Monthly => format!("{}-{:02}", start.year(), start.month()),
            },
            start,
            count,
        })
        .collect())
}

/// Residual demand profile: R = D - G_solar averaged into 24 hourly slots
/// over the period, with its max consecutive-hour ramp and peak-valley range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DuckCurveReport {
    pub profile: Vec<f64>,
    pub max_ramp: f64,
    pub range: f64,
    pub days_used: usize,
}

pub fn duck_curve(
    demand: &WideFrame,
    solar: &WideFrame,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<DuckCurveReport, StudyError> {
    if demand.unit() != solar.unit() {
        return Err(StudyError::UnitMismatch {
            demand: demand.unit().to_string(),
            solar: solar.unit().to_string(),
        });
    }
    let mut sums = [0.0f64; 24];
    let mut counts = [0usize; 24];
    let mut days = 0usize;
    for (date, row) in demand.dates().iter().zip(demand.rows()) {
        if *date < start || *date > end {
            continue;
        }
        let Some(solar_idx) = solar.row_index(*date) else { continue };
        let solar_row = &solar.rows()[solar_idx];
        let mut any = false;
        for h in 0..24 {
            if let (Some(d), Some(g)) = (row[h], solar_row[h]) {
                sums[h] += d - g;
                counts[h] += 1;
                any = true;
            }
        }
        if any {
            days += 1;
        }
    }
    if counts.iter().all(|c| *c == 0) {
        return Err(StudyError::NoData("no overlapping demand/solar cells in period".into()));
    }
    let profile: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| if *c > 0 { s / *c as f64 } else { f64::NAN })
        .collect();
    if profile.iter().any(|v| !v.is_finite()) {
        return Err(StudyError::NoData("an hourly slot has no observations in period".into()));
    }
    let max_ramp = profile
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let range = profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - profile.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DuckCurveReport {
        profile,
        max_ramp,
        range,
        days_used: days,
    })
}

/// Total renewable share per month: hydro% + solar% + wind%.
pub fn renewable_share(
    hydro: &SeriesView,
    solar: &SeriesView,
    wind: &SeriesView,
) -> Result<SeriesView, StudyError> {
    if hydro.timestamps() != solar.timestamps() || hydro.timestamps() != wind.timestamps() {
        return Err(StudyError::Misaligned(
            "share series cover different months".into(),
        ));
    }
    let mut values = Vec::with_capacity(hydro.len());
    for i in 0..hydro.len() {
        let sum = match (hydro.values()[i], solar.values()[i], wind.values()[i]) {
            (Some(a), Some(b), Some(c)) => Some(a + b + c),
            _ => None,
        };
        if let Some(v) = sum {
            if v > 100.0 {
                return Err(StudyError::ShareOverflow {
                    at: hydro.timestamps()[i],
                    value: v,
                });
            }
        }
        values.push(sum);
    }
    Ok(SeriesView::new(hydro.timestamps().to_vec(), values)?)
}

/// ARMA counterfactual for the last `study_months` points of a monthly
/// share series: calibrate on the earlier months, forecast the study span.
pub fn renewable_share_baseline(
    beta: &SeriesView,
    order: (usize, usize, usize),
    study_months: usize,
) -> Result<BaselineSeries, StudyError> {
    let values: Vec<f64> = beta
        .values()
        .iter()
        .map(|v| v.ok_or_else(|| StudyError::NoData("share series has gaps".into())))
        .collect::<Result<_, _>>()?;
    if study_months == 0 || study_months >= values.len() {
        return Err(StudyError::NoData(format!(
            "study span {study_months} must be shorter than the series ({})",
            values.len()
        )));
    }
    let split = values.len() - study_months;
    let model = crate::learners::fit_arma_css(&values[..split], order.0, order.1, order.2)?;
    let forecast = model.forecast(study_months);
    let mut out = vec![None; split];
    out.extend(forecast.into_iter().map(Some));
    Ok(BaselineSeries::new(
        "renewable-arma",
        0,
        SeriesView::new(beta.timestamps().to_vec(), out)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoiBand {
    Normal,
    Unusual,
    HighlyUnusual,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoiPoint {
    pub ts: Timestamp,
    pub loi: f64,
    pub band: LoiBand,
    pub clamped: bool,
}

/// Logit of the fluctuation index: LoI = ln(I / (1 - I)), unbounded, with
/// the classification bands attached (0.75..3 unusual, above 3 highly
/// unusual). Index values at the rank bounds are clamped into
/// [1/(n+1), n/(n+1)] and flagged.
pub fn loi(idx: &FluctuationSeries) -> Vec<LoiPoint> {
    let mut out = Vec::new();
    for ((t, v), n) in idx
        .timestamps()
        .iter()
        .zip(idx.values())
        .zip(idx.sample_sizes())
    {
        let Some(v) = v else { continue };
        let nf = *n as f64;
        let (lo, hi) = (1.0 / (nf + 1.0), nf / (nf + 1.0));
        let clamped = *v < lo || *v > hi;
        let i = v.clamp(lo, hi);
        let value = (i / (1.0 - i)).ln();
        let band = if value > 3.0 {
            LoiBand::HighlyUnusual
        } else if value >= 0.75 {
            LoiBand::Unusual
        } else {
            LoiBand::Normal
        };
        out.push(LoiPoint {
            ts: *t,
            loi: value,
            band,
            clamped,
        });
    }
    out
}

/// Logit of a single index value (no clamping).
pub fn loi_value(index: f64) -> f64 {
    (index / (1.0 - index)).ln()
}

/// Aligned daily inputs for the electricity-price factor study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceStudyInputs {
    /// Logit fluctuation index of the price, daily.
    pub loi: Vec<f64>,
    /// Gas price, daily.
    pub gas: Vec<f64>,
    /// Raw confirmed cases, daily (log1p is applied internally).
    pub cases: Vec<f64>,
    /// Pandemic dummy, 0 before the event date and 1 from it on.
    pub dummy: Vec<f64>,
}

impl PriceStudyInputs {
    fn validate(&self) -> Result<(), StudyError> {
        let n = self.loi.len();
        if self.gas.len() != n || self.cases.len() != n || self.dummy.len() != n {
            return Err(StudyError::Misaligned(
                "price study inputs have different lengths".into(),
            ));
        }
        if self.dummy.iter().any(|d| *d != 0.0 && *d != 1.0) {
            return Err(StudyError::Misaligned("dummy must be 0/1".into()));
        }
        if self.cases.iter().any(|c| *c < 0.0) {
            return Err(StudyError::Misaligned("case counts must be >= 0".into()));
        }
        Ok(())
    }

    fn matrix(&self) -> Result<FeatureMatrix, StudyError> {
        Ok(FeatureMatrix::from_columns(vec![
            ("loi".into(), self.loi.clone()),
            ("gas".into(), self.gas.clone()),
            ("dummy".into(), self.dummy.clone()),
            (
                "logcases".into(),
                self.cases.iter().map(|c| (1.0 + c).ln()).collect(),
            ),
        ])?)
    }
}

/// 0 before the event date, 1 on and after it.
pub fn pandemic_dummy(dates: &[NaiveDate], event: NaiveDate) -> Vec<f64> {
    dates
        .iter()
        .map(|d| if *d >= event { 1.0 } else { 0.0 })
        .collect()
}

/// LoI = (theta1 dummy + theta2) gas + (theta3 dummy + theta4):
/// design {dummy*gas, gas, dummy, const}.
pub fn price_regression_dummy(inputs: &PriceStudyInputs) -> Result<OlsReport, StudyError> {
    inputs.validate()?;
    let spec = OlsSpec {
        response: "loi".into(),
        terms: vec![
            Term::Interaction("dummy".into(), "gas".into()),
            Term::Linear("gas".into()),
            Term::Linear("dummy".into()),
            Term::Intercept,
        ],
    };
    Ok(fit_ols(&spec, &inputs.matrix()?)?)
}

/// LoI = theta5 gas + theta6 C + theta7 gas*C + theta8, with C = ln(1+cases):
/// design {gas, logcases, gas*logcases, const}.
pub fn price_regression_cases(inputs: &PriceStudyInputs) -> Result<OlsReport, StudyError> {
    inputs.validate()?;
    let spec = OlsSpec {
        response: "loi".into(),
        terms: vec![
            Term::Linear("gas".into()),
            Term::Linear("logcases".into()),
            Term::Interaction("gas".into(), "logcases".into()),
            Term::Intercept,
        ],
    };
    Ok(fit_ols(&spec, &inputs.matrix()?)?)
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, StudyError> {
    if actual.len() != predicted.len() {
        return Err(StudyError::Misaligned(format!(
            "{} actuals vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(StudyError::NoData("empty series for MAPE".into()));
    }
    let mut sum = 0.0;
    for (i, (a, p)) in actual.iter().zip(predicted).enumerate() {
        if *a == 0.0 {
            return Err(StudyError::ZeroActual(format!("position {i}")));
        }
        sum += ((a - p) / a).abs();
    }
    Ok(sum / actual.len() as f64 * 100.0)
}

/// Day-level inputs for the adaptive-forecast study. Everything is aligned
/// index by index; windows select row ranges by timestamp.
#[derive(Debug)]
pub struct EnhancementData<'a> {
    pub timestamps: &'a [Timestamp],
    pub features: &'a FeatureMatrix,
    pub actual: &'a [f64],
    /// Previous-day mobility aligned to each timestamp (M_{d-1}).
    pub mobility_lag: &'a [f64],
}

/// Inclusive timestamp windows. Defaults follow the study: normal period
/// Jan 1 - Mar 21, lockdown Mar 21 - Jun 30, calibration = early lockdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnhancementWindows {
    pub train: (Timestamp, Timestamp),
    pub normal: (Timestamp, Timestamp),
    pub calibration: (Timestamp, Timestamp),
    pub lockdown: (Timestamp, Timestamp),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastEnhancementReport {
    pub base_normal_mape: f64,
    pub base_lockdown_mape: f64,
    pub updated_lockdown_mape: f64,
    pub enhanced_lockdown_mape: f64,
    /// Percentage-point gains on the lockdown window relative to the base.
    pub updated_improvement_pp: f64,
    pub enhanced_improvement_pp: f64,
}

fn window_indices(ts: &[Timestamp], w: &(Timestamp, Timestamp)) -> Vec<usize> {
    ts.iter()
        .enumerate()
        .filter(|(_, t)| **t >= w.0 && **t <= w.1)
        .map(|(i, _)| i)
        .collect()
}

fn select_rows(x: &FeatureMatrix, idx: &[usize]) -> Result<FeatureMatrix, StudyError> {
    let rows: Vec<Vec<f64>> = idx.iter().map(|i| x.rows()[*i].clone()).collect();
    Ok(FeatureMatrix::new(x.names().to_vec(), rows)?)
}

/// Enhanced forecast D-hat = f_pred(...) + delta_f_enh(M_{d-1}), where the
/// enhancement is a linear model calibrated on the post-event residuals
/// (very few are needed). Also fits an "updated" comparator: the base model
/// re-fitted with the calibration observations appended.
pub fn mobility_enhanced_forecast(
    base_spec: &LearnerSpec,
    data: &EnhancementData<'_>,
    windows: &EnhancementWindows,
) -> Result<ForecastEnhancementReport, StudyError> {
    let n = data.timestamps.len();
    if data.features.n_rows() != n || data.actual.len() != n || data.mobility_lag.len() != n {
        return Err(StudyError::Misaligned(
            "enhancement inputs have different lengths".into(),
        ));
    }
    let train_idx = window_indices(data.timestamps, &windows.train);
    let normal_idx = window_indices(data.timestamps, &windows.normal);
    let calib_idx = window_indices(data.timestamps, &windows.calibration);
    let lockdown_idx = window_indices(data.timestamps, &windows.lockdown);
    if calib_idx.is_empty() {
        return Err(StudyError::NoCalibrationData);
    }
    if train_idx.is_empty() || normal_idx.is_empty() || lockdown_idx.is_empty() {
        return Err(StudyError::NoData("a study window selects no rows".into()));
    }

    let take = |idx: &[usize], v: &[f64]| idx.iter().map(|i| v[*i]).collect::<Vec<f64>>();

    // Base model on pre-event data only.
    let base = fit(
        base_spec,
        &select_rows(data.features, &train_idx)?,
        &take(&train_idx, data.actual),
    )?;
    let base_preds = base.predict(data.features)?;

    // Linear enhancement on calibration residuals vs lagged mobility.
    let calib_mob = FeatureMatrix::from_columns(vec![(
        "mobility_lag".into(),
        take(&calib_idx, data.mobility_lag),
    )])?;
    let calib_residuals: Vec<f64> = calib_idx
        .iter()
        .map(|i| data.actual[*i] - base_preds[*i])
        .collect();
    let enhancement =
        crate::learners::fit_ridge(&calib_mob, &calib_residuals, 0.0, LossKind::Squared)?;
    let all_mob = FeatureMatrix::from_columns(vec![(
        "mobility_lag".into(),
        data.mobility_lag.to_vec(),
    )])?;
    let corrections = enhancement.predict(&all_mob)?;
    let enhanced_preds: Vec<f64> = base_preds
        .iter()
        .zip(&corrections)
        .map(|(p, c)| p + c)
        .collect();

    // Fine-tuned comparator: base learner re-fitted with the calibration
    // window appended to the training data.
    let mut updated_idx = train_idx.clone();
    updated_idx.extend_from_slice(&calib_idx);
    let updated = fit(
        base_spec,
        &select_rows(data.features, &updated_idx)?,
        &take(&updated_idx, data.actual),
    )?;
    let updated_preds = updated.predict(data.features)?;

    let window_mape = |idx: &[usize], preds: &[f64]| -> Result<f64, StudyError> {
        let actual = take(idx, data.actual);
        let pred = take(idx, preds);
        mape(&actual, &pred).map_err(|e| match e {
            StudyError::ZeroActual(pos) => {
                let i: usize = pos
                    .rsplit(' ')
                    .next()
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(0);
                StudyError::ZeroActual(data.timestamps[idx[i]].to_string())
            }
            other => other,
        })
    };

    let base_normal = window_mape(&normal_idx, &base_preds)?;
    let base_lockdown = window_mape(&lockdown_idx, &base_preds)?;
    let updated_lockdown = window_mape(&lockdown_idx, &updated_preds)?;
    let enhanced_lockdown = window_mape(&lockdown_idx, &enhanced_preds)?;

    Ok(ForecastEnhancementReport {
        base_normal_mape: base_normal,
        base_lockdown_mape: base_lockdown,
        updated_lockdown_mape: updated_lockdown,
        enhanced_lockdown_mape: enhanced_lockdown,
        updated_improvement_pp: base_lockdown - updated_lockdown,
        enhanced_improvement_pp: base_lockdown - enhanced_lockdown,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::baseline::{probabilistic_baseline, EnsembleSpec, ProbFamily};
    use chrono::Duration;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    pub(crate) fn gauss(rng: &mut ChaCha8Rng) -> f64 {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn demand_frame(month_days: u32, value: impl Fn(u32, usize) -> f64) -> WideFrame {
        let rows = (1..=month_days)
            .map(|d| {
                let mut row = [None; 24];
                for (h, cell) in row.iter_mut().enumerate() {
                    *cell = Some(value(d, h));
                }
                (date(2020, 4, d), row)
            })
            .collect();
        WideFrame::new("r", "demand", "MW", rows).unwrap()
    }

    fn daily_baseline(values: impl Fn(u32) -> f64) -> BaselineSeries {
        let (ts, vals): (Vec<_>, Vec<_>) = (1..=30)
            .map(|d| {
                (
                    Timestamp::new(date(2020, 4, d), 0).unwrap(),
                    Some(values(d)),
                )
            })
            .unzip();
        BaselineSeries::new("test", 1, SeriesView::new(ts, vals).unwrap())
    }

    #[test]
    fn peak_reduction_constants() {
        let demand = demand_frame(30, |_, h| if h == 17 { 90.0 } else { 50.0 });
        let baseline = daily_baseline(|_| 100.0);
        let r = peak_demand_reduction(&demand, &baseline, 2020, 4).unwrap();
        assert!((r.alpha_percent - 10.0).abs() < 1e-12);
        assert_eq!(r.days_used, 30);

        let flat = daily_baseline(|_| 90.0);
        let r = peak_demand_reduction(&demand, &flat, 2020, 4).unwrap();
        assert!(r.alpha_percent.abs() < 1e-12);
    }

    #[test]
    fn peak_reduction_matches_hand_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let peaks: Vec<f64> = (0..30).map(|_| rng.gen_range(80.0..120.0)).collect();
        let bases: Vec<f64> = (0..30).map(|_| rng.gen_range(90.0..130.0)).collect();
        let demand = demand_frame(30, |d, h| {
            if h == 12 {
                peaks[(d - 1) as usize]
            } else {
                10.0
            }
        });
        let baseline = daily_baseline(|d| bases[(d - 1) as usize]);
        let r = peak_demand_reduction(&demand, &baseline, 2020, 4).unwrap();
        let expected = (0..30)
            .map(|i| (bases[i] - peaks[i]) / bases[i] * 100.0)
            .sum::<f64>()
            / 30.0;
        assert!((r.alpha_percent - expected).abs() < 1e-12);
    }

    #[test]
    fn peak_reduction_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let peaks: Vec<f64> = (0..30).map(|_| rng.gen_range(80.0..120.0)).collect();
        let demand = demand_frame(30, |d, _| peaks[(d - 1) as usize]);
        let baseline = daily_baseline(|d| peaks[(d - 1) as usize] + 10.0);
        let a = peak_demand_reduction(&demand, &baseline, 2020, 4).unwrap();

        let c = 3.7;
        let demand_scaled = demand_frame(30, |d, _| c * peaks[(d - 1) as usize]);
        let baseline_scaled = daily_baseline(|d| c * (peaks[(d - 1) as usize] + 10.0));
        let b = peak_demand_reduction(&demand_scaled, &baseline_scaled, 2020, 4).unwrap();
        assert!((a.alpha_percent - b.alpha_percent).abs() < 1e-12);
    }

    #[test]
    fn zero_baseline_day_is_an_error() {
        let demand = demand_frame(30, |_, _| 50.0);
        let baseline = daily_baseline(|d| if d == 15 { 0.0 } else { 100.0 });
        assert!(matches!(
            peak_demand_reduction(&demand, &baseline, 2020, 4),
            Err(StudyError::ZeroBaseline(_))
        ));
    }

    fn degenerate_pb(levels: impl Fn(usize, u32) -> f64) -> ProbabilisticBaseline {
        let ts: Vec<Timestamp> = (1..=30)
            .map(|d| Timestamp::new(date(2020, 4, d), 0).unwrap())
            .collect();
        let tracks = [
            (1..=30).map(|d| levels(0, d)).collect(),
            (1..=30).map(|d| levels(1, d)).collect(),
            (1..=30).map(|d| levels(2, d)).collect(),
            (1..=30).map(|d| levels(3, d)).collect(),
            (1..=30).map(|d| levels(4, d)).collect(),
        ];
        ProbabilisticBaseline::new(ProbFamily::Backcast, ts, tracks).unwrap()
    }

    #[test]
    fn probabilistic_reduction_degenerate_and_crossing() {
        let demand = demand_frame(30, |_, _| 100.0);
        let pb = degenerate_pb(|_, _| 110.0);
        let r = probabilistic_peak_reduction(&demand, &pb, 2020, 4).unwrap();
        for k in 1..5 {
            assert!((r.alphas[k] - r.alphas[0]).abs() < 1e-12);
        }
        assert!(r.width_50.abs() < 1e-12);

        // Tracks straddling the observation: alpha flips sign across
        // quantiles and the bands contain zero.
        let pb = degenerate_pb(|k, _| 80.0 + 10.0 * k as f64); // 80..120 around peak 100
        let r = probabilistic_peak_reduction(&demand, &pb, 2020, 4).unwrap();
        assert!(r.alphas[0] < 0.0 && r.alphas[4] > 0.0);
        assert!(r.zero_in_50_band && r.zero_in_80_band);
        // Non-decreasing in q when tracks are non-decreasing.
        for k in 1..5 {
            assert!(r.alphas[k] >= r.alphas[k - 1]);
        }
    }

    #[test]
    fn probabilistic_widths_match_subtraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let demand = demand_frame(30, |_, _| 100.0);
        let spread: Vec<f64> = (0..5).map(|k| 90.0 + 8.0 * k as f64).collect();
        let _ = &mut rng;
        let pb = degenerate_pb(|k, _| spread[k]);
        let r = probabilistic_peak_reduction(&demand, &pb, 2020, 4).unwrap();
        assert!((r.width_50 - (r.alphas[3] - r.alphas[1])).abs() < 1e-12);
        assert!((r.width_80 - (r.alphas[4] - r.alphas[0])).abs() < 1e-12);
    }

    #[test]
    fn probabilistic_reduction_via_trained_baseline() {
        // End-to-end: quantile models trained on synthetic demand history.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 800;
        let temps: Vec<f64> = (0..n).map(|_| rng.gen_range(5.0..35.0)).collect();
        let y: Vec<f64> = temps
            .iter()
            .map(|t| 60.0 + 2.0 * t + 3.0 * gauss(&mut rng))
            .collect();
        let x = FeatureMatrix::from_columns(vec![("temp".into(), temps.clone())]).unwrap();
        let horizon_ts: Vec<Timestamp> = (1..=30)
            .map(|d| Timestamp::new(date(2020, 4, d), 0).unwrap())
            .collect();
        let horizon_x = FeatureMatrix::from_columns(vec![(
            "temp".into(),
            (1..=30).map(|d| 15.0 + (d as f64) / 10.0).collect(),
        )])
        .unwrap();
        let pb = probabilistic_baseline(
            &x,
            &y,
            &EnsembleSpec::single(LearnerSpec::ridge(0.0)),
            &horizon_x,
            &horizon_ts,
            ProbFamily::Backcast,
        )
        .unwrap();
        let demand = demand_frame(30, |d, _| 85.0 + 2.0 * (15.0 + d as f64 / 10.0));
        let r = probabilistic_peak_reduction(&demand, &pb, 2020, 4).unwrap();
        for k in 1..5 {
            assert!(r.alphas[k] >= r.alphas[k - 1] - 1e-9);
        }
    }

    #[test]
    fn extreme_count_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut d = date(2020, 1, 1);
        while d <= date(2020, 3, 31) {
            let mut row = [None; 24];
            for cell in row.iter_mut() {
                *cell = Some(gauss(&mut rng));
            }
            rows.push((d, row));
            d += Duration::days(1);
        }
        let frame = WideFrame::new("r", "price", "USD/MWh", rows).unwrap();
        // Threshold 1.0 can never fire under the mid-rank ECDF.
        let counts =
            extreme_price_count(&frame, WindowSpec::CalendarMonth, 1.0, CountBucket::Monthly)
                .unwrap();
        assert!(counts.iter().all(|c| c.count == 0));
    }

    #[test]
    fn extreme_count_finds_injected_spikes() {
        // The index is rank-based, so the calm background must carry ties:
        // a discrete 8-level cycle keeps every regular point's index at
        // 0.875 or less, while the 20 spikes hit the top rank.
        let mut rows = Vec::new();
        let mut d = date(2020, 1, 1);
        let mut cell_no = 0usize;
        let mut injected = 0;
        while d <= date(2020, 2, 28) {
            let mut row = [None; 24];
            for cell in row.iter_mut() {
                let spike = cell_no % 70 == 13 && injected < 20;
                if spike {
                    injected += 1;
                    *cell = Some(1e6 + cell_no as f64);
                } else {
                    *cell = Some(20.0 + (cell_no % 8) as f64);
                }
                cell_no += 1;
            }
            rows.push((d, row));
            d += Duration::days(1);
        }
        assert_eq!(injected, 20);
        let frame = WideFrame::new("r", "price", "USD/MWh", rows).unwrap();
        let counts = extreme_price_count(
            &frame,
            WindowSpec::CalendarMonth,
            EXTREME_PRICE_THRESHOLD,
            CountBucket::Monthly,
        )
        .unwrap();
        let total: usize = counts.iter().map(|c| c.count).sum();
        assert_eq!(total, 20);
    }

    #[test]
    fn gaussian_prices_flag_two_sigma_fraction() {
        // For Gaussian prices the index exceeds 0.9544 on the two-sided
        // 2-sigma tail mass, about 4.56% of hours.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let days = 900; // ~21600 hourly cells
        let mut rows = Vec::new();
        let mut d = date(2018, 1, 1);
        for _ in 0..days {
            let mut row = [None; 24];
            for cell in row.iter_mut() {
                *cell = Some(30.0 + 8.0 * gauss(&mut rng));
            }
            rows.push((d, row));
            d += Duration::days(1);
        }
        let frame = WideFrame::new("r", "price", "USD/MWh", rows).unwrap();
        let counts = extreme_price_count(
            &frame,
            WindowSpec::CalendarMonth,
            EXTREME_PRICE_THRESHOLD,
            CountBucket::Monthly,
        )
        .unwrap();
        let flagged: usize = counts.iter().map(|c| c.count).sum();
        let fraction = flagged as f64 / (days * 24) as f64 * 100.0;
        assert!(
            (fraction - 4.56).abs() < 0.5,
            "flagged fraction {fraction:.3}%"
        );
    }

    #[test]
    fn weekly_buckets_align_across_years() {
        let mk = |start: NaiveDate| {
            let mut rows = Vec::new();
            let mut d = start;
            for _ in 0..28 {
                rows.push((d, [Some(1.0); 24]));
                d += Duration::days(1);
            }
            WideFrame::new("r", "price", "USD/MWh", rows).unwrap()
        };
        let a = mk(date(2020, 3, 2));
        let b = mk(crate::frame::align_week(date(2020, 3, 2), 1));
        let ca = extreme_price_count(&a, WindowSpec::CalendarMonth, 2.0, CountBucket::Weekly);
        let cb = extreme_price_count(&b, WindowSpec::CalendarMonth, 2.0, CountBucket::Weekly);
        // Same number of blocks with 364-day-shifted starts.
        let (ca, cb) = (ca.unwrap(), cb.unwrap());
        assert_eq!(ca.len(), cb.len());
        for (x, y) in ca.iter().zip(&cb) {
            assert_eq!((x.start - y.start).num_days(), 364);
        }
    }

    fn const_frame(variable: &str, unit: &str, value: impl Fn(u32, usize) -> f64) -> WideFrame {
        let rows = (1..=30)
            .map(|d| {
                let mut row = [None; 24];
                for (h, cell) in row.iter_mut().enumerate() {
                    *cell = Some(value(d, h));
                }
                (date(2020, 4, d), row)
            })
            .collect();
        WideFrame::new("r", variable, unit, rows).unwrap()
    }

    #[test]
    fn duck_curve_basics() {
        let demand = const_frame("demand", "MW", |_, _| 100.0);
        let zero_solar = const_frame("solar", "MW", |_, _| 0.0);
        let r = duck_curve(&demand, &zero_solar, date(2020, 4, 1), date(2020, 4, 30)).unwrap();
        assert!(r.profile.iter().all(|v| (v - 100.0).abs() < 1e-12));
        assert!(r.range.abs() < 1e-12);

        let noon_solar = const_frame("solar", "MW", |_, h| if h == 12 { 30.0 } else { 0.0 });
        let r = duck_curve(&demand, &noon_solar, date(2020, 4, 1), date(2020, 4, 30)).unwrap();
        assert!((r.profile[12] - 70.0).abs() < 1e-12);
        assert!((r.range - 30.0).abs() < 1e-12);
        assert!((r.max_ramp - 30.0).abs() < 1e-12); // hour 12 -> 13 rebound

        let wrong_unit = const_frame("solar", "GWh", |_, _| 0.0);
        assert!(matches!(
            duck_curve(&demand, &wrong_unit, date(2020, 4, 1), date(2020, 4, 30)),
            Err(StudyError::UnitMismatch { .. })
        ));
    }

    #[test]
    fn duck_curve_matches_subtraction_oracle_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d_vals: Vec<f64> = (0..30 * 24).map(|_| rng.gen_range(50.0..150.0)).collect();
        let s_vals: Vec<f64> = (0..30 * 24).map(|_| rng.gen_range(0.0..40.0)).collect();
        let demand = const_frame("demand", "MW", |d, h| d_vals[((d - 1) as usize) * 24 + h]);
        let solar = const_frame("solar", "MW", |d, h| s_vals[((d - 1) as usize) * 24 + h]);
        let r = duck_curve(&demand, &solar, date(2020, 4, 1), date(2020, 4, 30)).unwrap();
        for h in 0..24 {
            let mean: f64 = (0..30)
                .map(|d| d_vals[d * 24 + h] - s_vals[d * 24 + h])
                .sum::<f64>()
                / 30.0;
            assert!((r.profile[h] - mean).abs() < 1e-12);
        }

        // Adding a constant to demand shifts the profile but not ramp/range.
        let shifted = const_frame("demand", "MW", |d, h| d_vals[((d - 1) as usize) * 24 + h] + 500.0);
        let r2 = duck_curve(&shifted, &solar, date(2020, 4, 1), date(2020, 4, 30)).unwrap();
        assert!((r2.max_ramp - r.max_ramp).abs() < 1e-9);
        assert!((r2.range - r.range).abs() < 1e-9);
        for h in 0..24 {
            assert!((r2.profile[h] - r.profile[h] - 500.0).abs() < 1e-9);
        }
    }

    fn monthly_series(values: &[f64]) -> SeriesView {
        let ts: Vec<Timestamp> = (0..values.len())
            .map(|i| {
                let year = 2018 + (i / 12) as i32;
                let month = (i % 12) as u32 + 1;
                Timestamp::new(date(year, month, 1), 0).unwrap()
            })
            .collect();
        SeriesView::new(ts, values.iter().map(|v| Some(*v)).collect()).unwrap()
    }

    #[test]
    fn renewable_share_sums_and_overflow() {
        let h = monthly_series(&[10.0, 12.0]);
        let s = monthly_series(&[15.0, 14.0]);
        let w = monthly_series(&[5.0, 6.0]);
        let beta = renewable_share(&h, &s, &w).unwrap();
        assert_eq!(beta.values()[0], Some(30.0));
        assert_eq!(beta.values()[1], Some(32.0));

        let zero = renewable_share(
            &monthly_series(&[0.0]),
            &monthly_series(&[0.0]),
            &monthly_series(&[0.0]),
        )
        .unwrap();
        assert_eq!(zero.values()[0], Some(0.0));

        let too_much = renewable_share(
            &monthly_series(&[60.0]),
            &monthly_series(&[30.0]),
            &monthly_series(&[20.0]),
        );
        assert!(matches!(too_much, Err(StudyError::ShareOverflow { .. })));
    }

    #[test]
    fn renewable_share_arma_baseline_within_band() {
        // AR(2) share series with known parameters; the ARMA forecast of the
        // study months must stay within the simulation's dispersion band.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 120;
        let (phi1, phi2, mean, sigma) = (0.5, 0.2, 35.0, 1.0);
        let mut vals = vec![mean; n + 50];
        for t in 2..vals.len() {
            vals[t] = mean
                + phi1 * (vals[t - 1] - mean)
                + phi2 * (vals[t - 2] - mean)
                + sigma * gauss(&mut rng);
        }
        let vals = &vals[50..];
        let beta = monthly_series(vals);
        let baseline = renewable_share_baseline(&beta, (2, 0, 1), 4).unwrap();
        let marginal_sd = sigma / (1.0f64 - 0.58).sqrt(); // rough AR(2) variance bound
        for (i, v) in baseline.values().iter().enumerate() {
            if let Some(v) = v {
                let actual = vals[i];
                assert!(
                    (v - actual).abs() <= 4.0 * marginal_sd,
                    "forecast {v} vs actual {actual}"
                );
            }
        }
        assert_eq!(
            baseline.values().iter().filter(|v| v.is_some()).count(),
            4
        );
    }

    #[test]
    fn loi_values_and_bands() {
        assert!((loi_value(0.5)).abs() < 1e-12);
        assert!((loi_value(0.8) - 4.0f64.ln()).abs() < 1e-12);

        // Strictly increasing in I.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let a: f64 = rng.gen_range(0.01..0.98);
            let b: f64 = a + 0.01;
            assert!(loi_value(b) > loi_value(a));
        }
    }

    #[test]
    fn loi_series_clamps_and_classifies() {
        let mut vals: Vec<Option<f64>> = (0..200)
            .map(|i| Some(20.0 + ((i * 13) % 97) as f64 / 10.0))
            .collect();
        vals[100] = Some(1e9); // top of the window -> near upper rank bound
        let series = SeriesView::hourly_from(Timestamp::from_ymdh(2020, 1, 1, 0).unwrap(), vals);
        let idx = fluctuation_index(&series, WindowSpec::CalendarMonth).unwrap();
        let points = loi(&idx);
        let extreme = points.iter().find(|p| p.ts.to_string() == "2020-01-05T04");
        let extreme = extreme.expect("index point for the spike");
        assert!(extreme.loi > 3.0);
        assert_eq!(extreme.band, LoiBand::HighlyUnusual);
        // I = 0.8 corresponds to the unusual band.
        assert!(matches!(
            if loi_value(0.8) > 3.0 {
                LoiBand::HighlyUnusual
            } else {
                LoiBand::Unusual
            },
            LoiBand::Unusual
        ));
    }

    pub(crate) fn simulate_dummy_price_design(
        theta: [f64; 4],
        n: usize,
        sigma: f64,
        rng: &mut ChaCha8Rng,
    ) -> PriceStudyInputs {
        let gas: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..5.0)).collect();
        let dummy: Vec<f64> = (0..n).map(|i| if i >= n / 2 { 1.0 } else { 0.0 }).collect();
        let cases: Vec<f64> = dummy
            .iter()
            .map(|d| if *d > 0.0 { rng.gen_range(0.0..2000.0) } else { 0.0 })
            .collect();
        let loi: Vec<f64> = (0..n)
            .map(|i| {
                (theta[0] * dummy[i] + theta[1]) * gas[i]
                    + theta[2] * dummy[i]
                    + theta[3]
                    + sigma * gauss(rng)
            })
            .collect();
        PriceStudyInputs {
            loi,
            gas,
            cases,
            dummy,
        }
    }

    #[test]
    fn price_regression_recovers_table_style_coefficients() {
        let theta = [-2.8715, 0.8714, 5.4063, -0.6941];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let inputs = simulate_dummy_price_design(theta, 2000, 0.5, &mut rng);
        let report = price_regression_dummy(&inputs).unwrap();
        let estimates = [
            report.coefficient("dummy*gas").unwrap(),
            report.coefficient("gas").unwrap(),
            report.coefficient("dummy").unwrap(),
            report.coefficient("const").unwrap(),
        ];
        for (est, truth) in estimates.iter().zip(&theta) {
            assert!(
                (est.estimate - truth).abs() < 0.2,
                "{}: {} vs {truth}",
                est.term,
                est.estimate
            );
        }
        // theta1 and theta3 significant at 1%.
        assert!(estimates[0].p_value < 0.01);
        assert!(estimates[2].p_value < 0.01);
    }

    #[test]
    fn price_regression_zero_dummy_is_collinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut inputs = simulate_dummy_price_design([0.0, 1.0, 0.0, 0.5], 500, 0.5, &mut rng);
        inputs.dummy = vec![0.0; 500];
        assert!(matches!(
            price_regression_dummy(&inputs),
            Err(StudyError::Regress(RegressError::Collinear(_)))
        ));
    }

    #[test]
    fn price_regression_cases_null_interaction_coverage() {
        // theta7 = 0 in the generator: the interaction estimate should sit
        // within two standard errors of zero in at least 90 of 100 seeds.
        let mut within = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 600;
            let gas: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..5.0)).collect();
            let cases: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3000.0)).collect();
            let loi: Vec<f64> = (0..n)
                .map(|i| 1.5 * gas[i] + 0.8 * (1.0 + cases[i]).ln() - 4.0 + 0.7 * gauss(&mut rng))
                .collect();
            let inputs = PriceStudyInputs {
                loi,
                gas,
                cases,
                dummy: vec![0.0; n],
            };
            let report = price_regression_cases(&inputs).unwrap();
            let c = report.coefficient("gas*logcases").unwrap();
            if c.estimate.abs() <= 2.0 * c.std_error {
                within += 1;
            }
        }
        assert!(within >= 90, "interaction within 2 SE in {within}/100");
    }

    #[test]
    fn mape_contracts() {
        assert_eq!(mape(&[100.0, 100.0], &[100.0, 100.0]).unwrap(), 0.0);
        assert!((mape(&[100.0; 5], &[90.0; 5]).unwrap() - 10.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..50).map(|_| rng.gen_range(50.0..150.0)).collect();
        let p: Vec<f64> = (0..50).map(|_| rng.gen_range(50.0..150.0)).collect();
        let expected = a
            .iter()
            .zip(&p)
            .map(|(x, y)| ((x - y) / x).abs())
            .sum::<f64>()
            / 50.0
            * 100.0;
        assert!((mape(&a, &p).unwrap() - expected).abs() < 1e-12);

        assert!(matches!(
            mape(&[1.0, 0.0], &[1.0, 1.0]),
            Err(StudyError::ZeroActual(_))
        ));
    }

    /// Synthetic lockdown scenario shared with the acceptance suite:
    /// demand follows temperature and weekday, then drops proportionally to
    /// a mobility collapse after the event date.
    pub(crate) fn lockdown_scenario(
        seed: u64,
    ) -> (
        Vec<Timestamp>,
        FeatureMatrix,
        Vec<f64>,
        Vec<f64>,
        EnhancementWindows,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Long pre-event history, so a handful of calibration points barely
        // moves a re-fitted model while the mobility enhancer learns the
        // drop from the same few residuals.
        let start = date(2018, 7, 1);
        let n = 731;
        let mut timestamps = Vec::with_capacity(n);
        let mut temp = Vec::with_capacity(n);
        let mut weekend = Vec::with_capacity(n);
        let mut mobility = Vec::with_capacity(n);
        let mut actual = Vec::with_capacity(n);
        let event = date(2020, 3, 21);
        for i in 0..n {
            let d = start + Duration::days(i as i64);
            timestamps.push(Timestamp::new(d, 0).unwrap());
            let t = 15.0 + 12.0 * ((i as f64) / 58.0).sin() + gauss(&mut rng);
            let w = if (i % 7) >= 5 { 1.0 } else { 0.0 };
            let m = if d >= event {
                0.5 + 0.02 * gauss(&mut rng)
            } else {
                1.0 + 0.02 * gauss(&mut rng)
            };
            let base_load = 100.0 + 1.5 * t - 8.0 * w;
            // Lockdown drop proportional to the mobility drop (~20% dip).
            let load = base_load * (1.0 - 0.4 * (1.0 - m)) * (1.0 + 0.02 * gauss(&mut rng));
            temp.push(t);
            weekend.push(w);
            mobility.push(m);
            actual.push(load);
        }
        // Features never include mobility; M enters through the enhancer.
        let features = FeatureMatrix::from_columns(vec![
            ("temp".into(), temp),
            ("weekend".into(), weekend),
        ])
        .unwrap();
        // M_{d-1}: lag by one day (first day repeats itself).
        let mut mobility_lag = vec![mobility[0]];
        mobility_lag.extend_from_slice(&mobility[..n - 1]);
        let ts = |y: i32, m: u32, d: u32| Timestamp::new(date(y, m, d), 0).unwrap();
        let windows = EnhancementWindows {
            train: (ts(2018, 7, 1), ts(2019, 12, 31)),
            normal: (ts(2020, 1, 1), ts(2020, 3, 20)),
            calibration: (ts(2020, 3, 21), ts(2020, 3, 27)),
            lockdown: (ts(2020, 3, 28), ts(2020, 6, 30)),
        };
        (timestamps, features, actual, mobility_lag, windows)
    }

    #[test]
    fn enhancement_realizable_residual_goes_to_zero() {
        // Residuals exactly linear in lagged mobility: enhanced MAPE ~ 0.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let start = date(2020, 1, 1);
        let timestamps: Vec<Timestamp> = (0..n)
            .map(|i| Timestamp::new(start + Duration::days(i as i64), 0).unwrap())
            .collect();
        let x_vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mob: Vec<f64> = (0..n).map(|_| rng.gen_range(0.4..1.0)).collect();
        let actual: Vec<f64> = (0..n)
            .map(|i| 50.0 + 5.0 * x_vals[i] + 20.0 * mob[i])
            .collect();
        let features = FeatureMatrix::from_columns(vec![("x".into(), x_vals)]).unwrap();
        let ts_at = |i: usize| timestamps[i];
        let windows = EnhancementWindows {
            train: (ts_at(0), ts_at(99)),
            normal: (ts_at(80), ts_at(99)),
            calibration: (ts_at(100), ts_at(119)),
            lockdown: (ts_at(120), ts_at(199)),
        };
        let data = EnhancementData {
            timestamps: &timestamps,
            features: &features,
            actual: &actual,
            mobility_lag: &mob,
        };
        let report =
            mobility_enhanced_forecast(&LearnerSpec::ridge(0.0), &data, &windows).unwrap();
        assert!(
            report.enhanced_lockdown_mape < 0.5,
            "enhanced mape {}",
            report.enhanced_lockdown_mape
        );
    }

    #[test]
    fn enhancement_null_mobility_changes_little() {
        // Mobility uncorrelated with residuals: improvement ~ 0.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 300;
        let start = date(2020, 1, 1);
        let timestamps: Vec<Timestamp> = (0..n)
            .map(|i| Timestamp::new(start + Duration::days(i as i64), 0).unwrap())
            .collect();
        let x_vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mob: Vec<f64> = (0..n).map(|_| rng.gen_range(0.4..1.0)).collect();
        let actual: Vec<f64> = (0..n)
            .map(|i| 80.0 + 10.0 * x_vals[i] + 2.0 * gauss(&mut rng))
            .collect();
        let features = FeatureMatrix::from_columns(vec![("x".into(), x_vals)]).unwrap();
        let ts_at = |i: usize| timestamps[i];
        let windows = EnhancementWindows {
            train: (ts_at(0), ts_at(149)),
            normal: (ts_at(120), ts_at(149)),
            calibration: (ts_at(150), ts_at(199)),
            lockdown: (ts_at(200), ts_at(299)),
        };
        let data = EnhancementData {
            timestamps: &timestamps,
            features: &features,
            actual: &actual,
            mobility_lag: &mob,
        };
        let report =
            mobility_enhanced_forecast(&LearnerSpec::ridge(0.0), &data, &windows).unwrap();
        assert!(
            report.enhanced_improvement_pp.abs() < 1.5,
            "null improvement {}",
            report.enhanced_improvement_pp
        );
    }

    #[test]
    fn enhancement_lockdown_scenario_direction() {
        let (timestamps, features, actual, mobility_lag, windows) = lockdown_scenario(7);
        let data = EnhancementData {
            timestamps: &timestamps,
            features: &features,
            actual: &actual,
            mobility_lag: &mobility_lag,
        };
        let report =
            mobility_enhanced_forecast(&LearnerSpec::ridge(1e-6), &data, &windows).unwrap();
        assert!(
            report.enhanced_lockdown_mape <= 0.5 * report.base_lockdown_mape,
            "enhanced {} vs base {}",
            report.enhanced_lockdown_mape,
            report.base_lockdown_mape
        );
        // Fine-tuning alone barely helps.
        assert!(
            report.updated_improvement_pp < 0.1 * report.base_lockdown_mape,
            "updated improvement {} vs base {}",
            report.updated_improvement_pp,
            report.base_lockdown_mape
        );
    }

    #[test]
    fn enhancement_empty_calibration_rejected() {
        let (timestamps, features, actual, mobility_lag, mut windows) = lockdown_scenario(1);
        windows.calibration = (
            Timestamp::from_ymdh(2030, 1, 1, 0).unwrap(),
            Timestamp::from_ymdh(2030, 1, 2, 0).unwrap(),
        );
        let data = EnhancementData {
            timestamps: &timestamps,
            features: &features,
            actual: &actual,
            mobility_lag: &mobility_lag,
        };
        assert!(matches!(
            mobility_enhanced_forecast(&LearnerSpec::ridge(0.0), &data, &windows),
            Err(StudyError::NoCalibrationData)
        ));
    }

    #[test]
    fn price_regression_residuals_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let inputs = simulate_dummy_price_design([-1.0, 0.5, 2.0, 0.3], 800, 0.5, &mut rng);
        let report = price_regression_dummy(&inputs).unwrap();
        let scale: f64 = report.residuals.iter().map(|e| e * e).sum::<f64>().sqrt();
        let inner: f64 = report
            .residuals
            .iter()
            .zip(&inputs.gas)
            .map(|(e, g)| e * g)
            .sum();
        assert!(inner.abs() < 1e-8 * scale.max(1.0));
    }
}

//! `gridtrace study`: the study recipes, each configured by a tagged JSON
//! document and emitting a JSON report plus plot-data/SVG files.

use crate::util::{read_dated, usage, write_report, CliError, RunMeta};
use clap::Args;
use chrono::NaiveDate;
use gridtrace_core::baseline::{
    calendar_features, date_aligned, fluctuation_index, week_aligned, BaselineSeries, WindowSpec,
};
use gridtrace_core::frame::{flatten, SeriesView, Timestamp, WideFrame};
use gridtrace_core::ingest::load_csv;
use gridtrace_core::learners::{FeatureMatrix, LearnerKind, LearnerSpec, LossKind};
use gridtrace_core::studies::{
    duck_curve, extreme_counts_of, mobility_enhanced_forecast, pandemic_dummy,
    peak_demand_reduction, price_regression_cases, price_regression_dummy, renewable_share,
    renewable_share_baseline, CountBucket, EnhancementData, EnhancementWindows,
    PriceStudyInputs,
};
use gridtrace_core::viz;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Args)]
pub struct StudyArgs {
    /// Study config (JSON, tagged by "study").
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct FrameRef {
    path: String,
    region: String,
    variable: String,
    unit: String,
}

impl FrameRef {
    fn load(&self) -> Result<WideFrame, CliError> {
        Ok(load_csv(&self.path, &self.region, &self.variable, &self.unit)?)
    }
}

#[derive(Deserialize)]
#[serde(tag = "study", rename_all = "kebab-case")]
enum StudyConfig {
    PeakDemand {
        demand: FrameRef,
        /// "date" or "week".
        baseline_method: String,
        years_back: u32,
        year: i32,
        month: u32,
    },
    DuckCurve {
        demand: FrameRef,
        solar: FrameRef,
        start: NaiveDate,
        end: NaiveDate,
    },
    ExtremePrice {
        price: FrameRef,
        #[serde(default = "default_threshold")]
        threshold: f64,
        /// "weekly" or "monthly".
        bucket: String,
        /// Trailing window in hours; omit for calendar-month windows.
        window_hours: Option<usize>,
    },
    RenewableShare {
        /// Dated monthly CSVs (`date,value`), percentages.
        hydro_csv: String,
        solar_csv: String,
        wind_csv: String,
        order: (usize, usize, usize),
        study_months: usize,
    },
    PriceRegression {
        price: FrameRef,
        gas_csv: String,
        cases_csv: String,
        event_date: NaiveDate,
    },
    ForecastEnhancement {
        demand: FrameRef,
        temperature_csv: String,
        mobility_csv: String,
        windows: WindowsConfig,
    },
}

fn default_threshold() -> f64 {
    gridtrace_core::studies::EXTREME_PRICE_THRESHOLD
}

#[derive(Deserialize)]
struct WindowsConfig {
    train: (NaiveDate, NaiveDate),
    normal: (NaiveDate, NaiveDate),
    calibration: (NaiveDate, NaiveDate),
    lockdown: (NaiveDate, NaiveDate),
}

impl WindowsConfig {
    fn to_windows(&self) -> Result<EnhancementWindows, CliError> {
        let ts = |d: NaiveDate, h: u8| Timestamp::new(d, h).map_err(CliError::from);
        Ok(EnhancementWindows {
            train: (ts(self.train.0, 0)?, ts(self.train.1, 23)?),
            normal: (ts(self.normal.0, 0)?, ts(self.normal.1, 23)?),
            calibration: (ts(self.calibration.0, 0)?, ts(self.calibration.1, 23)?),
            lockdown: (ts(self.lockdown.0, 0)?, ts(self.lockdown.1, 23)?),
        })
    }
}

/// Counterfactual daily peak: per date, the max of the hourly baseline.
fn daily_peak_baseline(hourly: &BaselineSeries) -> BaselineSeries {
    let mut per_day: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for (t, v) in hourly.timestamps().iter().zip(hourly.values()) {
        if let Some(v) = v {
            per_day
                .entry(t.date())
                .and_modify(|m| *m = m.max(*v))
                .or_insert(*v);
        }
    }
    let (ts, vals): (Vec<_>, Vec<_>) = per_day
        .into_iter()
        .map(|(d, v)| (Timestamp::new(d, 0).expect("hour 0"), Some(v)))
        .unzip();
    BaselineSeries::new(
        hourly.method.clone(),
        hourly.years_back,
        SeriesView::new(ts, vals).expect("daily baseline"),
    )
}

fn dated_to_series(values: &[(NaiveDate, f64)]) -> Result<SeriesView, CliError> {
    let (ts, vals): (Vec<_>, Vec<_>) = values
        .iter()
        .map(|(d, v)| (Timestamp::new(*d, 0).expect("hour 0"), Some(*v)))
        .unzip();
    Ok(SeriesView::new(ts, vals)?)
}

pub fn run(args: StudyArgs, seed: u64) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)?;
    let config: StudyConfig =
        serde_json::from_str(&text).map_err(|e| usage(format!("bad study config: {e}")))?;
    std::fs::create_dir_all(&args.out)?;
    let meta = |name: &'static str, inputs: Vec<String>| RunMeta {
        command: name,
        seed,
        inputs,
    };

    match config {
        StudyConfig::PeakDemand {
            demand,
            baseline_method,
            years_back,
            year,
            month,
        } => {
            let frame = demand.load()?;
            let hourly = match baseline_method.as_str() {
                "date" => date_aligned(&frame, years_back),
                "week" => week_aligned(&frame, years_back),
                other => return Err(usage(format!("baseline_method {other:?} (date, week)"))),
            };
            let daily = daily_peak_baseline(&hourly);
            let report = peak_demand_reduction(&frame, &daily, year, month)?;
            write_report(
                &args.out.join("peak-demand.json"),
                &meta("study peak-demand", vec![demand.path]),
                &report,
            )?;
            println!(
                "peak demand reduction {year}-{month:02}: {:.4}% over {} days",
                report.alpha_percent, report.days_used
            );
        }
        StudyConfig::DuckCurve { demand, solar, start, end } => {
            let d = demand.load()?;
            let s = solar.load()?;
            let report = duck_curve(&d, &s, start, end)?;
            write_report(
                &args.out.join("duck-curve.json"),
                &meta("study duck-curve", vec![demand.path, solar.path]),
                &report,
            )?;
            // Profile as plot data + SVG.
            let ts: Vec<Timestamp> = (0..24)
                .map(|h| Timestamp::new(start, h as u8).expect("hour"))
                .collect();
            let profile = SeriesView::new(ts, report.profile.iter().map(|v| Some(*v)).collect())?;
            let plot = viz::build_line(&[("residual demand".into(), profile)], &[])?;
            std::fs::write(args.out.join("duck-curve.plot.json"), plot.to_json())?;
            viz::render_svg(&plot, args.out.join("duck-curve.svg"))?;
            println!(
                "duck curve: max ramp {:.2}, range {:.2} over {} days",
                report.max_ramp, report.range, report.days_used
            );
        }
        StudyConfig::ExtremePrice {
            price,
            threshold,
            bucket,
            window_hours,
        } => {
            let frame = price.load()?;
            let bucket = match bucket.as_str() {
                "weekly" => CountBucket::Weekly,
                "monthly" => CountBucket::Monthly,
                other => return Err(usage(format!("bucket {other:?} (weekly, monthly)"))),
            };
            let window = match window_hours {
                Some(w) => WindowSpec::TrailingHours(w),
                None => WindowSpec::CalendarMonth,
            };
            let idx = fluctuation_index(&flatten(&frame), window)?;
            let counts = extreme_counts_of(&idx, threshold, bucket)?;
            write_report(
                &args.out.join("extreme-price.json"),
                &meta("study extreme-price", vec![price.path]),
                &counts,
            )?;
            for c in &counts {
                println!("{}: {}", c.label, c.count);
            }
        }
        StudyConfig::RenewableShare {
            hydro_csv,
            solar_csv,
            wind_csv,
            order,
            study_months,
        } => {
            let hydro = dated_to_series(&read_dated(Path::new(&hydro_csv))?)?;
            let solar = dated_to_series(&read_dated(Path::new(&solar_csv))?)?;
            let wind = dated_to_series(&read_dated(Path::new(&wind_csv))?)?;
            let beta = renewable_share(&hydro, &solar, &wind)?;
            let baseline = renewable_share_baseline(&beta, order, study_months)?;
            let n = beta.len();
            let observed_mean = beta.values()[n - study_months..]
                .iter()
                .flatten()
                .sum::<f64>()
                / study_months as f64;
            let baseline_mean = baseline.values()[n - study_months..]
                .iter()
                .flatten()
                .sum::<f64>()
                / study_months as f64;
            let body = serde_json::json!({
                "order": order,
                "study_months": study_months,
                "observed_mean_percent": observed_mean,
                "baseline_mean_percent": baseline_mean,
                "beta": beta.values().iter().map(|v| v.unwrap_or(f64::NAN)).collect::<Vec<_>>(),
                "baseline": baseline.values(),
            });
            write_report(
                &args.out.join("renewable-share.json"),
                &meta("study renewable-share", vec![hydro_csv, solar_csv, wind_csv]),
                &body,
            )?;
            let plot = viz::build_line(&[("renewable share %".into(), beta.clone())], &[])?;
            std::fs::write(args.out.join("renewable-share.plot.json"), plot.to_json())?;
            viz::render_svg(&plot, args.out.join("renewable-share.svg"))?;
            println!(
                "renewable share: observed {observed_mean:.2}% vs ARMA baseline {baseline_mean:.2}%"
            );
        }
        StudyConfig::PriceRegression {
            price,
            gas_csv,
            cases_csv,
            event_date,
        } => {
            let frame = price.load()?;
            let idx = fluctuation_index(&flatten(&frame), WindowSpec::CalendarMonth)?;
            let daily_index = idx.daily_means();
            let gas = read_dated(Path::new(&gas_csv))?;
            let cases = read_dated(Path::new(&cases_csv))?;
            let gas_map: BTreeMap<NaiveDate, f64> = gas.into_iter().collect();
            let cases_map: BTreeMap<NaiveDate, f64> = cases.into_iter().collect();
            let mut dates = Vec::new();
            let mut loi_col = Vec::new();
            let mut gas_col = Vec::new();
            let mut cases_col = Vec::new();
            for (d, i) in &daily_index {
                let (Some(g), Some(c)) = (gas_map.get(d), cases_map.get(d)) else {
                    continue;
                };
                let clamped = i.clamp(1e-9, 1.0 - 1e-9);
                dates.push(*d);
                loi_col.push((clamped / (1.0 - clamped)).ln());
                gas_col.push(*g);
                cases_col.push(*c);
            }
            if dates.len() < 30 {
                return Err(usage(format!(
                    "only {} aligned days across price/gas/cases inputs",
                    dates.len()
                )));
            }
            let inputs = PriceStudyInputs {
                loi: loi_col,
                gas: gas_col,
                cases: cases_col,
                dummy: pandemic_dummy(&dates, event_date),
            };
            let dummy_report = price_regression_dummy(&inputs)?;
            let cases_report = price_regression_cases(&inputs)?;
            let body = serde_json::json!({
                "event_date": event_date,
                "days": dates.len(),
                "dummy_model": dummy_report,
                "cases_model": cases_report,
            });
            write_report(
                &args.out.join("price-regression.json"),
                &meta("study price-regression", vec![price.path, gas_csv, cases_csv]),
                &body,
            )?;
            std::fs::write(
                args.out.join("price-regression.txt"),
                format!(
                    "dummy model:\n{}\ncases model:\n{}",
                    dummy_report.render_text(),
                    cases_report.render_text()
                ),
            )?;
            println!("{}", dummy_report.render_text());
        }
        StudyConfig::ForecastEnhancement {
            demand,
            temperature_csv,
            mobility_csv,
            windows,
        } => {
            let frame = demand.load()?;
            let daily = gridtrace_core::frame::aggregate_mean(
                &frame,
                gridtrace_core::frame::AggregationLevel::Daily,
            )?;
            let temp: BTreeMap<NaiveDate, f64> =
                read_dated(Path::new(&temperature_csv))?.into_iter().collect();
            let mob: BTreeMap<NaiveDate, f64> =
                read_dated(Path::new(&mobility_csv))?.into_iter().collect();
            let mut timestamps = Vec::new();
            let mut actual = Vec::new();
            let mut temp_col = Vec::new();
            let mut mob_lag = Vec::new();
            let mut prev_mob: Option<f64> = None;
            for (t, v) in daily.timestamps().iter().zip(daily.values()) {
                let day_mob = mob.get(&t.date()).copied();
                if let (Some(v), Some(tv), Some(m_prev)) =
                    (v, temp.get(&t.date()), prev_mob.or(day_mob))
                {
                    timestamps.push(*t);
                    actual.push(*v);
                    temp_col.push(*tv);
                    mob_lag.push(m_prev);
                }
                if day_mob.is_some() {
                    prev_mob = day_mob;
                }
            }
            if timestamps.is_empty() {
                return Err(usage("no aligned days across demand/temperature/mobility"));
            }
            let calendar = calendar_features(&timestamps);
            let mut columns: Vec<(String, Vec<f64>)> = calendar
                .names()
                .iter()
                .map(|n| (n.clone(), calendar.column(n).expect("calendar column")))
                .collect();
            columns.push(("temperature".into(), temp_col));
            let features = FeatureMatrix::from_columns(columns)?;
            let data = EnhancementData {
                timestamps: &timestamps,
                features: &features,
                actual: &actual,
                mobility_lag: &mob_lag,
            };
            let spec = LearnerSpec {
                kind: LearnerKind::Mlp {
                    hidden: vec![12],
                    learning_rate: 0.02,
                    epochs: 200,
                    seed,
                },
                loss: LossKind::Squared,
            };
            let report = mobility_enhanced_forecast(&spec, &data, &windows.to_windows()?)?;
            write_report(
                &args.out.join("forecast-enhancement.json"),
                &meta(
                    "study forecast-enhancement",
                    vec![demand.path, temperature_csv, mobility_csv],
                ),
                &report,
            )?;
            println!(
                "MAPE base normal {:.2}% | lockdown: base {:.2}%, updated {:.2}%, mobility-enhanced {:.2}%",
                report.base_normal_mape,
                report.base_lockdown_mape,
                report.updated_lockdown_mape,
                report.enhanced_lockdown_mape
            );
        }
    }

    Ok(())
}

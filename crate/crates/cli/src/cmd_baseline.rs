//! `gridtrace baseline`: the method menu of counterfactual estimators over
//! one wide-frame CSV, written as `timestamp,observed,baseline[,q10..q90]`.

use crate::util::{parse_date, usage, write_meta, CliError, RunMeta};
use clap::{Args, ValueEnum};
use gridtrace_core::baseline::{
    backcast, calendar_features, date_aligned, detrend_baseline, fluctuation_index,
    index_baseline, probabilistic_baseline, trend_baseline, trend_ma, trend_model, week_aligned,
    BackcastData, BaselineSeries, EnsembleSpec, ProbFamily, ProbabilisticBaseline, WindowSpec,
};
use gridtrace_core::frame::{flatten, AggregationLevel, SeriesView, Timestamp};
use gridtrace_core::ingest::load_csv;
use gridtrace_core::learners::{LearnerKind, LearnerSpec, LossKind};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Date,
    Week,
    Trend,
    Detrend,
    Backcast,
    Index,
    Prob,
}

#[derive(Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    region: String,
    #[arg(long)]
    variable: String,
    #[arg(long)]
    unit: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    years_back: u32,
    /// Moving-average window (points) for the trend methods.
    #[arg(long, default_value_t = 169)]
    ma_window: usize,
    /// ARMA order "p,d,q"; when set, the trend methods use a calibrated
    /// ARMA instead of the moving average.
    #[arg(long)]
    arma: Option<String>,
    /// Trailing window (hours) for the fluctuation index.
    #[arg(long, default_value_t = 720)]
    window_hours: usize,
    /// Use calendar-month windows for the fluctuation index.
    #[arg(long)]
    month_window: bool,
    /// Training cutoff date (inclusive) for backcast/prob; later rows
    /// become the prediction horizon.
    #[arg(long)]
    train_end: Option<String>,
    /// Base learners for backcast/prob: comma list of `ridge` / `mlp`.
    #[arg(long, default_value = "ridge")]
    learners: String,
    /// Ridge penalty for ridge base learners.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

fn parse_arma(s: &str) -> Result<(usize, usize, usize), CliError> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad --arma {s:?}, expected p,d,q")))?;
    if parts.len() != 3 {
        return Err(usage(format!("bad --arma {s:?}, expected p,d,q")));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn ensemble_spec(args: &BaselineArgs, seed: u64) -> Result<EnsembleSpec, CliError> {
    let mut members = Vec::new();
    for (i, name) in args.learners.split(',').enumerate() {
        let spec = match name.trim() {
            "ridge" => LearnerSpec::ridge(args.lambda),
            "mlp" => LearnerSpec {
                kind: LearnerKind::Mlp {
                    hidden: vec![16],
                    learning_rate: 0.02,
                    epochs: 150,
                    seed: seed + i as u64,
                },
                loss: LossKind::Squared,
            },
            other => return Err(usage(format!("unknown learner {other:?} (ridge, mlp)"))),
        };
        members.push(spec);
    }
    Ok(EnsembleSpec { members })
}

struct Output {
    observed: SeriesView,
    baseline: Option<BaselineSeries>,
    prob: Option<ProbabilisticBaseline>,
}

pub fn run(args: BaselineArgs, seed: u64) -> Result<(), CliError> {
    let frame = load_csv(&args.input, &args.region, &args.variable, &args.unit)?;
    let observed = flatten(&frame);

    let output = match args.method {
        Method::Date => Output {
            baseline: Some(date_aligned(&frame, args.years_back)),
            observed,
            prob: None,
        },
        Method::Week => Output {
            baseline: Some(week_aligned(&frame, args.years_back)),
            observed,
            prob: None,
        },
        Method::Trend | Method::Detrend => {
            let trend = match &args.arma {
                Some(order) => {
                    let (p, d, q) = parse_arma(order)?;
                    trend_model(&observed, p, d, q)?
                }
                None => trend_ma(&observed, args.ma_window)?,
            };
            let baseline = if args.method == Method::Trend {
                trend_baseline(&trend, args.years_back)
            } else {
                detrend_baseline(&observed, &trend)?
            };
            Output {
                observed,
                baseline: Some(baseline),
                prob: None,
            }
        }
        Method::Index => {
            let window = if args.month_window {
                WindowSpec::CalendarMonth
            } else {
                WindowSpec::TrailingHours(args.window_hours)
            };
            let idx = fluctuation_index(&observed, window)?;
            let baseline = index_baseline(&idx, args.years_back, AggregationLevel::Hourly);
            Output {
                observed: idx.to_series(),
                baseline: Some(baseline),
                prob: None,
            }
        }
        Method::Backcast | Method::Prob => {
            let cutoff = args
                .train_end
                .as_deref()
                .ok_or_else(|| usage("--train-end is required for backcast/prob"))?;
            let cutoff = parse_date(cutoff)?;
            let mut train_ts = Vec::new();
            let mut train_y = Vec::new();
            let mut horizon_ts: Vec<Timestamp> = Vec::new();
            for (t, v) in observed.timestamps().iter().zip(observed.values()) {
                if t.date() <= cutoff {
                    if let Some(v) = v {
                        train_ts.push(*t);
                        train_y.push(*v);
                    }
                } else {
                    horizon_ts.push(*t);
                }
            }
            if train_ts.is_empty() || horizon_ts.is_empty() {
                return Err(usage("--train-end leaves an empty training or horizon window"));
            }
            let train_x = calendar_features(&train_ts);
            let horizon_x = calendar_features(&horizon_ts);
            let spec = ensemble_spec(&args, seed)?;
            if args.method == Method::Backcast {
                let (baseline, _) = backcast(
                    &BackcastData {
                        train_features: &train_x,
                        train_target: &train_y,
                        horizon_features: &horizon_x,
                        horizon: &horizon_ts,
                    },
                    &spec,
                )?;
                Output {
                    observed,
                    baseline: Some(baseline),
                    prob: None,
                }
            } else {
                let pb = probabilistic_baseline(
                    &train_x,
                    &train_y,
                    &spec,
                    &horizon_x,
                    &horizon_ts,
                    ProbFamily::Backcast,
                )?;
                Output {
                    observed,
                    baseline: None,
                    prob: Some(pb),
                }
            }
        }
    };

    let csv = render_csv(&output);
    std::fs::write(&args.out, csv)?;
    let meta_path = args.out.with_extension("meta.json");
    write_meta(
        &meta_path,
        &RunMeta {
            command: "baseline",
            seed,
            inputs: vec![args.input.display().to_string()],
        },
    )?;
    println!(
        "baseline {:?} written to {}",
        args.method,
        args.out.display()
    );
    Ok(())
}

fn push_opt(line: &mut String, v: Option<f64>) {
    line.push(',');
    if let Some(v) = v {
        let _ = write!(line, "{v}");
    }
}

fn render_csv(output: &Output) -> String {
    let mut s = String::new();
    if let Some(pb) = &output.prob {
        s.push_str("timestamp,observed,baseline,q10,q25,q50,q75,q90\n");
        for (i, t) in pb.timestamps().iter().enumerate() {
            let mut line = t.to_string();
            push_opt(&mut line, output.observed.value_at(*t));
            push_opt(&mut line, Some(pb.tracks()[2][i])); // median as the point baseline
            for track in pb.tracks() {
                push_opt(&mut line, Some(track[i]));
            }
            line.push('\n');
            s.push_str(&line);
        }
    } else if let Some(b) = &output.baseline {
        s.push_str("timestamp,observed,baseline\n");
        for (t, v) in b.timestamps().iter().zip(b.values()) {
            let mut line = t.to_string();
            push_opt(&mut line, output.observed.value_at(*t));
            push_opt(&mut line, *v);
            line.push('\n');
            s.push_str(&line);
        }
    }
    s
}

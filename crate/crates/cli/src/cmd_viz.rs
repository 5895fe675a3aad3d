//! `gridtrace viz`: chart builders over frame/columnar inputs; each command
//! writes `<out>.json` (plot data) plus `<out>.svg`.

use crate::util::{usage, write_meta, CliError, RunMeta};
use clap::{Args, Subcommand};
use gridtrace_core::frame::flatten;
use gridtrace_core::ingest::load_csv;
use gridtrace_core::viz::{
    build_boxplot, build_cdf, build_heatmap, build_histogram, build_line, build_stacked_bar,
    render_svg, EventMarker, PlotData,
};
use std::path::{Path, PathBuf};

#[derive(Subcommand)]
pub enum VizCmd {
    /// Line chart of one or more wide frames, with event markers.
    Line(LineArgs),
    /// Stacked bar chart from a labeled columnar CSV.
    StackedBar(StackedBarArgs),
    /// Histogram of all present values of a frame.
    Histogram(HistArgs),
    /// Empirical CDF of all present values of a frame.
    Cdf(CdfArgs),
    /// Box plot per hour of day.
    Boxplot(BoxplotArgs),
    /// Pearson-correlation heat map across frames.
    Heatmap(HeatmapArgs),
}

#[derive(Args)]
pub struct LineArgs {
    /// Wide-frame CSVs, comma separated.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<PathBuf>,
    /// Event markers `YYYY-MM-DD:label`, comma separated.
    #[arg(long, value_delimiter = ',')]
    events: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct StackedBarArgs {
    /// CSV with header `label,cat1,cat2,...`; one bar per row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct HistArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct CdfArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct BoxplotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct HeatmapArgs {
    /// Wide-frame CSVs, comma separated; labels come from file stems.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn load_anon(path: &Path) -> Result<gridtrace_core::frame::WideFrame, CliError> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "frame".into());
    Ok(load_csv(path, &stem, &stem, "unit")?)
}

fn present_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let frame = load_anon(path)?;
    Ok(flatten(&frame).present_values())
}

fn parse_events(specs: &[String]) -> Result<Vec<EventMarker>, CliError> {
    specs
        .iter()
        .map(|s| {
            let (date, label) = s
                .split_once(':')
                .ok_or_else(|| usage(format!("bad event {s:?}, expected YYYY-MM-DD:label")))?;
            Ok(EventMarker {
                date: date.to_string(),
                label: label.to_string(),
            })
        })
        .collect()
}

/// Labeled columnar CSV: first column is a string label, the rest numeric.
fn read_labeled(path: &Path) -> Result<(Vec<String>, Vec<(String, Vec<f64>)>), CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| usage(format!("{}: empty file", path.display())))?;
    let names: Vec<String> = header
        .trim_end_matches('\r')
        .split(',')
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(usage("need at least one category column"));
    }
    let mut labels = Vec::new();
    let mut columns: Vec<(String, Vec<f64>)> =
        names.into_iter().map(|n| (n, Vec::new())).collect();
    for (i, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() + 1 {
            return Err(usage(format!(
                "{} row {}: {} fields for {} columns",
                path.display(),
                i + 2,
                fields.len(),
                columns.len() + 1
            )));
        }
        labels.push(fields[0].trim().to_string());
        for (col, field) in columns.iter_mut().zip(&fields[1..]) {
            col.1.push(field.trim().parse().map_err(|_| {
                usage(format!("{} row {}: bad number {field:?}", path.display(), i + 2))
            })?);
        }
    }
    Ok((labels, columns))
}

fn emit(data: &PlotData, out: &Path, command: &'static str, inputs: Vec<String>, seed: u64) -> Result<(), CliError> {
    std::fs::write(out.with_extension("json"), data.to_json())?;
    render_svg(data, out.with_extension("svg"))?;
    write_meta(
        &out.with_extension("meta.json"),
        &RunMeta {
            command,
            seed,
            inputs,
        },
    )?;
    println!("wrote {} and {}", out.with_extension("json").display(), out.with_extension("svg").display());
    Ok(())
}

pub fn run(cmd: VizCmd, seed: u64) -> Result<(), CliError> {
    match cmd {
        VizCmd::Line(args) => {
            let mut series = Vec::new();
            for path in &args.inputs {
                let frame = load_anon(path)?;
                series.push((frame.variable().to_string(), flatten(&frame)));
            }
            let events = parse_events(&args.events)?;
            let data = build_line(&series, &events)?;
            let inputs = args.inputs.iter().map(|p| p.display().to_string()).collect();
            emit(&data, &args.out, "viz line", inputs, seed)?;
        }
        VizCmd::StackedBar(args) => {
            let (labels, categories) = read_labeled(&args.input)?;
            let totals: Vec<f64> = (0..labels.len())
                .map(|i| categories.iter().map(|(_, v)| v[i]).sum())
                .collect();
            let data = build_stacked_bar(&labels, &categories, &totals)?;
            emit(
                &data,
                &args.out,
                "viz stacked-bar",
                vec![args.input.display().to_string()],
                seed,
            )?;
        }
        VizCmd::Histogram(args) => {
            let values = present_values(&args.input)?;
            let data = build_histogram(&values, args.bins)?;
            emit(
                &data,
                &args.out,
                "viz histogram",
                vec![args.input.display().to_string()],
                seed,
            )?;
        }
        VizCmd::Cdf(args) => {
            let values = present_values(&args.input)?;
            let data = build_cdf(&values)?;
            emit(
                &data,
                &args.out,
                "viz cdf",
                vec![args.input.display().to_string()],
                seed,
            )?;
        }
        VizCmd::Boxplot(args) => {
            let frame = load_anon(&args.input)?;
            let mut columns: Vec<Vec<f64>> = vec![Vec::new(); 24];
            for row in frame.rows() {
                for (h, cell) in row.iter().enumerate() {
                    if let Some(v) = cell {
                        columns[h].push(*v);
                    }
                }
            }
            let data = build_boxplot(&columns)?;
            emit(
                &data,
                &args.out,
                "viz boxplot",
                vec![args.input.display().to_string()],
                seed,
            )?;
        }
        VizCmd::Heatmap(args) => {
            let mut labels = Vec::new();
            let mut series = Vec::new();
            for path in &args.inputs {
                let frame = load_anon(path)?;
                labels.push(frame.region().to_string());
                series.push(flatten(&frame));
            }
            let data = build_heatmap(&labels, &series)?;
            let inputs = args.inputs.iter().map(|p| p.display().to_string()).collect();
            emit(&data, &args.out, "viz heatmap", inputs, seed)?;
        }
    }
    Ok(())
}

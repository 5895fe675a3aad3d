//! `gridtrace ingest`: load, flag outliers, repair gaps, write the repaired
//! frame plus `<stem>.quality.jsonl`.

use crate::util::{write_meta, CliError, RunMeta};
use clap::Args;
use gridtrace_core::ingest::{
    detect_outliers, fill_missing, load_csv, write_csv, QualityAction, QualityEntry, QualityRule,
};
use std::path::PathBuf;

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    region: String,
    #[arg(long)]
    variable: String,
    #[arg(long)]
    unit: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Longest gap (hours) closed by linear interpolation.
    #[arg(long, default_value_t = 3)]
    max_gap: usize,
    /// Robust z-score threshold for outlier flagging.
    #[arg(long, default_value_t = 5.0)]
    z_threshold: f64,
    /// Rolling window (days) for the outlier median/MAD.
    #[arg(long, default_value_t = 7)]
    window_days: usize,
}

pub fn run(args: IngestArgs, seed: u64) -> Result<(), CliError> {
    let frame = load_csv(&args.input, &args.region, &args.variable, &args.unit)?;
    let rule = QualityRule {
        max_gap_hours: args.max_gap,
        z_threshold: args.z_threshold,
        window_days: args.window_days,
    };

    // Flag first (report-only), then repair gaps; present cells are never
    // modified.
    let flagged = match detect_outliers(&frame, &rule) {
        Ok(flags) => flags,
        Err(gridtrace_core::ingest::IngestError::WindowTooLong { .. }) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let (repaired, mut report) = fill_missing(&frame, &rule)?;
    for ts in &flagged {
        report.entries.push(QualityEntry {
            ts: *ts,
            action: QualityAction::FlaggedOutlier,
            old: frame.get(ts.date(), ts.hour()),
            new: frame.get(ts.date(), ts.hour()),
        });
    }
    report.entries.sort_by_key(|e| e.ts);

    std::fs::create_dir_all(&args.out)?;
    let stem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "frame".into());
    let csv_path = args.out.join(format!("{stem}.repaired.csv"));
    let jsonl_path = args.out.join(format!("{stem}.quality.jsonl"));
    write_csv(&repaired, &csv_path)?;
    std::fs::write(&jsonl_path, report.to_jsonl())?;
    write_meta(
        &args.out.join(format!("{stem}.meta.json")),
        &RunMeta {
            command: "ingest",
            seed,
            inputs: vec![args.input.display().to_string()],
        },
    )?;

    println!(
        "{}: interpolated {}, week-filled {}, left missing {}, outliers {}",
        stem,
        report.count(QualityAction::FilledInterpolate),
        report.count(QualityAction::FilledWeekAligned),
        report.count(QualityAction::LeftMissing),
        report.count(QualityAction::FlaggedOutlier),
    );
    Ok(())
}

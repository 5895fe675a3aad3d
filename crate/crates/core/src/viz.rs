//! Plot-data builders for the chart family (line, stacked bar, histogram,
//! CDF, box plot, heat map) plus a small deterministic SVG renderer:
//! identical inputs produce byte-identical files.

use crate::frame::{FrameError, SeriesView};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("zero-total: bar {0:?} has a non-positive total")]
    ZeroTotal(String),
    #[error("short-column: column {index} has {got} values, need at least 5")]
    ShortColumn { index: usize, got: usize },
    #[error("empty-sample: no data to plot")]
    EmptySample,
    #[error("bad-shape: {0}")]
    BadShape(String),
    #[error("io-error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Line,
    Scatter,
    StackedBar,
    Histogram,
    Cdf,
    Boxplot,
    Heatmap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMarker {
    pub date: String,
    pub label: String,
}

/// Render-ready numeric arrays. `meta` carries labels and any
/// kind-specific extras; a BTreeMap keeps serialization order stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub kind: PlotKind,
    pub x: Vec<f64>,
    pub series: Vec<PlotSeries>,
    pub events: Vec<EventMarker>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl PlotData {
    fn validate(&self) -> Result<(), VizError> {
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(VizError::BadShape("non-finite x value".into()));
        }
        for s in &self.series {
            if s.y.iter().any(|v| !v.is_finite()) {
                return Err(VizError::BadShape(format!("non-finite value in {}", s.name)));
            }
        }
        match self.kind {
            PlotKind::Heatmap => {
                for s in &self.series {
                    if s.y.len() != self.x.len() {
                        return Err(VizError::BadShape("heatmap rows must be square".into()));
                    }
                }
            }
            PlotKind::Line | PlotKind::Scatter => {}
            _ => {
                for s in &self.series {
                    if s.y.len() != self.x.len() {
                        return Err(VizError::BadShape(format!(
                            "series {} has {} values for {} x positions",
                            s.name,
                            s.y.len(),
                            self.x.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plot data serializes")
    }
}

/// Shares per bar in percent: category / (sum of categories) x 100, after
/// checking the declared totals to 1e-6 relative.
pub fn build_stacked_bar(
    bar_labels: &[String],
    categories: &[(String, Vec<f64>)],
    totals: &[f64],
) -> Result<PlotData, VizError> {
    let bars = totals.len();
    if bars == 0 || categories.is_empty() {
        return Err(VizError::EmptySample);
    }
    if bar_labels.len() != bars {
        return Err(VizError::BadShape("one label per bar required".into()));
    }
    for (name, vals) in categories {
        if vals.len() != bars {
            return Err(VizError::BadShape(format!(
                "category {name} has {} values for {bars} bars",
                vals.len()
            )));
        }
    }
    let mut shares: Vec<(String, Vec<f64>)> = categories
        .iter()
        .map(|(n, _)| (n.clone(), Vec::with_capacity(bars)))
        .collect();
    for b in 0..bars {
        let total = totals[b];
        if !(total > 0.0) {
            return Err(VizError::ZeroTotal(bar_labels[b].clone()));
        }
        let cat_sum: f64 = categories.iter().map(|(_, v)| v[b]).sum();
        if ((cat_sum - total) / total).abs() > 1e-6 {
            return Err(VizError::BadShape(format!(
                "bar {}: categories sum to {cat_sum}, total is {total}",
                bar_labels[b]
            )));
        }
        for (k, (_, vals)) in categories.iter().enumerate() {
            shares[k].1.push(vals[b] / cat_sum * 100.0);
        }
    }
    let mut meta = BTreeMap::new();
    meta.insert(
        "x_labels".into(),
        serde_json::json!(bar_labels),
    );
    let data = PlotData {
        kind: PlotKind::StackedBar,
        x: (0..bars).map(|i| i as f64).collect(),
        series: shares
            .into_iter()
            .map(|(name, y)| PlotSeries { name, y })
            .collect(),
        events: Vec::new(),
        meta,
    };
    data.validate()?;
    Ok(data)
}

/// Linear-interpolated empirical quantile (type 7: h = (n-1) q + 1).
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Five-quantile summary (10/25/50/75/90%) per column.
pub fn build_boxplot(columns: &[Vec<f64>]) -> Result<PlotData, VizError> {
    if columns.is_empty() {
        return Err(VizError::EmptySample);
    }
    for (i, col) in columns.iter().enumerate() {
        if col.len() < 5 {
            return Err(VizError::ShortColumn {
                index: i,
                got: col.len(),
            });
        }
    }
    let levels = [0.10, 0.25, 0.50, 0.75, 0.90];
    let mut tracks: Vec<Vec<f64>> = vec![Vec::with_capacity(columns.len()); 5];
    for col in columns {
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        for (k, q) in levels.iter().enumerate() {
            tracks[k].push(quantile_type7(&sorted, *q));
        }
    }
    let data = PlotData {
        kind: PlotKind::Boxplot,
        x: (0..columns.len()).map(|i| i as f64).collect(),
        series: levels
            .iter()
            .zip(tracks)
            .map(|(q, y)| PlotSeries {
                name: format!("q{}", (q * 100.0).round() as u32),
                y,
            })
            .collect(),
        events: Vec::new(),
        meta: BTreeMap::new(),
    };
    data.validate()?;
    Ok(data)
}

/// Equal-width histogram normalized to integrate to one; a single-valued
/// sample gets one unit-width bin of mass one.
pub fn build_histogram(sample: &[f64], bins: usize) -> Result<PlotData, VizError> {
    if sample.is_empty() {
        return Err(VizError::EmptySample);
    }
    if bins < 1 {
        return Err(VizError::BadShape("bins must be >= 1".into()));
    }
    let min = sample.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, width) = if max > min {
        (min, (max - min) / bins as f64)
    } else {
        (min - 0.5, 1.0 / bins as f64)
    };
    let n = sample.len() as f64;
    let mut counts = vec![0usize; bins];
    for v in sample {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let densities: Vec<f64> = counts.iter().map(|c| *c as f64 / (n * width)).collect();
    let masses: Vec<f64> = counts.iter().map(|c| *c as f64 / n).collect();
    let mut meta = BTreeMap::new();
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    meta.insert("bin_edges".into(), serde_json::json!(edges));
    meta.insert("masses".into(), serde_json::json!(masses));
    let data = PlotData {
        kind: PlotKind::Histogram,
        x: (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
        series: vec![PlotSeries {
            name: "density".into(),
            y: densities,
        }],
        events: Vec::new(),
        meta,
    };
    data.validate()?;
    Ok(data)
}

/// Right-continuous empirical CDF step data; the last value is exactly 1.
pub fn build_cdf(sample: &[f64]) -> Result<PlotData, VizError> {
    if sample.is_empty() {
        return Err(VizError::EmptySample);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let y: Vec<f64> = (1..=sorted.len()).map(|i| i as f64 / n).collect();
    let data = PlotData {
        kind: PlotKind::Cdf,
        x: sorted,
        series: vec![PlotSeries { name: "cdf".into(), y }],
        events: Vec::new(),
        meta: BTreeMap::new(),
    };
    data.validate()?;
    Ok(data)
}

/// Pearson correlation heat map over the given series (delegates to
/// `frame::pearson_matrix`).
pub fn build_heatmap(labels: &[String], series: &[SeriesView]) -> Result<PlotData, VizError> {
    if labels.len() != series.len() {
        return Err(VizError::BadShape("one label per series required".into()));
    }
    let matrix = crate::frame::pearson_matrix(series)?;
    let mut meta = BTreeMap::new();
    meta.insert("labels".into(), serde_json::json!(labels));
    let data = PlotData {
        kind: PlotKind::Heatmap,
        x: (0..labels.len()).map(|i| i as f64).collect(),
        series: labels
            .iter()
            .zip(matrix)
            .map(|(name, row)| PlotSeries {
                name: name.clone(),
                y: row,
            })
            .collect(),
        events: Vec::new(),
        meta,
    };
    data.validate()?;
    Ok(data)
}

/// Line chart over one or more hourly series; missing cells become gaps
/// (points are dropped). Event markers are drawn as labeled vertical rules.
pub fn build_line(
    series: &[(String, SeriesView)],
    events: &[EventMarker],
) -> Result<PlotData, VizError> {
    let mut out_series = Vec::with_capacity(series.len());
    let mut xs: Vec<f64> = Vec::new();
    let mut timestamps: Vec<String> = Vec::new();
    if let Some((_, first)) = series.first() {
        timestamps = first.timestamps().iter().map(|t| t.to_string()).collect();
        xs = (0..first.len()).map(|i| i as f64).collect();
        for (name, s) in series {
            if s.timestamps() != first.timestamps() {
                return Err(VizError::BadShape(format!(
                    "series {name} covers different timestamps"
                )));
            }
            // Gaps encoded as parallel x/y arrays of present points in meta;
            // the y track carries present values with x positions.
            out_series.push(PlotSeries {
                name: name.clone(),
                y: s.values().iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            });
        }
    }
    // Replace NaN gap markers with dropped points per series.
    let mut meta = BTreeMap::new();
    meta.insert("timestamps".into(), serde_json::json!(timestamps));
    let series_clean: Vec<PlotSeries> = out_series
        .into_iter()
        .map(|s| {
            let pairs: Vec<(f64, f64)> = s
                .y
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .map(|(i, v)| (i as f64, *v))
                .collect();
            meta.insert(
                format!("x_{}", s.name),
                serde_json::json!(pairs.iter().map(|(x, _)| *x).collect::<Vec<f64>>()),
            );
            PlotSeries {
                name: s.name,
                y: pairs.into_iter().map(|(_, v)| v).collect(),
            }
        })
        .collect();
    let data = PlotData {
        kind: PlotKind::Line,
        x: xs,
        series: series_clean,
        events: events.to_vec(),
        meta,
    };
    data.validate()?;
    Ok(data)
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders plot data to an SVG 1.1 document. Pure function of its input:
/// the same PlotData always yields the same bytes.
pub fn svg_string(data: &PlotData) -> Result<String, VizError> {
    data.validate()?;
    let mut s = String::with_capacity(4096);
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    // Axes frame.
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444444\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(plot_w),
        fmt(plot_h)
    ));

    let all_y: Vec<f64> = data.series.iter().flat_map(|s| s.y.iter().copied()).collect();
    if all_y.is_empty() || data.x.is_empty() {
        s.push_str("</svg>\n");
        return Ok(s);
    }
    let (xmin, xmax) = bounds(&data.x);
    let (mut ymin, mut ymax) = bounds(&all_y);
    if matches!(data.kind, PlotKind::StackedBar) {
        ymin = 0.0;
        ymax = 100.0;
    }
    if matches!(data.kind, PlotKind::Histogram | PlotKind::Cdf) {
        ymin = 0.0;
    }
    if (ymax - ymin).abs() < 1e-12 {
        ymax = ymin + 1.0;
    }
    let sx = |v: f64| MARGIN_LEFT + (v - xmin) / (xmax - xmin).max(1e-12) * plot_w;
    let sy = |v: f64| MARGIN_TOP + (1.0 - (v - ymin) / (ymax - ymin)) * plot_h;

    match data.kind {
        PlotKind::Line | PlotKind::Cdf => {
            for (k, series) in data.series.iter().enumerate() {
                let xs: Vec<f64> = match data.meta.get(&format!("x_{}", series.name)) {
                    Some(serde_json::Value::Array(a)) => {
                        a.iter().filter_map(|v| v.as_f64()).collect()
                    }
                    _ => data.x.clone(),
                };
                let points: Vec<String> = xs
                    .iter()
                    .zip(&series.y)
                    .map(|(x, y)| format!("{},{}", fmt(sx(*x)), fmt(sy(*y))))
                    .collect();
                s.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                    PALETTE[k % PALETTE.len()],
                    points.join(" ")
                ));
            }
        }
        PlotKind::Scatter => {
            for (k, series) in data.series.iter().enumerate() {
                for (x, y) in data.x.iter().zip(&series.y) {
                    s.push_str(&format!(
                        "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{}\"/>\n",
                        fmt(sx(*x)),
                        fmt(sy(*y)),
                        PALETTE[k % PALETTE.len()]
                    ));
                }
            }
        }
        PlotKind::StackedBar => {
            let bars = data.x.len();
            let slot = plot_w / bars as f64;
            let bar_w = slot * 0.7;
            for b in 0..bars {
                let mut cum = 0.0;
                for (k, series) in data.series.iter().enumerate() {
                    let h = series.y[b] / 100.0 * plot_h;
                    let y_top = MARGIN_TOP + plot_h - cum - h;
                    s.push_str(&format!(
                        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                        fmt(MARGIN_LEFT + b as f64 * slot + (slot - bar_w) / 2.0),
                        fmt(y_top),
                        fmt(bar_w),
                        fmt(h),
                        PALETTE[k % PALETTE.len()]
                    ));
                    cum += h;
                }
            }
        }
        PlotKind::Histogram => {
            let bins = data.x.len();
            let edges: Option<Vec<f64>> = data
                .meta
                .get("bin_edges")
                .and_then(|v| v.as_array())
                .map(|a| a.iter().filter_map(|v| v.as_f64()).collect());
            for (b, density) in data.series[0].y.iter().enumerate() {
                let (x0, x1) = match &edges {
                    Some(e) if e.len() == bins + 1 => (e[b], e[b + 1]),
                    _ => (data.x[b] - 0.5, data.x[b] + 0.5),
                };
                s.push_str(&format!(
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#ffffff\"/>\n",
                    fmt(sx(x0).min(sx(x1))),
                    fmt(sy(*density)),
                    fmt((sx(x1) - sx(x0)).abs()),
                    fmt(sy(0.0) - sy(*density)),
                    PALETTE[0]
                ));
            }
        }
        PlotKind::Boxplot => {
            let cols = data.x.len();
            let slot = plot_w / cols as f64;
            let box_w = slot * 0.5;
            for c in 0..cols {
                let q = |k: usize| data.series[k].y[c];
                let cx = MARGIN_LEFT + c as f64 * slot + slot / 2.0;
                // Whisker q10..q90.
                s.push_str(&format!(
                    "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#444444\"/>\n",
                    fmt(cx),
                    fmt(sy(q(0))),
                    fmt(cx),
                    fmt(sy(q(4)))
                ));
                // Box q25..q75.
                s.push_str(&format!(
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#444444\"/>\n",
                    fmt(cx - box_w / 2.0),
                    fmt(sy(q(3))),
                    fmt(box_w),
                    fmt(sy(q(1)) - sy(q(3))),
                    "#9ecae1"
                ));
                // Median line.
                s.push_str(&format!(
                    "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#d62728\" stroke-width=\"2\"/>\n",
                    fmt(cx - box_w / 2.0),
                    fmt(sy(q(2))),
                    fmt(cx + box_w / 2.0),
                    fmt(sy(q(2)))
                ));
            }
        }
        PlotKind::Heatmap => {
            let k = data.x.len();
            let cell_w = plot_w / k as f64;
            let cell_h = plot_h / k as f64;
            for (i, series) in data.series.iter().enumerate() {
                for (j, v) in series.y.iter().enumerate() {
                    // Map [-1, 1] to a blue..red ramp.
                    let t = ((v + 1.0) / 2.0).clamp(0.0, 1.0);
                    let r = (255.0 * t) as u8;
                    let b = (255.0 * (1.0 - t)) as u8;
                    s.push_str(&format!(
                        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({},{},{})\"/>\n",
                        fmt(MARGIN_LEFT + j as f64 * cell_w),
                        fmt(MARGIN_TOP + i as f64 * cell_h),
                        fmt(cell_w),
                        fmt(cell_h),
                        r,
                        96,
                        b
                    ));
                    s.push_str(&format!(
                        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#ffffff\">{}</text>\n",
                        fmt(MARGIN_LEFT + (j as f64 + 0.5) * cell_w),
                        fmt(MARGIN_TOP + (i as f64 + 0.5) * cell_h + 4.0),
                        fmt(*v)
                    ));
                }
            }
        }
    }

    // Event markers: labeled vertical rules located by timestamp when the
    // line chart carries timestamps, else by x position parsed from date.
    if !data.events.is_empty() {
        let timestamps: Vec<String> = data
            .meta
            .get("timestamps")
            .and_then(|v| v.as_array())
            .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
            .unwrap_or_default();
        for ev in &data.events {
            let pos = timestamps
                .iter()
                .position(|t| t.starts_with(&ev.date))
                .map(|i| i as f64);
            if let Some(x) = pos {
                s.push_str(&format!(
                    "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#d62728\" stroke-dasharray=\"4,3\"/>\n",
                    fmt(sx(x)),
                    fmt(MARGIN_TOP),
                    fmt(MARGIN_TOP + plot_h)
                ));
                s.push_str(&format!(
                    "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#d62728\">{}</text>\n",
                    fmt(sx(x) + 4.0),
                    fmt(MARGIN_TOP + 14.0),
                    xml_escape(&ev.label)
                ));
            }
        }
    }

    // Axis labels.
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#444444\">{}</text>\n",
        fmt(MARGIN_LEFT),
        fmt(HEIGHT - 14.0),
        fmt(xmin)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\" fill=\"#444444\">{}</text>\n",
        fmt(WIDTH - MARGIN_RIGHT),
        fmt(HEIGHT - 14.0),
        fmt(xmax)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\" fill=\"#444444\">{}</text>\n",
        fmt(MARGIN_LEFT - 6.0),
        fmt(MARGIN_TOP + 10.0),
        fmt(ymax)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\" fill=\"#444444\">{}</text>\n",
        fmt(MARGIN_LEFT - 6.0),
        fmt(MARGIN_TOP + plot_h),
        fmt(ymin)
    ));
    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub fn render_svg(data: &PlotData, path: impl AsRef<Path>) -> Result<(), VizError> {
    std::fs::write(path, svg_string(data)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Timestamp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stacked_bar_shares() {
        let labels = vec!["jan".to_string()];
        let data = build_stacked_bar(
            &labels,
            &[
                ("solar".into(), vec![50.0]),
                ("wind".into(), vec![150.0]),
            ],
            &[200.0],
        )
        .unwrap();
        assert_eq!(data.series[0].y[0], 25.0);
        assert_eq!(data.series[1].y[0], 75.0);

        let single = build_stacked_bar(
            &labels,
            &[("all".into(), vec![42.0])],
            &[42.0],
        )
        .unwrap();
        assert_eq!(single.series[0].y[0], 100.0);

        assert!(matches!(
            build_stacked_bar(&labels, &[("a".into(), vec![0.0])], &[0.0]),
            Err(VizError::ZeroTotal(_))
        ));
    }

    #[test]
    fn stacked_bar_shares_sum_to_100() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bars = 1000;
        let labels: Vec<String> = (0..bars).map(|i| format!("b{i}")).collect();
        let cats: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..bars).map(|_| rng.gen_range(1.0..100.0)).collect())
            .collect();
        let totals: Vec<f64> = (0..bars).map(|b| cats.iter().map(|c| c[b]).sum()).collect();
        let named: Vec<(String, Vec<f64>)> = cats
            .into_iter()
            .enumerate()
            .map(|(i, c)| (format!("c{i}"), c))
            .collect();
        let data = build_stacked_bar(&labels, &named, &totals).unwrap();
        for b in 0..bars {
            let sum: f64 = data.series.iter().map(|s| s.y[b]).sum();
            assert!((sum - 100.0).abs() < 1e-9, "bar {b}: {sum}");
        }
    }

    #[test]
    fn boxplot_interpolated_quantiles() {
        let col: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let data = build_boxplot(&[col]).unwrap();
        let expected = [10.9, 25.75, 50.5, 75.25, 90.1];
        for (k, e) in expected.iter().enumerate() {
            assert!(
                (data.series[k].y[0] - e).abs() < 1e-9,
                "q{k}: {} vs {e}",
                data.series[k].y[0]
            );
        }

        let flat = build_boxplot(&[vec![7.0; 12]]).unwrap();
        for k in 0..5 {
            assert_eq!(flat.series[k].y[0], 7.0);
        }

        assert!(matches!(
            build_boxplot(&[vec![1.0, 2.0]]),
            Err(VizError::ShortColumn { .. })
        ));
    }

    #[test]
    fn boxplot_quantiles_monotone_on_random_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cols: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..50).map(|_| rng.gen_range(-10.0..10.0)).collect())
            .collect();
        let data = build_boxplot(&cols).unwrap();
        for c in 0..cols.len() {
            for k in 1..5 {
                assert!(data.series[k].y[c] >= data.series[k - 1].y[c]);
            }
        }
    }

    #[test]
    fn histogram_integrates_to_one() {
        let single = build_histogram(&[3.0], 1).unwrap();
        let masses = single.meta["masses"].as_array().unwrap();
        assert_eq!(masses[0].as_f64().unwrap(), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sample: Vec<f64> = (0..100_000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let data = build_histogram(&sample, 10).unwrap();
        let edges: Vec<f64> = data.meta["bin_edges"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let mut integral = 0.0;
        for (b, density) in data.series[0].y.iter().enumerate() {
            let width = edges[b + 1] - edges[b];
            integral += density * width;
            let mass = density * width;
            assert!((mass - 0.1).abs() < 0.01, "bin {b} mass {mass}");
        }
        assert!((integral - 1.0).abs() < 1e-9);

        assert!(matches!(build_histogram(&[], 5), Err(VizError::EmptySample)));
    }

    #[test]
    fn cdf_ends_at_one_and_matches_histogram_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample: Vec<f64> = (0..5000).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let cdf = build_cdf(&sample).unwrap();
        assert_eq!(*cdf.series[0].y.last().unwrap(), 1.0);

        let hist = build_histogram(&sample, 16).unwrap();
        let edges: Vec<f64> = hist.meta["bin_edges"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let masses: Vec<f64> = hist.meta["masses"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let n = sample.len() as f64;
        let mut cum = 0.0;
        for b in 0..masses.len() - 1 {
            cum += masses[b];
            // ECDF value at the bin's right edge.
            let edge = edges[b + 1];
            let below = sample.iter().filter(|v| **v < edge).count() as f64 / n;
            assert!((cum - below).abs() < 1e-9, "edge {b}");
        }
    }

    #[test]
    fn heatmap_delegates_to_pearson() {
        let ts = |vals: &[f64]| {
            SeriesView::hourly_from(
                Timestamp::from_ymdh(2020, 1, 1, 0).unwrap(),
                vals.iter().map(|v| Some(*v)).collect(),
            )
        };
        let a = ts(&[1.0, 2.0, 3.0, 4.0]);
        let b = ts(&[2.0, 4.0, 6.0, 8.0]);
        let data = build_heatmap(&["a".into(), "b".into()], &[a, b]).unwrap();
        assert_eq!(data.series[0].y[0], 1.0);
        assert!((data.series[0].y[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svg_rendering_is_deterministic() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let data = build_stacked_bar(
            &labels,
            &[
                ("x".into(), vec![30.0, 60.0]),
                ("y".into(), vec![70.0, 40.0]),
            ],
            &[100.0, 100.0],
        )
        .unwrap();
        let one = svg_string(&data).unwrap();
        let two = svg_string(&data).unwrap();
        assert_eq!(one, two);
        assert!(one.starts_with("<svg"));
    }

    #[test]
    fn empty_series_list_yields_axes_only_document() {
        let data = PlotData {
            kind: PlotKind::Line,
            x: vec![],
            series: vec![],
            events: vec![],
            meta: BTreeMap::new(),
        };
        let svg = svg_string(&data).unwrap();
        assert!(svg.contains("<rect"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn stacked_bar_rect_heights_match_shares() {
        let labels: Vec<String> = (0..4).map(|i| format!("m{i}")).collect();
        let cats = vec![
            ("one".to_string(), vec![10.0, 20.0, 30.0, 40.0]),
            ("two".to_string(), vec![90.0, 80.0, 70.0, 60.0]),
        ];
        let totals = vec![100.0; 4];
        let data = build_stacked_bar(&labels, &cats, &totals).unwrap();
        let svg = svg_string(&data).unwrap();
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        // Parse rect heights back out (skipping the background + frame).
        let heights: Vec<f64> = svg
            .lines()
            .filter(|l| l.starts_with("<rect") && l.contains("fill=\"#"))
            .skip(1) // background rect has fill #ffffff; frame has fill none
            .filter_map(|l| {
                l.split("height=\"")
                    .nth(1)
                    .and_then(|rest| rest.split('"').next())
                    .and_then(|v| v.parse::<f64>().ok())
            })
            .collect();
        // Rects are emitted bar-major, category-minor.
        let mut idx = 0;
        for b in 0..4 {
            for series in &data.series {
                let expected = series.y[b] / 100.0 * plot_h;
                assert!(
                    (heights[idx] - expected).abs() <= 0.5,
                    "bar {b}: height {} vs {expected}",
                    heights[idx]
                );
                idx += 1;
            }
        }
    }

    #[test]
    fn line_chart_with_events_and_gaps() {
        let s = SeriesView::hourly_from(
            Timestamp::from_ymdh(2020, 3, 1, 0).unwrap(),
            (0..72)
                .map(|i| if i == 30 { None } else { Some(i as f64) })
                .collect(),
        );
        let events = vec![EventMarker {
            date: "2020-03-02".into(),
            label: "event".into(),
        }];
        let data = build_line(&[("load".into(), s)], &events).unwrap();
        assert_eq!(data.series[0].y.len(), 71); // gap dropped
        let svg = svg_string(&data).unwrap();
        assert!(svg.contains("stroke-dasharray"), "event rule missing");
        assert!(svg.contains(">event<"), "event label missing");
    }
}

//! Core engine for quantifying how an extreme event changes power-system
//! operating patterns: hourly wide-frame time series, five counterfactual
//! baseline families (including a rank-based fluctuation index and
//! probabilistic quantile baselines), an OLS/VAR regression battery, plot
//! data builders, and the empirical study recipes built on top of them.

pub mod baseline;
pub mod dist;
pub mod frame;
pub mod ingest;
pub mod learners;
pub mod linalg;
pub mod regress;
pub mod studies;
pub mod viz;

pub use frame::{AggregationLevel, SeriesView, Timestamp, WideFrame};

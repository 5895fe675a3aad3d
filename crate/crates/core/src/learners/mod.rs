//! Parametric learners and losses behind the baseline estimators: ridge
//! regression (squared or pinball loss), a small feed-forward network, and
//! conditional-sum-of-squares ARMA. Everything is seeded and serializable.

mod arma;
mod mlp;
mod ridge;

pub use arma::{fit_arma_css, simulate_arma, ArmaModel};
pub use mlp::{fit_mlp, MlpModel};
pub use ridge::{fit_ridge, RidgeModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("misaligned: {0}")]
    Misaligned(String),
    #[error("not-fitted: model has no calibrated parameters")]
    NotFitted,
    #[error("empty-ensemble: at least one member model is required")]
    EmptyEnsemble,
    #[error("singular: design matrix column {0} is linearly dependent")]
    Singular(usize),
    #[error("no-converge: {0}")]
    NoConverge(String),
    #[error("diverged: training loss became non-finite")]
    Diverged,
    #[error("unstable: AR polynomial has a root inside the unit circle (radius {0:.4})")]
    Unstable(f64),
    #[error("short-series: need at least {need} observations, got {got}")]
    ShortSeries { need: usize, got: usize },
    #[error("bad-spec: {0}")]
    BadSpec(String),
    #[error("unknown-feature: {0}")]
    UnknownFeature(String),
}

/// Rectangular named feature matrix; no missing values allowed here,
/// imputation happens upstream in ingest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, LearnError> {
        let width = names.len();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(LearnError::BadSpec(format!("duplicate feature name {n:?}")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(LearnError::Misaligned(format!(
                    "row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(LearnError::BadSpec(format!("non-finite value in row {i}")));
            }
        }
        Ok(Self { names, rows })
    }

    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self, LearnError> {
        let n = columns.first().map(|(_, v)| v.len()).unwrap_or(0);
        for (name, col) in &columns {
            if col.len() != n {
                return Err(LearnError::Misaligned(format!(
                    "column {name:?} has {} values, expected {n}",
                    col.len()
                )));
            }
        }
        let names = columns.iter().map(|(n, _)| n.clone()).collect();
        let rows = (0..n)
            .map(|i| columns.iter().map(|(_, c)| c[i]).collect())
            .collect();
        Self::new(names, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, LearnError> {
        let idx = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| LearnError::UnknownFeature(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            names: self.names.clone(),
            rows: self.rows[start..end].to_vec(),
        }
    }
}

/// Training loss: squared error or the pinball loss at quantile level q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Squared,
    Pinball(f64),
}

impl LossKind {
    pub fn validate(&self) -> Result<(), LearnError> {
        if let LossKind::Pinball(q) = self {
            if !(*q > 0.0 && *q < 1.0) {
                return Err(LearnError::BadSpec(format!(
                    "pinball level must lie strictly inside (0,1), got {q}"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, y: f64, yhat: f64) -> f64 {
        match self {
            LossKind::Squared => (y - yhat) * (y - yhat),
            LossKind::Pinball(q) => pinball(y, yhat, *q),
        }
    }
}

/// Pinball loss: `q (y - yhat)` when the prediction undershoots,
/// `(1 - q)(yhat - y)` when it overshoots.
pub fn pinball(y: f64, yhat: f64, q: f64) -> f64 {
    if y >= yhat {
        q * (y - yhat)
    } else {
        (1.0 - q) * (yhat - y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum LearnerKind {
    Ridge {
        lambda: f64,
    },
    Mlp {
        hidden: Vec<usize>,
        learning_rate: f64,
        epochs: usize,
        seed: u64,
    },
    Arma {
        p: usize,
        d: usize,
        q: usize,
    },
}

/// A learner choice plus its training loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub loss: LossKind,
}

impl LearnerSpec {
    pub fn ridge(lambda: f64) -> Self {
        Self {
            kind: LearnerKind::Ridge { lambda },
            loss: LossKind::Squared,
        }
    }

    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        self.loss.validate()?;
        match &self.kind {
            LearnerKind::Ridge { lambda } => {
                if !(*lambda >= 0.0) {
                    return Err(LearnError::BadSpec("lambda must be >= 0".into()));
                }
            }
            LearnerKind::Mlp {
                hidden,
                learning_rate,
                epochs,
                ..
            } => {
                if hidden.iter().any(|&h| h == 0) {
                    return Err(LearnError::BadSpec("hidden sizes must be positive".into()));
                }
                if !(*learning_rate > 0.0) {
                    return Err(LearnError::BadSpec("learning rate must be positive".into()));
                }
                if *epochs < 1 {
                    return Err(LearnError::BadSpec("epochs must be >= 1".into()));
                }
            }
            LearnerKind::Arma { .. } => {}
        }
        Ok(())
    }
}

/// Any calibrated model; serializes to JSON with spec, coefficients and
/// training metadata, and a reloaded model reproduces predictions exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum FittedModel {
    Ridge(RidgeModel),
    Mlp(MlpModel),
    Arma(ArmaModel),
}

impl FittedModel {
    /// Row-wise predictions for feature-driven models.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        match self {
            FittedModel::Ridge(m) => m.predict(x),
            FittedModel::Mlp(m) => m.predict(x),
            FittedModel::Arma(_) => Err(LearnError::BadSpec(
                "ARMA models predict from their own history, not a feature matrix".into(),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LearnError> {
        serde_json::from_str(s).map_err(|e| LearnError::BadSpec(format!("bad model JSON: {e}")))
    }
}

/// Fits one feature-driven learner according to its spec.
pub fn fit(spec: &LearnerSpec, x: &FeatureMatrix, y: &[f64]) -> Result<FittedModel, LearnError> {
    spec.validate()?;
    match &spec.kind {
        LearnerKind::Ridge { lambda } => Ok(FittedModel::Ridge(fit_ridge(x, y, *lambda, spec.loss)?)),
        LearnerKind::Mlp {
            hidden,
            learning_rate,
            epochs,
            seed,
        } => Ok(FittedModel::Mlp(fit_mlp(
            x,
            y,
            hidden,
            *learning_rate,
            *epochs,
            *seed,
            spec.loss,
        )?)),
        LearnerKind::Arma { p, d, q } => Ok(FittedModel::Arma(fit_arma_css(y, *p, *d, *q)?)),
    }
}

/// Picks the spec with the lowest mean validation loss over expanding
/// time-ordered folds; ties keep the earliest grid entry.
pub fn grid_search(
    grid: &[LearnerSpec],
    x: &FeatureMatrix,
    y: &[f64],
    k: usize,
) -> Result<LearnerSpec, LearnError> {
    if grid.is_empty() {
        return Err(LearnError::BadSpec("empty spec grid".into()));
    }
    if k < 2 {
        return Err(LearnError::BadSpec("k-fold requires k >= 2".into()));
    }
    let n = y.len();
    if x.n_rows() != n {
        return Err(LearnError::Misaligned(format!(
            "{} feature rows vs {} targets",
            x.n_rows(),
            n
        )));
    }
    if n < 2 * k {
        return Err(LearnError::ShortSeries { need: 2 * k, got: n });
    }
    let bounds: Vec<usize> = (0..=k).map(|i| i * n / k).collect();
    let mut best: Option<(usize, f64)> = None;
    for (gi, spec) in grid.iter().enumerate() {
        spec.validate()?;
        let mut total = 0.0;
        let mut folds = 0usize;
        for f in 1..k {
            let train_end = bounds[f];
            let valid_end = bounds[f + 1];
            match fold_loss(spec, x, y, train_end, valid_end) {
                Some(loss) => {
                    total += loss;
                    folds += 1;
                }
                None => {
                    total = f64::INFINITY;
                    break;
                }
            }
        }
        let mean_loss = if folds == 0 || !total.is_finite() {
            f64::INFINITY
        } else {
            total / folds as f64
        };
        if best.map(|(_, b)| mean_loss < b).unwrap_or(true) {
            best = Some((gi, mean_loss));
        }
    }
    let (idx, _) = best.expect("non-empty grid");
    Ok(grid[idx].clone())
}

fn fold_loss(
    spec: &LearnerSpec,
    x: &FeatureMatrix,
    y: &[f64],
    train_end: usize,
    valid_end: usize,
) -> Option<f64> {
    let y_train = &y[..train_end];
    let y_valid = &y[train_end..valid_end];
    let preds = match &spec.kind {
        LearnerKind::Arma { p, d, q } => {
            let model = fit_arma_css(y_train, *p, *d, *q).ok()?;
            model.forecast(y_valid.len())
        }
        _ => {
            let x_train = x.slice_rows(0, train_end);
            let x_valid = x.slice_rows(train_end, valid_end);
            let model = fit(spec, &x_train, y_train).ok()?;
            model.predict(&x_valid).ok()?
        }
    };
    let mut loss = 0.0;
    for (yi, pi) in y_valid.iter().zip(&preds) {
        loss += spec.loss.eval(*yi, *pi);
    }
    Some(loss / y_valid.len() as f64)
}

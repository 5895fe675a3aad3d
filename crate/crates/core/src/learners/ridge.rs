//! Linear model with an unpenalized intercept: closed form under squared
//! loss, iteratively reweighted least squares under pinball loss.

use super::{FeatureMatrix, LearnError, LossKind};
use crate::linalg;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub loss: LossKind,
}

impl RidgeModel {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        if x.names() != self.feature_names.as_slice() {
            return Err(LearnError::Misaligned(format!(
                "feature schema {:?} does not match the fitted schema {:?}",
                x.names(),
                self.feature_names
            )));
        }
        Ok(x.rows()
            .iter()
            .map(|row| {
                self.intercept
                    + row
                        .iter()
                        .zip(&self.coefficients)
                        .map(|(v, c)| v * c)
                        .sum::<f64>()
            })
            .collect())
    }

    /// Total training loss of this model on the given data.
    pub fn objective(&self, x: &FeatureMatrix, y: &[f64]) -> Result<f64, LearnError> {
        let preds = self.predict(x)?;
        let mut obj = preds
            .iter()
            .zip(y)
            .map(|(p, yi)| self.loss.eval(*yi, *p))
            .sum::<f64>();
        obj += self.lambda * self.coefficients.iter().map(|c| c * c).sum::<f64>();
        Ok(obj)
    }
}

pub fn fit_ridge(
    x: &FeatureMatrix,
    y: &[f64],
    lambda: f64,
    loss: LossKind,
) -> Result<RidgeModel, LearnError> {
    loss.validate()?;
    if !(lambda >= 0.0) {
        return Err(LearnError::BadSpec("lambda must be >= 0".into()));
    }
    let n = x.n_rows();
    if n != y.len() {
        return Err(LearnError::Misaligned(format!(
            "{} feature rows vs {} targets",
            n,
            y.len()
        )));
    }
    let p = x.n_cols() + 1; // intercept first
    if n < p {
        return Err(LearnError::ShortSeries { need: p, got: n });
    }
    let design: Vec<Vec<f64>> = x
        .rows()
        .iter()
        .map(|row| {
            let mut r = Vec::with_capacity(p);
            r.push(1.0);
            r.extend_from_slice(row);
            r
        })
        .collect();

    let beta = match loss {
        LossKind::Squared => solve_penalized(&design, y, None, lambda)?,
        LossKind::Pinball(q) => irls_pinball(&design, y, lambda, q)?,
    };
    Ok(RidgeModel {
        feature_names: x.names().to_vec(),
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        lambda,
        loss,
    })
}

/// Solves (X'WX + lambda*I~) beta = X'Wy with the intercept unpenalized.
fn solve_penalized(
    design: &[Vec<f64>],
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
) -> Result<Vec<f64>, LearnError> {
    let p = design[0].len();
    let mut gram = linalg::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for (i, row) in design.iter().enumerate() {
        let w = weights.map(|w| w[i]).unwrap_or(1.0);
        for a in 0..p {
            let wa = w * row[a];
            if wa == 0.0 {
                continue;
            }
            rhs[a] += wa * y[i];
            for b in a..p {
                gram[a][b] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[a][b] = gram[b][a];
        }
    }
    for (j, row) in gram.iter_mut().enumerate().skip(1) {
        row[j] += lambda;
    }
    linalg::solve(&gram, &rhs).map_err(LearnError::Singular)
}

/// Quantile regression by IRLS on a Huberized pinball: the working weight
/// for residual r is c(r) / max(|r|, eps) with c = q above the line and
/// 1 - q below it; eps starts at 1e-6 and is annealed by 0.1 three times.
/// At larger sample sizes the iterates can cycle among near-optimal
/// vertices, so convergence is judged on the objective and the best
/// iterate seen is returned.
fn irls_pinball(design: &[Vec<f64>], y: &[f64], lambda: f64, q: f64) -> Result<Vec<f64>, LearnError> {
    let objective = |beta: &[f64]| -> f64 {
        let mut obj = lambda * beta[1..].iter().map(|b| b * b).sum::<f64>();
        for (row, yi) in design.iter().zip(y) {
            let fit: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            obj += super::pinball(*yi, fit, q);
        }
        obj
    };
    let mut beta = solve_penalized(design, y, None, lambda.max(1e-8))?;
    let mut best = (objective(&beta), beta.clone());
    let mut eps = 1e-6;
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for _stage in 0..4 {
        let mut prev_obj = objective(&beta);
        for _iter in 0..200 {
            let mut weights = Vec::with_capacity(y.len());
            for (row, yi) in design.iter().zip(y) {
                let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let r = yi - fit;
                let c = if r >= 0.0 { q } else { 1.0 - q };
                weights.push(c / r.abs().max(eps * scale));
            }
            beta = solve_penalized(design, y, Some(&weights), lambda)?;
            let obj = objective(&beta);
            if !obj.is_finite() {
                return Err(LearnError::NoConverge(
                    "pinball IRLS objective became non-finite".into(),
                ));
            }
            if obj < best.0 {
                best = (obj, beta.clone());
            }
            if (prev_obj - obj).abs() <= 1e-12 * (1.0 + obj.abs()) {
                break;
            }
            prev_obj = obj;
        }
        eps *= 0.1;
    }
    Ok(best.1)
}

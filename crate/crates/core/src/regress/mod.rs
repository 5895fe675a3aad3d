//! OLS and VAR estimation with the accompanying statistical-test battery:
//! t/F/normality tests on OLS fits, ADF / Engle-Granger / Granger tests,
//! Ljung-Box and Durbin-Watson residual diagnostics, coefficient-robustness
//! checks, impulse responses and forecast error variance decomposition.

mod post;
mod stattests;

pub use post::{fevd, impulse_response, robustness_test, RobustnessSummary};
pub use stattests::{
    adf_test, cointegration_test, durbin_watson, granger_test, ljung_box, AdfRegression,
    LagSelect, TestResult,
};

use crate::dist;
use crate::learners::FeatureMatrix;
use crate::linalg;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("collinear: design column {0:?} is linearly dependent")]
    Collinear(String),
    #[error("short-series: need at least {need} observations, got {got}")]
    ShortSeries { need: usize, got: usize },
    #[error("zero-variance: residual series is constant")]
    ZeroVariance,
    #[error("unstable: VAR spectral radius {0:.4} is not below 1")]
    Unstable(f64),
    #[error("bad-covariance: residual covariance is not positive definite")]
    BadCovariance,
    #[error("bad-spec: {0}")]
    BadSpec(String),
    #[error("misaligned: {0}")]
    Misaligned(String),
    #[error("unknown-feature: {0}")]
    UnknownFeature(String),
}

/// One regression term of an OLS design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "term", content = "of")]
pub enum Term {
    Intercept,
    Linear(String),
    Quadratic(String),
    Interaction(String, String),
    Log(String),
}

impl Term {
    pub fn label(&self) -> String {
        match self {
            Term::Intercept => "const".into(),
            Term::Linear(x) => x.clone(),
            Term::Quadratic(x) => format!("{x}^2"),
            Term::Interaction(x, y) => format!("{x}*{y}"),
            Term::Log(x) => format!("ln({x})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsSpec {
    pub response: String,
    pub terms: Vec<Term>,
}

impl OlsSpec {
    pub fn validate(&self) -> Result<(), RegressError> {
        for (i, t) in self.terms.iter().enumerate() {
            if self.terms[..i].iter().any(|u| u.label() == t.label()) {
                return Err(RegressError::BadSpec(format!(
                    "duplicate term {}",
                    t.label()
                )));
            }
        }
        if self.terms.is_empty() {
            return Err(RegressError::BadSpec("no terms".into()));
        }
        Ok(())
    }

    fn has_intercept(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Term::Intercept))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OlsReport {
    pub spec: OlsSpec,
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: Option<f64>,
    pub f_p_value: Option<f64>,
    pub jarque_bera: TestResult,
    pub nobs: usize,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
}

impl OlsReport {
    pub fn coefficient(&self, label: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.term == label)
    }

    /// Plain-text coefficient table: Parameter / Coeff / Std / t-Test / p-Value.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>12} {:>10} {:>10} {:>10}",
            "Parameter", "Coeff", "Std", "t-Test", "p-Value"
        );
        for c in &self.coefficients {
            let _ = writeln!(
                out,
                "{:<14} {:>12.4} {:>10.3} {:>10.3} {:>10.3}",
                c.term, c.estimate, c.std_error, c.t_stat, c.p_value
            );
        }
        let _ = writeln!(
            out,
            "R-squared {:.4}   adj {:.4}   n {}",
            self.r_squared, self.adj_r_squared, self.nobs
        );
        if let (Some(f), Some(p)) = (self.f_statistic, self.f_p_value) {
            let _ = writeln!(out, "F {f:.3} (p {p:.4})");
        }
        let _ = writeln!(
            out,
            "Jarque-Bera {:.3} (p {:.4})",
            self.jarque_bera.statistic,
            self.jarque_bera.p_value.unwrap_or(f64::NAN)
        );
        out
    }
}

/// Plain least squares over prepared design columns; shared by every test
/// in the battery. `names` label the columns for collinearity reports.
pub(crate) struct OlsCore {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub ssr: f64,
    pub xtx_inv: Vec<Vec<f64>>,
    pub sigma2: f64,
    pub n: usize,
    pub k: usize,
}

pub(crate) fn ols_core(
    rows: &[Vec<f64>],
    y: &[f64],
    names: &[String],
) -> Result<OlsCore, RegressError> {
    let n = rows.len();
    let k = rows.first().map(|r| r.len()).unwrap_or(0);
    if n <= k {
        return Err(RegressError::ShortSeries { need: k + 1, got: n });
    }
    let gram = linalg::gram(rows);
    let rhs = linalg::gram_vec(rows, y);
    let beta = linalg::solve(&gram, &rhs)
        .map_err(|col| RegressError::Collinear(names.get(col).cloned().unwrap_or_default()))?;
    let xtx_inv = linalg::invert(&gram)
        .map_err(|col| RegressError::Collinear(names.get(col).cloned().unwrap_or_default()))?;
    let fitted: Vec<f64> = rows.iter().map(|r| dot(r, &beta)).collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(yi, f)| yi - f).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = ssr / (n - k) as f64;
    Ok(OlsCore {
        beta,
        residuals,
        fitted,
        ssr,
        xtx_inv,
        sigma2,
        n,
        k,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the OLS model described by `spec` over named data columns.
pub fn fit_ols(spec: &OlsSpec, data: &FeatureMatrix) -> Result<OlsReport, RegressError> {
    spec.validate()?;
    let y = data
        .column(&spec.response)
        .map_err(|_| RegressError::UnknownFeature(spec.response.clone()))?;
    let mut columns = Vec::with_capacity(spec.terms.len());
    for term in &spec.terms {
        columns.push(term_column(term, data)?);
    }
    let n = y.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    let names: Vec<String> = spec.terms.iter().map(|t| t.label()).collect();
    let core = ols_core(&rows, &y, &names)?;

    let with_intercept = spec.has_intercept();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = if with_intercept {
        y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum()
    } else {
        y.iter().map(|v| v * v).sum()
    };
    let r_squared = if sst > 0.0 { 1.0 - core.ssr / sst } else { 1.0 };
    let k = core.k;
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / (n as f64 - k as f64);

    let df_model = k - usize::from(with_intercept);
    let (f_statistic, f_p_value) = if df_model > 0 && sst > core.ssr && n > k {
        let f = ((sst - core.ssr) / df_model as f64) / (core.ssr / (n - k) as f64);
        (
            Some(f),
            Some(dist::f_sf(f, df_model as f64, (n - k) as f64)),
        )
    } else {
        (None, None)
    };

    let df_resid = (n - k) as f64;
    let coefficients = spec
        .terms
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let se = (core.sigma2 * core.xtx_inv[j][j]).max(0.0).sqrt();
            let t_stat = if se > 0.0 { core.beta[j] / se } else { f64::INFINITY };
            Coefficient {
                term: t.label(),
                estimate: core.beta[j],
                std_error: se,
                t_stat,
                p_value: dist::student_t_two_sided(t_stat, df_resid),
            }
        })
        .collect();

    let jarque_bera = jarque_bera(&core.residuals)?;

    Ok(OlsReport {
        spec: spec.clone(),
        coefficients,
        r_squared,
        adj_r_squared,
        f_statistic,
        f_p_value,
        jarque_bera,
        nobs: n,
        residuals: core.residuals,
        fitted: core.fitted,
    })
}

fn term_column(term: &Term, data: &FeatureMatrix) -> Result<Vec<f64>, RegressError> {
    let col = |name: &str| {
        data.column(name)
            .map_err(|_| RegressError::UnknownFeature(name.to_string()))
    };
    Ok(match term {
        Term::Intercept => vec![1.0; data.n_rows()],
        Term::Linear(x) => col(x)?,
        Term::Quadratic(x) => col(x)?.into_iter().map(|v| v * v).collect(),
        Term::Interaction(x, y) => {
            let a = col(x)?;
            let b = col(y)?;
            a.into_iter().zip(b).map(|(u, v)| u * v).collect()
        }
        Term::Log(x) => {
            let v = col(x)?;
            if let Some(bad) = v.iter().find(|u| **u <= 0.0) {
                return Err(RegressError::BadSpec(format!(
                    "log term {x} requires positive data, found {bad}"
                )));
            }
            v.into_iter().map(|u| u.ln()).collect()
        }
    })
}

/// Jarque-Bera normality statistic of a residual series.
pub fn jarque_bera(residuals: &[f64]) -> Result<TestResult, RegressError> {
    let n = residuals.len();
    if n < 4 {
        return Err(RegressError::ShortSeries { need: 4, got: n });
    }
    let nf = n as f64;
    let mean = residuals.iter().sum::<f64>() / nf;
    let m2 = residuals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Err(RegressError::ZeroVariance);
    }
    let m3 = residuals.iter().map(|e| (e - mean).powi(3)).sum::<f64>() / nf;
    let m4 = residuals.iter().map(|e| (e - mean).powi(4)).sum::<f64>() / nf;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let jb = nf / 6.0 * (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0);
    let p = dist::chi2_sf(jb, 2.0);
    Ok(TestResult::from_p("jarque-bera", jb, p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub names: Vec<String>,
    pub order: usize,
}

/// Residual diagnostics per VAR equation. The ADF entry is absent when the
/// residual sample is too short to run it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarEquationDiag {
    pub equation: String,
    pub residual_adf: Option<TestResult>,
    pub ljung_box: TestResult,
    pub durbin_watson: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarReport {
    pub spec: VarSpec,
    pub intercept: Vec<f64>,
    /// coef[l][i][j]: effect of variable j at lag l+1 on equation i.
    pub coef: Vec<Vec<Vec<f64>>>,
    pub residual_cov: Vec<Vec<f64>>,
    pub diagnostics: Vec<VarEquationDiag>,
    pub nobs: usize,
    pub residuals: Vec<Vec<f64>>,
    /// Retained input series (k x T), used by the robustness test.
    #[serde(skip)]
    pub data: Vec<Vec<f64>>,
}

impl VarReport {
    pub fn k(&self) -> usize {
        self.spec.names.len()
    }

    /// Companion-form matrix (kp x kp).
    pub fn companion(&self) -> Vec<Vec<f64>> {
        companion_of(&self.coef, self.k(), self.spec.order)
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.companion())
    }

    /// One-step in-sample RMSE under the given coefficients (pooled over
    /// equations).
    pub(crate) fn one_step_rmse(
        &self,
        intercept: &[f64],
        coef: &[Vec<Vec<f64>>],
    ) -> f64 {
        let k = self.k();
        let p = self.spec.order;
        let t_len = self.data[0].len();
        let mut sq = 0.0;
        let mut count = 0usize;
        for t in p..t_len {
            for i in 0..k {
                let mut pred = intercept[i];
                for l in 0..p {
                    for j in 0..k {
                        pred += coef[l][i][j] * self.data[j][t - 1 - l];
                    }
                }
                let e = self.data[i][t] - pred;
                sq += e * e;
                count += 1;
            }
        }
        (sq / count as f64).sqrt()
    }

    /// Per-equation coefficient tables in the same layout as the OLS text
    /// rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let k = self.k();
        for i in 0..k {
            let _ = writeln!(out, "equation {}:", self.spec.names[i]);
            let _ = writeln!(out, "{:<14} {:>12}", "Parameter", "Coeff");
            let _ = writeln!(out, "{:<14} {:>12.4}", "const", self.intercept[i]);
            for l in 0..self.spec.order {
                for j in 0..k {
                    let _ = writeln!(
                        out,
                        "{:<14} {:>12.4}",
                        format!("{}.l{}", self.spec.names[j], l + 1),
                        self.coef[l][i][j]
                    );
                }
            }
            let d = &self.diagnostics[i];
            let _ = writeln!(
                out,
                "DW {:.3}   Ljung-Box p {:.4}   residual ADF stat {}",
                d.durbin_watson,
                d.ljung_box.p_value.unwrap_or(f64::NAN),
                d.residual_adf
                    .as_ref()
                    .map(|r| format!("{:.3}", r.statistic))
                    .unwrap_or_else(|| "n/a".into())
            );
        }
        let _ = writeln!(out, "spectral radius {:.4}", self.spectral_radius());
        out
    }
}

pub(crate) fn companion_of(coef: &[Vec<Vec<f64>>], k: usize, p: usize) -> Vec<Vec<f64>> {
    let dim = k * p;
    let mut c = linalg::zeros(dim, dim);
    for l in 0..p {
        for i in 0..k {
            for j in 0..k {
                c[i][l * k + j] = coef[l][i][j];
            }
        }
    }
    for r in k..dim {
        c[r][r - k] = 1.0;
    }
    c
}

/// Equation-by-equation least squares VAR(p) with residual diagnostics.
pub fn fit_var(spec: &VarSpec, data: &[Vec<f64>]) -> Result<VarReport, RegressError> {
    let k = spec.names.len();
    let p = spec.order;
    if p < 1 {
        return Err(RegressError::BadSpec("order must be >= 1".into()));
    }
    if k == 0 || data.len() != k {
        return Err(RegressError::Misaligned(format!(
            "{} series for {} names",
            data.len(),
            k
        )));
    }
    let t_len = data[0].len();
    if data.iter().any(|s| s.len() != t_len) {
        return Err(RegressError::Misaligned("series lengths differ".into()));
    }
    let need = 10 * k * p;
    if t_len < need {
        return Err(RegressError::ShortSeries { need, got: t_len });
    }

    // Shared design: intercept, then lag-1 block, lag-2 block, ...
    let mut names = vec!["const".to_string()];
    for l in 1..=p {
        for name in &spec.names {
            names.push(format!("{name}.l{l}"));
        }
    }
    let nobs = t_len - p;
    let mut rows = Vec::with_capacity(nobs);
    for t in p..t_len {
        let mut row = Vec::with_capacity(1 + k * p);
        row.push(1.0);
        for l in 1..=p {
            for series in data {
                row.push(series[t - l]);
            }
        }
        rows.push(row);
    }

    let mut intercept = vec![0.0; k];
    let mut coef = vec![vec![vec![0.0; k]; k]; p];
    let mut residuals = Vec::with_capacity(k);
    for i in 0..k {
        let y: Vec<f64> = data[i][p..].to_vec();
        let core = ols_core(&rows, &y, &names)?;
        intercept[i] = core.beta[0];
        for l in 0..p {
            for j in 0..k {
                coef[l][i][j] = core.beta[1 + l * k + j];
            }
        }
        residuals.push(core.residuals);
    }

    let dof = nobs.saturating_sub(k * p + 1).max(1) as f64;
    let mut residual_cov = linalg::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let s: f64 = residuals[a]
                .iter()
                .zip(&residuals[b])
                .map(|(x, y)| x * y)
                .sum();
            residual_cov[a][b] = s / dof;
        }
    }

    let mut diagnostics = Vec::with_capacity(k);
    for i in 0..k {
        let res = &residuals[i];
        let lb_lags = (nobs / 5).clamp(1, 10);
        let residual_adf = match adf_test(res, LagSelect::Auto, AdfRegression::Constant) {
            Ok(r) => Some(r),
            Err(RegressError::ShortSeries { .. }) => None,
            Err(e) => return Err(e),
        };
        diagnostics.push(VarEquationDiag {
            equation: spec.names[i].clone(),
            residual_adf,
            ljung_box: ljung_box(res, lb_lags)?,
            durbin_watson: durbin_watson(res)?,
        });
    }

    Ok(VarReport {
        spec: spec.clone(),
        intercept,
        coef,
        residual_cov,
        diagnostics,
        nobs,
        residuals,
        data: data.to_vec(),
    })
}

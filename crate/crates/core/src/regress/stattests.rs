//! Stationarity, cointegration, causality, and autocorrelation tests.
//! ADF and Engle-Granger decisions use embedded MacKinnon response-surface
//! critical values, so no external statistical tables are needed.

use super::{ols_core, RegressError};
use crate::dist;
use serde::{Deserialize, Serialize};

/// Outcome of one statistical test: statistic plus either a p-value or a
/// critical-value comparison, with decisions at the 1/5/10% levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    /// Critical values at 1/5/10% when the decision is threshold-based.
    pub critical_values: Option<[f64; 3]>,
    pub reject_at_1: bool,
    pub reject_at_5: bool,
    pub reject_at_10: bool,
    pub note: Option<String>,
}

impl TestResult {
    pub fn from_p(name: &str, statistic: f64, p: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value: Some(p),
            critical_values: None,
            reject_at_1: p < 0.01,
            reject_at_5: p < 0.05,
            reject_at_10: p < 0.10,
            note: None,
        }
    }

    /// Left-tailed comparison against critical values (ADF-style: reject
    /// when the statistic is below the threshold).
    pub fn from_critical(name: &str, statistic: f64, crit: [f64; 3]) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value: None,
            critical_values: Some(crit),
            reject_at_1: statistic < crit[0],
            reject_at_5: statistic < crit[1],
            reject_at_10: statistic < crit[2],
            note: None,
        }
    }
}

/// Deterministic part of the ADF regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdfRegression {
    /// No deterministic terms; used on residuals that are mean-zero by
    /// construction.
    None,
    Constant,
    ConstantTrend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagSelect {
    /// Schwert rule cap, lag chosen by AIC on a common sample.
    Auto,
    Fixed(usize),
}

// MacKinnon (2010) response-surface coefficients: crit = b0 + b1/T + b2/T^2
// + b3/T^3 at the 1/5/10% levels.
const MACKINNON_NONE: [[f64; 4]; 3] = [
    [-2.56574, -2.2358, -3.627, 0.0],
    [-1.94100, -0.2686, -3.365, 31.223],
    [-1.61682, 0.2656, -2.714, 25.364],
];
const MACKINNON_CONST: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];
const MACKINNON_TREND: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.380],
];
// Engle-Granger residual test, two variables, constant in the first stage.
const MACKINNON_EG2: [[f64; 4]; 3] = [
    [-3.89644, -10.9519, -22.527, 0.0],
    [-3.33613, -6.1101, -6.823, 0.0],
    [-3.04445, -4.2412, -2.720, 0.0],
];

fn critical_values(table: &[[f64; 4]; 3], t: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, row) in table.iter().enumerate() {
        out[i] = row[0] + row[1] / t + row[2] / (t * t) + row[3] / (t * t * t);
    }
    out
}

/// True when the first differences carry no noise beyond the deterministic
/// part of the chosen regression (constant / linear trend).
fn deterministic_diffs(series: &[f64], reg: AdfRegression) -> bool {
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.len() < 3 {
        return false;
    }
    let n = diffs.len() as f64;
    let scale = diffs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    match reg {
        AdfRegression::None => diffs.iter().all(|d| d.abs() < 1e-10 * scale),
        AdfRegression::Constant => {
            let mean = diffs.iter().sum::<f64>() / n;
            diffs.iter().all(|d| (d - mean).abs() < 1e-10 * scale)
        }
        AdfRegression::ConstantTrend => {
            // Residuals of diffs on (const, t): noiseless when diffs are
            // themselves an affine function of t.
            let tm = (n - 1.0) / 2.0;
            let dm = diffs.iter().sum::<f64>() / n;
            let mut num = 0.0;
            let mut den = 0.0;
            for (t, d) in diffs.iter().enumerate() {
                num += (t as f64 - tm) * (d - dm);
                den += (t as f64 - tm) * (t as f64 - tm);
            }
            let slope = if den > 0.0 { num / den } else { 0.0 };
            diffs
                .iter()
                .enumerate()
                .all(|(t, d)| (d - dm - slope * (t as f64 - tm)).abs() < 1e-10 * scale)
        }
    }
}

fn adf_design(
    series: &[f64],
    lag: usize,
    reg: AdfRegression,
    offset: usize,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<String>) {
    let n = series.len();
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let start = offset.max(lag); // index into diffs
    let mut rows = Vec::with_capacity(diffs.len() - start);
    let mut y = Vec::with_capacity(diffs.len() - start);
    let mut names = vec!["level".to_string()];
    match reg {
        AdfRegression::None => {}
        AdfRegression::Constant => names.push("const".into()),
        AdfRegression::ConstantTrend => {
            names.push("const".into());
            names.push("trend".into());
        }
    }
    for l in 1..=lag {
        names.push(format!("d.l{l}"));
    }
    for t in start..diffs.len() {
        // diffs[t] = x[t+1] - x[t]; regress on x[t] and lagged diffs.
        let mut row = vec![series[t]];
        match reg {
            AdfRegression::None => {}
            AdfRegression::Constant => row.push(1.0),
            AdfRegression::ConstantTrend => {
                row.push(1.0);
                row.push((t + 1) as f64);
            }
        }
        for l in 1..=lag {
            row.push(diffs[t - l]);
        }
        rows.push(row);
        y.push(diffs[t]);
    }
    debug_assert!(n > 0);
    (rows, y, names)
}

/// Augmented Dickey-Fuller unit-root test. The statistic is the t ratio on
/// the lagged level; rejection means stationarity.
pub fn adf_test(
    series: &[f64],
    lags: LagSelect,
    reg: AdfRegression,
) -> Result<TestResult, RegressError> {
    let n = series.len();
    let max_lag = match lags {
        LagSelect::Fixed(l) => l,
        LagSelect::Auto => (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize,
    };
    if n < 20 + max_lag {
        return Err(RegressError::ShortSeries {
            need: 20 + max_lag,
            got: n,
        });
    }
    let table = match reg {
        AdfRegression::None => &MACKINNON_NONE,
        AdfRegression::Constant => &MACKINNON_CONST,
        AdfRegression::ConstantTrend => &MACKINNON_TREND,
    };
    // An exact deterministic series (e.g. x_t = t) makes the level regressor
    // collinear with the trend terms; the decision degenerates to
    // "no unit root" instead of crashing.
    if deterministic_diffs(series, reg) {
        let mut r = TestResult::from_critical("adf", -1e12, critical_values(table, n as f64));
        r.note = Some("degenerate: series is an exact deterministic trend".into());
        return Ok(r);
    }
    let chosen = match lags {
        LagSelect::Fixed(l) => l,
        LagSelect::Auto => {
            // AIC over a common estimation sample aligned at max_lag.
            let mut best = (f64::INFINITY, 0usize);
            for lag in 0..=max_lag {
                let (rows, y, names) = adf_design(series, lag, reg, max_lag);
                let core = ols_core(&rows, &y, &names)?;
                let n_eff = core.n as f64;
                let aic = n_eff * (core.ssr / n_eff).max(1e-300).ln() + 2.0 * core.k as f64;
                if aic < best.0 {
                    best = (aic, lag);
                }
            }
            best.1
        }
    };
    let (rows, y, names) = adf_design(series, chosen, reg, chosen);
    let core = ols_core(&rows, &y, &names)?;
    let se = (core.sigma2 * core.xtx_inv[0][0]).sqrt();
    let stat = core.beta[0] / se;
    let mut result = TestResult::from_critical("adf", stat, critical_values(table, core.n as f64));
    result.note = Some(format!("lags {chosen}, regression {reg:?}"));
    Ok(result)
}

/// Engle-Granger two-step cointegration test: OLS of y on x plus constant,
/// then an ADF on the residuals against Engle-Granger critical values.
pub fn cointegration_test(x: &[f64], y: &[f64]) -> Result<TestResult, RegressError> {
    if x.len() != y.len() {
        return Err(RegressError::Misaligned(format!(
            "{} vs {} observations",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 50 {
        return Err(RegressError::ShortSeries {
            need: 50,
            got: x.len(),
        });
    }
    let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![1.0, *v]).collect();
    let names = vec!["const".to_string(), "x".to_string()];
    let core = ols_core(&rows, y, &names)?;
    let var: f64 = core.residuals.iter().map(|e| e * e).sum::<f64>() / core.n as f64;
    if var < 1e-24 {
        // y is an exact linear function of x: degenerate pass.
        let mut r = TestResult {
            name: "engle-granger".into(),
            statistic: -1e12,
            p_value: None,
            critical_values: Some(critical_values(&MACKINNON_EG2, core.n as f64)),
            reject_at_1: true,
            reject_at_5: true,
            reject_at_10: true,
            note: Some("degenerate: first-stage residuals identically zero".into()),
        };
        r.statistic = -1e12;
        return Ok(r);
    }
    let adf = adf_test(&core.residuals, LagSelect::Auto, AdfRegression::None)?;
    let crit = critical_values(&MACKINNON_EG2, core.n as f64);
    let mut result = TestResult::from_critical("engle-granger", adf.statistic, crit);
    result.note = adf.note;
    Ok(result)
}

/// Granger causality F-test: do `cause` lags improve the prediction of
/// `effect` beyond its own lags? Inputs should be stationary.
pub fn granger_test(cause: &[f64], effect: &[f64], p: usize) -> Result<TestResult, RegressError> {
    if p < 1 {
        return Err(RegressError::BadSpec("lag order must be >= 1".into()));
    }
    if cause.len() != effect.len() {
        return Err(RegressError::Misaligned(format!(
            "{} vs {} observations",
            cause.len(),
            effect.len()
        )));
    }
    let n = effect.len();
    if n < 10 * p + 20 {
        return Err(RegressError::ShortSeries {
            need: 10 * p + 20,
            got: n,
        });
    }
    let nobs = n - p;
    let mut restricted_rows = Vec::with_capacity(nobs);
    let mut full_rows = Vec::with_capacity(nobs);
    let mut y = Vec::with_capacity(nobs);
    for t in p..n {
        let mut r = vec![1.0];
        for l in 1..=p {
            r.push(effect[t - l]);
        }
        let mut f = r.clone();
        for l in 1..=p {
            f.push(cause[t - l]);
        }
        restricted_rows.push(r);
        full_rows.push(f);
        y.push(effect[t]);
    }
    let mut restricted_names = vec!["const".to_string()];
    let mut full_names = vec!["const".to_string()];
    for l in 1..=p {
        restricted_names.push(format!("effect.l{l}"));
        full_names.push(format!("effect.l{l}"));
    }
    for l in 1..=p {
        full_names.push(format!("cause.l{l}"));
    }
    let restricted = ols_core(&restricted_rows, &y, &restricted_names)?;
    let full = ols_core(&full_rows, &y, &full_names)?;
    let df2 = (nobs - full.k) as f64;
    let f_stat = ((restricted.ssr - full.ssr) / p as f64) / (full.ssr / df2);
    let p_value = dist::f_sf(f_stat.max(0.0), p as f64, df2);
    let mut result = TestResult::from_p("granger", f_stat, p_value);
    result.note = Some(format!("lags {p}, ssr_restricted {:.6e}, ssr_full {:.6e}", restricted.ssr, full.ssr));
    Ok(result)
}

/// Ljung-Box portmanteau statistic over the first `lags` autocorrelations.
pub fn ljung_box(residuals: &[f64], lags: usize) -> Result<TestResult, RegressError> {
    let n = residuals.len();
    if lags < 1 || n <= lags {
        return Err(RegressError::ShortSeries {
            need: lags + 1,
            got: n,
        });
    }
    let nf = n as f64;
    let mean = residuals.iter().sum::<f64>() / nf;
    let denom: f64 = residuals.iter().map(|e| (e - mean) * (e - mean)).sum();
    if denom <= 0.0 {
        return Err(RegressError::ZeroVariance);
    }
    let mut q = 0.0;
    for k in 1..=lags {
        let num: f64 = residuals
            .windows(k + 1)
            .map(|w| (w[0] - mean) * (w[k] - mean))
            .sum();
        let rho = num / denom;
        q += rho * rho / (nf - k as f64);
    }
    q *= nf * (nf + 2.0);
    Ok(TestResult::from_p("ljung-box", q, dist::chi2_sf(q, lags as f64)))
}

/// Durbin-Watson statistic, in [0, 4]; values near 2 mean no first-order
/// autocorrelation.
pub fn durbin_watson(residuals: &[f64]) -> Result<f64, RegressError> {
    if residuals.len() < 2 {
        return Err(RegressError::ShortSeries {
            need: 2,
            got: residuals.len(),
        });
    }
    let den: f64 = residuals.iter().map(|e| e * e).sum();
    if den <= 0.0 {
        return Err(RegressError::ZeroVariance);
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::tests::gauss;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ar1(phi: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = vec![0.0; n + 50];
        for t in 1..x.len() {
            x[t] = phi * x[t - 1] + gauss(rng);
        }
        x[50..].to_vec()
    }

    fn random_walk(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for t in 1..n {
            x[t] = x[t - 1] + gauss(rng);
        }
        x
    }

    #[test]
    fn adf_rejects_iid_noise() {
        let mut rejected = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..500).map(|_| gauss(&mut rng)).collect();
            let r = adf_test(&x, LagSelect::Auto, AdfRegression::Constant).unwrap();
            if r.reject_at_5 {
                rejected += 1;
            }
        }
        assert!(rejected >= 95, "iid noise rejected in {rejected}/100");
    }

    #[test]
    fn adf_keeps_random_walk() {
        let mut rejected = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let x = random_walk(500, &mut rng);
            let r = adf_test(&x, LagSelect::Auto, AdfRegression::Constant).unwrap();
            if r.reject_at_5 {
                rejected += 1;
            }
        }
        assert!(rejected <= 10, "random walk rejected in {rejected}/100");
    }

    #[test]
    fn adf_handles_deterministic_trend() {
        let x: Vec<f64> = (0..200).map(|t| t as f64).collect();
        let r = adf_test(&x, LagSelect::Auto, AdfRegression::ConstantTrend).unwrap();
        assert!(r.statistic.is_finite() || r.statistic.is_nan() == false);
        assert!(r.note.is_some());
    }

    #[test]
    fn adf_short_series_rejected() {
        let x = vec![1.0; 10];
        assert!(matches!(
            adf_test(&x, LagSelect::Fixed(2), AdfRegression::Constant),
            Err(RegressError::ShortSeries { .. })
        ));
    }

    #[test]
    fn cointegration_detects_shared_trend() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_walk(500, &mut rng);
            let y: Vec<f64> = x.iter().map(|v| 2.0 * v + gauss(&mut rng)).collect();
            let r = cointegration_test(&x, &y).unwrap();
            if r.reject_at_5 {
                hits += 1;
            }
        }
        assert!(hits >= 90, "cointegration found in {hits}/100");
    }

    #[test]
    fn cointegration_rare_for_independent_walks() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
            let x = random_walk(500, &mut rng);
            let y = random_walk(500, &mut rng);
            let r = cointegration_test(&x, &y).unwrap();
            if r.reject_at_5 {
                hits += 1;
            }
        }
        assert!(hits <= 10, "spurious cointegration in {hits}/100");
    }

    #[test]
    fn cointegration_degenerate_pass() {
        let x: Vec<f64> = (0..100).map(|t| (t as f64 * 0.11).sin() * 3.0 + t as f64 * 0.01).collect();
        let r = cointegration_test(&x, &x).unwrap();
        assert!(r.reject_at_1 && r.reject_at_5 && r.reject_at_10);
        assert!(r.note.unwrap().contains("degenerate"));
    }

    #[test]
    fn granger_detects_true_direction() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cause = ar1(0.5, 501, &mut rng);
            let mut effect = vec![0.0; 501];
            for t in 1..501 {
                effect[t] = 0.8 * cause[t - 1] + gauss(&mut rng);
            }
            let r = granger_test(&cause[1..], &effect[1..], 2).unwrap();
            if r.reject_at_1 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "true direction significant in {hits}/100");
    }

    #[test]
    fn granger_reverse_direction_is_null() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
            let cause = ar1(0.5, 501, &mut rng);
            let mut effect = vec![0.0; 501];
            for t in 1..501 {
                effect[t] = 0.8 * cause[t - 1] + gauss(&mut rng);
            }
            let r = granger_test(&effect[1..], &cause[1..], 2).unwrap();
            if r.reject_at_5 {
                hits += 1;
            }
        }
        assert!(hits <= 10, "reverse direction significant in {hits}/100");
    }

    #[test]
    fn granger_zero_cause_is_collinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let effect = ar1(0.4, 300, &mut rng);
        let cause = vec![0.0; 300];
        assert!(matches!(
            granger_test(&cause, &effect, 2),
            Err(RegressError::Collinear(_))
        ));
    }

    #[test]
    fn granger_f_matches_generic_formula() {
        // Internal consistency: rebuild both designs independently, take the
        // SSRs from the oracle solver, and recompute the F ratio.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cause = ar1(0.5, 400, &mut rng);
        let mut effect = vec![0.0; 400];
        for t in 1..400 {
            effect[t] = 0.5 * cause[t - 1] + gauss(&mut rng);
        }
        let p = 3;
        let r = granger_test(&cause, &effect, p).unwrap();

        let n = 400;
        let nobs = n - p;
        let ssr_of = |with_cause: bool| {
            let mut rows = Vec::with_capacity(nobs);
            let mut y = Vec::with_capacity(nobs);
            for t in p..n {
                let mut row = vec![1.0];
                for l in 1..=p {
                    row.push(effect[t - l]);
                }
                if with_cause {
                    for l in 1..=p {
                        row.push(cause[t - l]);
                    }
                }
                rows.push(row);
                y.push(effect[t]);
            }
            let (beta, _, _) = crate::regress::tests::ols_oracle(&rows, &y);
            rows.iter()
                .zip(&y)
                .map(|(row, yi)| {
                    let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
                    (yi - fit) * (yi - fit)
                })
                .sum::<f64>()
        };
        let (ssr_r, ssr_f) = (ssr_of(false), ssr_of(true));
        let df2 = (nobs - (2 * p + 1)) as f64;
        let f = ((ssr_r - ssr_f) / p as f64) / (ssr_f / df2);
        assert!(
            (f - r.statistic).abs() < 1e-10 * f.abs().max(1.0),
            "oracle F {f} vs reported {}",
            r.statistic
        );
    }

    #[test]
    fn durbin_watson_hand_value_and_asymptotics() {
        let dw = durbin_watson(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(dw, 3.0);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let res: Vec<f64> = (0..1000).map(|_| gauss(&mut rng)).collect();
        let dw = durbin_watson(&res).unwrap();
        assert!((dw - 2.0).abs() < 0.15, "dw {dw}");

        assert!(matches!(
            durbin_watson(&[0.0, 0.0, 0.0]),
            Err(RegressError::ZeroVariance)
        ));
    }

    #[test]
    fn ljung_box_size_on_iid_noise() {
        let mut rejections = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let res: Vec<f64> = (0..300).map(|_| gauss(&mut rng)).collect();
            let r = ljung_box(&res, 10).unwrap();
            if r.reject_at_5 {
                rejections += 1;
            }
        }
        assert!(rejections <= 10, "LB rejected iid noise in {rejections}/100");
    }

    #[test]
    fn ljung_box_detects_ar_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let res = ar1(0.6, 400, &mut rng);
        let r = ljung_box(&res, 10).unwrap();
        assert!(r.reject_at_1);
    }

    #[test]
    fn mackinnon_asymptotes() {
        // At huge T the critical values approach the published asymptotic
        // constants.
        let c = critical_values(&MACKINNON_CONST, 1e9);
        assert!((c[0] + 3.43035).abs() < 1e-6);
        assert!((c[1] + 2.86154).abs() < 1e-6);
        assert!((c[2] + 2.56677).abs() < 1e-6);
    }

    #[test]
    fn mackinnon_five_percent_matches_null_simulation() {
        // Independent check of the embedded table: the empirical 5%
        // quantile of the ADF statistic under the unit-root null should sit
        // at the tabulated critical value.
        let n = 400;
        let mut stats = Vec::with_capacity(2000);
        for seed in 0..2000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(90_000 + seed);
            let walk = random_walk(n, &mut rng);
            let r = adf_test(&walk, LagSelect::Fixed(0), AdfRegression::Constant).unwrap();
            stats.push(r.statistic);
        }
        stats.sort_by(f64::total_cmp);
        let empirical = stats[(0.05 * stats.len() as f64) as usize];
        let crit = critical_values(&MACKINNON_CONST, (n - 2) as f64)[1];
        assert!(
            (empirical - crit).abs() < 0.15,
            "empirical 5% quantile {empirical:.3} vs tabulated {crit:.3}"
        );
    }
}

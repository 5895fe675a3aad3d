//! ARMA estimation by conditional sum of squares: difference, start from an
//! AR-only least-squares fit, then polish all coefficients with Nelder-Mead.
//! A constant term is estimated only when d = 0, so an ARIMA(0,1,0) forecast
//! reduces to the last observed value.

use super::LearnError;
use crate::linalg;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// Process mean of the differenced series; fixed to 0 when d > 0.
    pub mean: f64,
    pub sigma2: f64,
    pub css: f64,
    /// Best objective after each accepted optimizer step (non-increasing).
    pub css_trace: Vec<f64>,
    history: Vec<f64>,
}

pub fn fit_arma_css(series: &[f64], p: usize, d: usize, q: usize) -> Result<ArmaModel, LearnError> {
    let mut z = series.to_vec();
    for _ in 0..d {
        if z.len() < 2 {
            return Err(LearnError::ShortSeries {
                need: d + 2,
                got: series.len(),
            });
        }
        z = z.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let n = z.len();
    let min_len = (3 * (p + q + 1)).max(p + q + 2);
    if n < min_len {
        return Err(LearnError::ShortSeries { need: min_len, got: n });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::BadSpec("series contains non-finite values".into()));
    }

    let estimate_mean = d == 0;
    let mean0 = if estimate_mean {
        z.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };

    // AR-only initialization by least squares on the demeaned series.
    let mut ar0 = vec![0.0; p];
    if p > 0 && n > 2 * p + 1 {
        let zc: Vec<f64> = z.iter().map(|v| v - mean0).collect();
        let rows: Vec<Vec<f64>> = (p..n).map(|t| (1..=p).map(|i| zc[t - i]).collect()).collect();
        let targets: Vec<f64> = (p..n).map(|t| zc[t]).collect();
        let gram = linalg::gram(&rows);
        let rhs = linalg::gram_vec(&rows, &targets);
        if let Ok(sol) = linalg::solve(&gram, &rhs) {
            ar0 = sol;
        }
    }

    let dim = p + q + usize::from(estimate_mean);
    let mut params = Vec::with_capacity(dim);
    params.extend_from_slice(&ar0);
    params.extend(std::iter::repeat(0.0).take(q));
    if estimate_mean {
        params.push(mean0);
    }

    let z_std = {
        let m = z.iter().sum::<f64>() / n as f64;
        (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt()
    };
    let objective = |theta: &[f64]| -> f64 {
        let (ar, ma, mean) = split_params(theta, p, q, estimate_mean);
        css(&z, ar, ma, mean)
    };

    let (best, trace) = if dim == 0 {
        (params.clone(), vec![objective(&params)])
    } else {
        let mut steps = vec![0.1; p + q];
        if estimate_mean {
            steps.push((z_std / 10.0).max(1e-3));
        }
        nelder_mead(&objective, &params, &steps, 400 * dim.max(1))
    };

    let (ar, ma, mean) = split_params(&best, p, q, estimate_mean);
    let final_css = css(&z, ar, ma, mean);
    if !final_css.is_finite() {
        return Err(LearnError::NoConverge(
            "CSS objective is non-finite at the optimum".into(),
        ));
    }
    let radius = ar_spectral_radius(ar);
    if radius >= 1.0 {
        return Err(LearnError::Unstable(radius));
    }
    let n_eff = (n - p) as f64;
    Ok(ArmaModel {
        p,
        d,
        q,
        ar: ar.to_vec(),
        ma: ma.to_vec(),
        mean,
        sigma2: final_css / n_eff.max(1.0),
        css: final_css,
        css_trace: trace,
        history: series.to_vec(),
    })
}

fn split_params(theta: &[f64], p: usize, q: usize, with_mean: bool) -> (&[f64], &[f64], f64) {
    let ar = &theta[..p];
    let ma = &theta[p..p + q];
    let mean = if with_mean { theta[p + q] } else { 0.0 };
    (ar, ma, mean)
}

/// Conditional sum of squares with residuals started at zero.
fn css(z: &[f64], ar: &[f64], ma: &[f64], mean: f64) -> f64 {
    let e = residuals(z, ar, ma, mean);
    let p = ar.len();
    let sum: f64 = e.iter().skip(p).map(|r| r * r).sum();
    if sum.is_finite() {
        sum
    } else {
        f64::INFINITY
    }
}

fn residuals(z: &[f64], ar: &[f64], ma: &[f64], mean: f64) -> Vec<f64> {
    let n = z.len();
    let p = ar.len();
    let mut e = vec![0.0; n];
    for t in p..n {
        let mut pred = mean;
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * (z[t - 1 - i] - mean);
        }
        for (j, theta) in ma.iter().enumerate() {
            if t >= j + 1 {
                pred += theta * e[t - 1 - j];
            }
        }
        e[t] = z[t] - pred;
    }
    e
}

fn ar_spectral_radius(ar: &[f64]) -> f64 {
    if ar.is_empty() {
        return 0.0;
    }
    let p = ar.len();
    let mut companion = linalg::zeros(p, p);
    companion[0].copy_from_slice(ar);
    for i in 1..p {
        companion[i][i - 1] = 1.0;
    }
    linalg::spectral_radius(&companion)
}

impl ArmaModel {
    fn differenced(&self) -> Vec<f64> {
        let mut z = self.history.clone();
        for _ in 0..self.d {
            z = z.windows(2).map(|w| w[1] - w[0]).collect();
        }
        z
    }

    /// Residuals on the differenced scale (first p values are zero by the
    /// conditioning convention).
    pub fn residuals(&self) -> Vec<f64> {
        residuals(&self.differenced(), &self.ar, &self.ma, self.mean)
    }

    /// One-step-ahead in-sample fitted values on the original scale;
    /// `None` over the d + p warm-up observations.
    pub fn fitted(&self) -> Vec<Option<f64>> {
        let e = self.residuals();
        let n = self.history.len();
        let mut out = vec![None; n];
        for t in (self.d + self.p)..n {
            out[t] = Some(self.history[t] - e[t - self.d]);
        }
        out
    }

    /// h-step forecast, integrating the differencing back out.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        let mut z = self.differenced();
        let mut e = residuals(&z, &self.ar, &self.ma, self.mean);
        // Tails of each integration level, innermost last.
        let mut tails = Vec::with_capacity(self.d);
        let mut level = self.history.clone();
        for _ in 0..self.d {
            tails.push(*level.last().expect("non-empty history"));
            level = level.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            let t = z.len();
            let mut pred = self.mean;
            for (i, phi) in self.ar.iter().enumerate() {
                if t >= i + 1 {
                    pred += phi * (z[t - 1 - i] - self.mean);
                }
            }
            for (j, theta) in self.ma.iter().enumerate() {
                if t >= j + 1 {
                    pred += theta * e[t - 1 - j];
                }
            }
            z.push(pred);
            e.push(0.0);
            // Integrate d times.
            let mut value = pred;
            for tail in tails.iter_mut().rev() {
                value += *tail;
                *tail = value;
            }
            out.push(value);
        }
        out
    }
}

/// Standard Nelder-Mead with best-so-far tracking; returns the best point
/// and the non-increasing objective trace.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    max_iter: usize,
) -> (Vec<f64>, Vec<f64>) {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut trace = Vec::new();
    let mut best_seen = f64::INFINITY;

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];
        best_seen = best_seen.min(values[best]);
        trace.push(best_seen);

        if (values[worst] - values[best]).abs()
            <= 1e-12 * (values[best].abs() + 1e-12)
        {
            break;
        }

        // Centroid of all but the worst.
        let mut centroid = vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                *c += v / dim as f64;
            }
        }
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[worst])
            .map(|(c, w)| c + (c - w))
            .collect();
        let fr = f(&reflect);
        if fr < values[best] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + 0.5 * (w - c))
                .collect();
            let fc = f(&contract);
            if fc < values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                // Shrink towards the best vertex.
                let best_point = simplex[best].clone();
                for i in 0..simplex.len() {
                    if i == best {
                        continue;
                    }
                    for (v, b) in simplex[i].iter_mut().zip(&best_point) {
                        *v = b + 0.5 * (*v - b);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best_idx = (0..values.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    best_seen = best_seen.min(values[best_idx]);
    trace.push(best_seen);
    (simplex[best_idx].clone(), trace)
}

/// Simulates an ARMA(p, q) path with standard-normal innovations. Shared by
/// the estimation tests and the study fixtures.
pub fn simulate_arma(
    ar: &[f64],
    ma: &[f64],
    mean: f64,
    n: usize,
    rng: &mut impl rand::Rng,
) -> Vec<f64> {
    let burn = 200;
    let total = n + burn;
    let mut z = Vec::with_capacity(total);
    let mut e = Vec::with_capacity(total);
    for t in 0..total {
        let u1: f64 = rng.gen_range(1e-12..1.0f64);
        let u2: f64 = rng.gen_range(0.0..1.0f64);
        let innov = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        let mut v = innov;
        for (i, phi) in ar.iter().enumerate() {
            if t > i {
                v += phi * (z[t - 1 - i] - mean);
            }
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                v += theta * e[t - 1 - j];
            }
        }
        e.push(innov);
        z.push(mean + v);
    }
    z.iter().skip(burn).copied().collect()
}

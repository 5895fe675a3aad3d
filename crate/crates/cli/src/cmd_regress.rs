//! `gridtrace regress`: OLS, VAR (with IRF/FEVD/robustness), and the
//! stationarity/causality tests over columnar CSV inputs.

use crate::util::{read_columns, usage, write_report, CliError, RunMeta};
use clap::{Args, Subcommand};
use gridtrace_core::learners::FeatureMatrix;
use gridtrace_core::regress::{
    adf_test, cointegration_test, fevd, fit_ols, fit_var, granger_test, impulse_response,
    robustness_test, AdfRegression, LagSelect, OlsSpec, Term, VarSpec,
};
use std::path::PathBuf;

#[derive(Subcommand)]
pub enum RegressCmd {
    /// Ordinary least squares with the test battery.
    Ols(OlsArgs),
    /// Vector autoregression with diagnostics, IRF and FEVD.
    Var(VarArgs),
    /// Augmented Dickey-Fuller unit-root test.
    Adf(AdfArgs),
    /// Engle-Granger cointegration test.
    Coint(CointArgs),
    /// Granger causality F-test.
    Granger(GrangerArgs),
}

#[derive(Args)]
pub struct OlsArgs {
    /// Columnar CSV: header of names, numeric rows.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    response: String,
    /// Comma list of terms: `const`, `x`, `x^2`, `a*b`, `ln(x)`.
    #[arg(long)]
    terms: String,
    /// Output stem; writes `<out>.json` and `<out>.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct VarArgs {
    #[arg(long)]
    input: PathBuf,
    /// Columns to include; their order fixes the Cholesky ordering for the
    /// orthogonalized impulse responses.
    #[arg(long)]
    columns: String,
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    /// Relative coefficient perturbation for the robustness test.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct AdfArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    column: String,
    /// Lag order; omit for AIC selection.
    #[arg(long)]
    lags: Option<usize>,
    /// Include a linear trend in the test regression.
    #[arg(long)]
    trend: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct CointArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct GrangerArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    cause: String,
    #[arg(long)]
    effect: String,
    #[arg(long, default_value_t = 2)]
    lags: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn parse_terms(spec: &str) -> Result<Vec<Term>, CliError> {
    let mut terms = Vec::new();
    for raw in spec.split(',') {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let term = if t == "const" {
            Term::Intercept
        } else if let Some(inner) = t.strip_prefix("ln(").and_then(|s| s.strip_suffix(')')) {
            Term::Log(inner.to_string())
        } else if let Some(base) = t.strip_suffix("^2") {
            Term::Quadratic(base.to_string())
        } else if let Some((a, b)) = t.split_once('*') {
            Term::Interaction(a.trim().to_string(), b.trim().to_string())
        } else {
            Term::Linear(t.to_string())
        };
        terms.push(term);
    }
    if terms.is_empty() {
        return Err(usage("no terms given"));
    }
    Ok(terms)
}

fn column_of(columns: &[(String, Vec<f64>)], name: &str) -> Result<Vec<f64>, CliError> {
    columns
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| usage(format!("column {name:?} not in input")))
}

pub fn run(cmd: RegressCmd, seed: u64) -> Result<(), CliError> {
    match cmd {
        RegressCmd::Ols(args) => {
            let columns = read_columns(&args.input)?;
            let data = FeatureMatrix::from_columns(columns)?;
            let spec = OlsSpec {
                response: args.response.clone(),
                terms: parse_terms(&args.terms)?,
            };
            let report = fit_ols(&spec, &data)?;
            let meta = RunMeta {
                command: "regress ols",
                seed,
                inputs: vec![args.input.display().to_string()],
            };
            write_report(&args.out.with_extension("json"), &meta, &report)?;
            std::fs::write(args.out.with_extension("txt"), report.render_text())?;
            println!("{}", report.render_text());
        }
        RegressCmd::Var(args) => {
            let columns = read_columns(&args.input)?;
            let names: Vec<String> = args
                .columns
                .split(',')
                .map(|s| s.trim().to_string())
                .collect();
            let data: Vec<Vec<f64>> = names
                .iter()
                .map(|n| column_of(&columns, n))
                .collect::<Result<_, _>>()?;
            let spec = VarSpec {
                names,
                order: args.order,
            };
            let report = fit_var(&spec, &data)?;
            let irf = impulse_response(&report, args.horizon)?;
            let shares = fevd(&report, args.horizon.max(1))?;
            let robustness = robustness_test(&report, args.epsilon, args.trials, seed);
            let body = serde_json::json!({
                "var": report,
                "irf": irf,
                "fevd": shares,
                "robustness": robustness,
            });
            let meta = RunMeta {
                command: "regress var",
                seed,
                inputs: vec![args.input.display().to_string()],
            };
            write_report(&args.out.with_extension("json"), &meta, &body)?;
            std::fs::write(args.out.with_extension("txt"), report.render_text())?;
            println!("{}", report.render_text());
        }
        RegressCmd::Adf(args) => {
            let columns = read_columns(&args.input)?;
            let series = column_of(&columns, &args.column)?;
            let lags = args.lags.map(LagSelect::Fixed).unwrap_or(LagSelect::Auto);
            let reg = if args.trend {
                AdfRegression::ConstantTrend
            } else {
                AdfRegression::Constant
            };
            let result = adf_test(&series, lags, reg)?;
            finish_test(&args.out, "regress adf", seed, &args.input, &result)?;
        }
        RegressCmd::Coint(args) => {
            let columns = read_columns(&args.input)?;
            let x = column_of(&columns, &args.x)?;
            let y = column_of(&columns, &args.y)?;
            let result = cointegration_test(&x, &y)?;
            finish_test(&args.out, "regress coint", seed, &args.input, &result)?;
        }
        RegressCmd::Granger(args) => {
            let columns = read_columns(&args.input)?;
            let cause = column_of(&columns, &args.cause)?;
            let effect = column_of(&columns, &args.effect)?;
            let result = granger_test(&cause, &effect, args.lags)?;
            finish_test(&args.out, "regress granger", seed, &args.input, &result)?;
        }
    }
    Ok(())
}

fn finish_test(
    out: &std::path::Path,
    command: &str,
    seed: u64,
    input: &std::path::Path,
    result: &gridtrace_core::regress::TestResult,
) -> Result<(), CliError> {
    let meta = RunMeta {
        command,
        seed,
        inputs: vec![input.display().to_string()],
    };
    write_report(&out.with_extension("json"), &meta, result)?;
    println!(
        "{}: statistic {:.4}, reject at 1%/5%/10% = {}/{}/{}",
        result.name, result.statistic, result.reject_at_1, result.reject_at_5, result.reject_at_10
    );
    Ok(())
}

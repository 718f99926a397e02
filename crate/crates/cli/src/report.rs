//! `report.json`, CSV tables and SVG plots for one analysis.
//!
//! Observation numbers are 1-based everywhere in the output. Floats are
//! written in shortest round-trip form.

use std::path::PathBuf;

use evbs::dataset::Descriptive;
use evbs::influence::{DeletionImpact, InfluenceReport, PerturbationScheme};
use evbs::residuals::TestResult;
use evbs::{FitResult, Mode, RegressionData};
use serde::Serialize;

use crate::pipeline::{AnalysisConfig, Analysis, Artifacts};
use crate::svg::Plot;

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub input: InputSummary,
    pub descriptive: Descriptive,
    pub acf: AcfSummary,
    pub fit: FitSummary,
    pub residuals: ResidualSummary,
    pub influence: Vec<InfluenceSummary>,
    pub deletion: Vec<DeletionSummary>,
}

#[derive(Debug, Serialize)]
pub struct InputSummary {
    pub path: String,
    pub n: usize,
    pub response: String,
    pub covariates: Vec<String>,
    pub log_response: bool,
}

#[derive(Debug, Serialize)]
pub struct AcfSummary {
    pub band: f64,
    pub values: Vec<f64>,
    /// Lags (from 1) whose autocorrelation leaves the white-noise band.
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Parameter {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub mode: Mode,
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    pub boundary_active: bool,
    pub hessian_negative_definite: bool,
    pub parameters: Vec<Parameter>,
}

#[derive(Debug, Serialize)]
pub struct EnvelopeSummary {
    pub n_sim: usize,
    pub level: f64,
    pub n_failed: usize,
    pub coverage: f64,
}

#[derive(Debug, Serialize)]
pub struct ResidualSummary {
    pub kolmogorov_smirnov: TestResult,
    pub shapiro_wilk: Option<TestResult>,
    pub clamped: usize,
    pub envelope: EnvelopeSummary,
}

#[derive(Debug, Serialize)]
pub struct InfluenceSummary {
    pub scheme: String,
    pub column: Option<String>,
    pub scale: Option<f64>,
    pub q: usize,
    pub q_default: bool,
    pub k: usize,
    pub benchmark: f64,
    pub normalized_eigenvalues: Vec<f64>,
    pub contributions: Vec<f64>,
    pub flagged: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct DeletionSummary {
    pub observation: usize,
    pub key: String,
    pub diverged: bool,
    pub message: Option<String>,
    pub estimates: Option<Vec<f64>>,
    /// Percent change `100 (θ̂_(i) − θ̂) / |θ̂|`, ordered like the estimates.
    pub rate_of_change: Option<Vec<f64>>,
}

/// `β` labels followed by `alpha` and `gamma`.
pub fn parameter_names(data: &RegressionData) -> Vec<String> {
    let mut names: Vec<String> = data.labels().iter().map(|l| format!("beta[{l}]")).collect();
    names.push("alpha".into());
    names.push("gamma".into());
    names
}

/// One row per parameter. In Gumbel mode `γ` is fixed at zero and has no
/// standard error.
pub fn parameters(fit: &FitResult, data: &RegressionData) -> Vec<Parameter> {
    let values = fit.theta_hat.to_vec(Mode::Free);
    let free = fit.mode.dim(data.p());
    parameter_names(data)
        .into_iter()
        .zip(values)
        .enumerate()
        .map(|(j, (name, estimate))| {
            // Wald statistics cover the coefficients only
            let pick = |v: &Option<Vec<f64>>| v.as_ref().and_then(|v| v.get(j).copied()).filter(|_| j < free);
            Parameter {
                name,
                estimate,
                std_error: pick(&fit.std_errors),
                z: pick(&fit.wald_z),
                p_value: pick(&fit.p_values),
            }
        })
        .collect()
}

/// File-name tag such as `case-weights` or `covariate-pressure_mb`.
pub fn scheme_tag(scheme: &PerturbationScheme, data: &RegressionData) -> String {
    match scheme {
        PerturbationScheme::Covariate { t, .. } => format!("covariate-{}", data.labels()[*t]),
        other => other.name().to_string(),
    }
}

fn influence_summary(r: &InfluenceReport, data: &RegressionData) -> InfluenceSummary {
    let (column, scale) = match r.scheme {
        PerturbationScheme::CaseWeights => (None, None),
        PerturbationScheme::Response { s_y } => (None, Some(s_y)),
        PerturbationScheme::Covariate { t, s_x } => (Some(data.labels()[t].clone()), Some(s_x)),
    };
    InfluenceSummary {
        scheme: r.scheme.name().to_string(),
        column,
        scale,
        q: r.q,
        q_default: r.q_default,
        k: r.k,
        benchmark: r.benchmark,
        normalized_eigenvalues: r.normalized_eigenvalues.clone(),
        contributions: r.contributions.clone(),
        flagged: r.flagged.iter().map(|i| i + 1).collect(),
    }
}

fn deletion_summary(d: &DeletionImpact, a: &Analysis) -> DeletionSummary {
    DeletionSummary {
        observation: d.index + 1,
        key: a.dataset.records[d.index].date.clone(),
        diverged: d.diverged,
        message: d.message.clone(),
        estimates: d.refit.as_ref().map(|f| f.theta_hat.to_vec(Mode::Free)),
        rate_of_change: d.rate_of_change.clone(),
    }
}

pub fn build_report(cfg: &AnalysisConfig, a: &Analysis) -> Report {
    let data = &a.dataset.data;
    Report {
        tool: "evbs",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        input: InputSummary {
            path: cfg.input.display().to_string(),
            n: data.n(),
            response: cfg.ingest.response_column.clone(),
            covariates: cfg.ingest.covariate_columns.clone(),
            log_response: cfg.ingest.log_response,
        },
        descriptive: a.descriptive.clone(),
        acf: AcfSummary {
            band: a.acf.band,
            values: a.acf.values.clone(),
            violations: a.acf.violations(),
        },
        fit: FitSummary {
            mode: a.fit.mode,
            converged: a.fit.converged,
            iterations: a.fit.iterations,
            loglik: a.fit.loglik,
            boundary_active: a.fit.boundary_active,
            hessian_negative_definite: a.fit.hessian_negative_definite,
            parameters: parameters(&a.fit, data),
        },
        residuals: ResidualSummary {
            kolmogorov_smirnov: a.ks,
            shapiro_wilk: a.shapiro_wilk,
            clamped: a.residuals.clamped,
            envelope: EnvelopeSummary {
                n_sim: a.envelope.n_sim,
                level: a.envelope.level,
                n_failed: a.envelope.n_failed,
                coverage: a.envelope.coverage(),
            },
        },
        influence: a.influence.iter().map(|r| influence_summary(r, data)).collect(),
        deletion: a.deletions.iter().map(|d| deletion_summary(d, a)).collect(),
    }
}

fn csv_table(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| e.to_string())?;
    for row in rows {
        w.write_record(&row).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn tables(a: &Analysis) -> Result<Vec<(PathBuf, String)>, String> {
    let data = &a.dataset.data;
    let mut out = Vec::new();

    let params = parameters(&a.fit, data);
    out.push((
        "tables/estimates.csv".into(),
        csv_table(
            &strings(&["parameter", "estimate", "std_error", "z", "p_value"]),
            params
                .iter()
                .map(|p| vec![p.name.clone(), p.estimate.to_string(), opt(p.std_error), opt(p.z), opt(p.p_value)]),
        )?,
    ));

    let mut header = strings(&["observation", "key", "response"]);
    header.extend(data.labels()[1..].iter().cloned());
    header.push("quantile_residual".into());
    header.extend(a.influence.iter().map(|r| format!("contribution_{}", scheme_tag(&r.scheme, data))));
    let rows = a.dataset.records.iter().enumerate().map(|(i, rec)| {
        let mut row = vec![(i + 1).to_string(), rec.date.clone(), rec.response.to_string()];
        row.extend(rec.covariates.iter().map(|v| v.to_string()));
        row.push(a.residuals.r[i].to_string());
        row.extend(a.influence.iter().map(|r| r.contributions[i].to_string()));
        row
    });
    out.push(("tables/observations.csv".into(), csv_table(&header, rows)?));

    let mut header = strings(&["rank"]);
    header.extend(a.influence.iter().map(|r| format!("lambda_star_{}", scheme_tag(&r.scheme, data))));
    let rows = (0..data.n()).map(|i| {
        let mut row = vec![(i + 1).to_string()];
        row.extend(a.influence.iter().map(|r| r.normalized_eigenvalues[i].to_string()));
        row
    });
    out.push(("tables/eigenvalues.csv".into(), csv_table(&header, rows)?));

    let e = &a.envelope;
    let rows = (0..e.observed.len()).map(|i| {
        [e.theoretical[i], e.observed[i], e.lower[i], e.median[i], e.upper[i]]
            .iter()
            .fold(vec![(i + 1).to_string()], |mut row, v| {
                row.push(v.to_string());
                row
            })
    });
    out.push((
        "tables/envelope.csv".into(),
        csv_table(&strings(&["rank", "theoretical", "observed", "lower", "median", "upper"]), rows)?,
    ));

    let mut header = strings(&["observation", "key", "diverged"]);
    let names = parameter_names(data);
    header.extend(names.iter().map(|n| format!("estimate_{n}")));
    header.extend(names.iter().map(|n| format!("rate_{n}")));
    let rows = a.deletions.iter().map(|d| {
        let s = deletion_summary(d, a);
        let mut row = vec![s.observation.to_string(), s.key, s.diverged.to_string()];
        for block in [&s.estimates, &s.rate_of_change] {
            match block {
                Some(v) => row.extend(v.iter().map(|x| x.to_string())),
                None => row.extend(std::iter::repeat(String::new()).take(names.len())),
            }
        }
        row
    });
    out.push(("tables/deletion.csv".into(), csv_table(&header, rows)?));

    let d = &a.descriptive;
    let stats = [
        ("n", Some(d.n as f64)),
        ("min", Some(d.min)),
        ("median", Some(d.median)),
        ("mean", Some(d.mean)),
        ("max", Some(d.max)),
        ("sd", Some(d.sd)),
        ("skewness", d.skewness),
        ("kurtosis", d.kurtosis),
    ];
    out.push((
        "tables/descriptive.csv".into(),
        csv_table(&strings(&["statistic", "value"]), stats.iter().map(|(k, v)| vec![k.to_string(), opt(*v)]))?,
    ));

    let rows = a.acf.values.iter().enumerate().map(|(lag, v)| vec![lag.to_string(), v.to_string()]);
    out.push(("tables/acf.csv".into(), csv_table(&strings(&["lag", "acf"]), rows)?));
    Ok(out)
}

fn plots(cfg: &AnalysisConfig, a: &Analysis) -> Vec<(PathBuf, String)> {
    let data = &a.dataset.data;
    let n = data.n();
    let index: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let mut out = Vec::new();

    // response against the first covariate, the others held at their means
    if data.p() >= 2 {
        let x = data.column(1);
        let y = a.dataset.responses();
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let others: f64 = (2..data.p())
            .map(|j| {
                let c = data.column(j);
                a.fit.theta_hat.beta[j] * c.iter().sum::<f64>() / n as f64
            })
            .sum();
        let beta = &a.fit.theta_hat.beta;
        let grid: Vec<f64> = (0..=200).map(|k| lo + (hi - lo) * k as f64 / 200.0).collect();
        let curve: Vec<f64> = grid
            .iter()
            .map(|&g| {
                let eta = beta[0] + beta[1] * g + others;
                if cfg.ingest.log_response {
                    eta.exp()
                } else {
                    eta
                }
            })
            .collect();
        let title = if cfg.ingest.log_response { "Data and fitted curve exp(b0 + b1 x)" } else { "Data and fitted line" };
        let plot = Plot::new(title, &data.labels()[1], &cfg.ingest.response_column)
            .points(&x, &y)
            .line(&grid, &curve, false);
        out.push(("plots/fit_curve.svg".into(), plot.render()));
    }

    for r in &a.influence {
        let tag = scheme_tag(&r.scheme, data);
        let cut = r.q as f64 / (n as f64).sqrt();
        let plot = Plot::new(&format!("Normalized eigenvalues ({tag})"), "index", "lambda*")
            .stems(&index, &r.normalized_eigenvalues)
            .hline(cut, true);
        out.push((format!("plots/eigenvalues_{tag}.svg").into(), plot.render()));

        let fx: Vec<f64> = r.flagged.iter().map(|&i| (i + 1) as f64).collect();
        let fy: Vec<f64> = r.flagged.iter().map(|&i| r.contributions[i]).collect();
        let labels = r.flagged.iter().map(|i| format!("#{}", i + 1)).collect();
        let plot = Plot::new(&format!("Aggregated contributions B_j (q = {}, {tag})", r.q), "observation", "B_j")
            .stems(&index, &r.contributions)
            .hline(r.benchmark, true)
            .labels(&fx, &fy, labels);
        out.push((format!("plots/contributions_{tag}.svg").into(), plot.render()));
    }

    let e = &a.envelope;
    let plot = Plot::new(
        &format!("Normal QQ plot with {:.0}% envelope", 100.0 * e.level),
        "normal quantile",
        "quantile residual",
    )
    .band(&e.theoretical, &e.lower, &e.upper)
    .line(&e.theoretical, &e.median, true)
    .points(&e.theoretical, &e.observed);
    out.push(("plots/qq_envelope.svg".into(), plot.render()));

    let plot = Plot::new("Quantile residuals by observation", "observation", "quantile residual")
        .points(&index, &a.residuals.r)
        .hline(0.0, false)
        .hline(-3.0, true)
        .hline(3.0, true);
    out.push(("plots/residuals_index.svg".into(), plot.render()));

    let lags: Vec<f64> = (1..a.acf.values.len()).map(|k| k as f64).collect();
    let plot = Plot::new("Sample autocorrelation of the response", "lag", "ACF")
        .stems(&lags, &a.acf.values[1..])
        .hline(a.acf.band, true)
        .hline(-a.acf.band, true);
    out.push(("plots/acf.svg".into(), plot.render()));
    out
}

pub fn render(cfg: &AnalysisConfig, a: &Analysis) -> Result<Artifacts, String> {
    let mut json = serde_json::to_string_pretty(&build_report(cfg, a)).map_err(|e| e.to_string())?;
    json.push('\n');
    let mut files = vec![(PathBuf::from("report.json"), json)];
    files.extend(tables(a)?);
    files.extend(plots(cfg, a));
    Ok(Artifacts { files })
}

//! Fit, residual, influence and deletion stages, and the artifacts they
//! produce. Each stage failure carries the stage name; nothing is written
//! until every stage has succeeded.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use evbs::dataset::{acf, descriptive_stats, ingest_csv, Acf, Dataset, Descriptive, IngestConfig, MomentConvention};
use evbs::influence::{
    delta_matrix, deletion_impacts, influence_report, DeletionImpact, InfluenceReport, PerturbationScheme,
};
use evbs::residuals::{envelope, ks_normal_test, quantile_residuals, shapiro_wilk, Envelope, ResidualSet, TestResult};
use evbs::{fit_mle, FitOptions, FitResult};

use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Describe,
    Fit,
    Residuals,
    Envelope,
    Influence,
    Deletion,
    Render,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Describe => "describe",
            Stage::Fit => "fit",
            Stage::Residuals => "residuals",
            Stage::Envelope => "envelope",
            Stage::Influence => "influence",
            Stage::Deletion => "deletion",
            Stage::Render => "render",
            Stage::Write => "write",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, err: impl fmt::Display) -> Self {
        PipelineError {
            stage,
            message: err.to_string(),
        }
    }
}

type StageResult<T> = Result<T, PipelineError>;

fn at<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::new(stage, e)
}

/// Which perturbation schemes to analyse. `Covariate` expands to every
/// non-intercept column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SchemeChoice {
    CaseWeights,
    Response,
    Covariate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Deletions {
    None,
    /// Union of the observations flagged under every analysed scheme.
    Flagged,
    /// 1-based observation numbers.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub input: PathBuf,
    pub ingest: IngestConfig,
    pub convention: MomentConvention,
    pub acf_lags: usize,
    pub fit: FitOptions,
    pub schemes: Vec<SchemeChoice>,
    /// Overrides for the response and covariate perturbation scales; the
    /// defaults are sample standard deviations.
    pub s_y: Option<f64>,
    pub s_x: Option<f64>,
    pub q: Option<usize>,
    pub deletions: Deletions,
    pub envelope_sims: usize,
    pub envelope_level: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl AnalysisConfig {
    pub fn new(input: PathBuf, ingest: IngestConfig) -> Self {
        AnalysisConfig {
            input,
            ingest,
            convention: MomentConvention::Raw,
            acf_lags: 24,
            fit: FitOptions::default(),
            schemes: vec![SchemeChoice::CaseWeights, SchemeChoice::Response, SchemeChoice::Covariate],
            s_y: None,
            s_x: None,
            q: None,
            deletions: Deletions::Flagged,
            envelope_sims: 100,
            envelope_level: 0.95,
            seed: 2024,
            output_dir: PathBuf::from("evbs-report"),
        }
    }
}

/// Everything the report is built from.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub dataset: Dataset,
    pub descriptive: Descriptive,
    pub acf: Acf,
    pub fit: FitResult,
    pub residuals: ResidualSet,
    pub ks: TestResult,
    pub shapiro_wilk: Option<TestResult>,
    pub envelope: Envelope,
    pub influence: Vec<InfluenceReport>,
    pub deletions: Vec<DeletionImpact>,
}

pub fn load(cfg: &AnalysisConfig) -> StageResult<Dataset> {
    ingest_csv(&cfg.input, &cfg.ingest).map_err(at(Stage::Ingest))
}

pub fn fit(cfg: &AnalysisConfig, dataset: &Dataset) -> StageResult<FitResult> {
    let fit = fit_mle(&dataset.data, None, &cfg.fit).map_err(at(Stage::Fit))?;
    if !fit.converged {
        return Err(PipelineError::new(Stage::Fit, "optimizer did not reach the gradient tolerance"));
    }
    Ok(fit)
}

/// The concrete schemes requested, in a fixed order.
pub fn schemes(cfg: &AnalysisConfig, dataset: &Dataset) -> StageResult<Vec<PerturbationScheme>> {
    let data = &dataset.data;
    let mut out = Vec::new();
    let choices: BTreeSet<_> = cfg.schemes.iter().copied().collect();
    for choice in choices {
        match choice {
            SchemeChoice::CaseWeights => out.push(PerturbationScheme::CaseWeights),
            SchemeChoice::Response => out.push(match cfg.s_y {
                Some(s_y) => PerturbationScheme::Response { s_y },
                None => PerturbationScheme::response_default(data),
            }),
            SchemeChoice::Covariate => {
                if data.p() < 2 {
                    return Err(PipelineError::new(Stage::Influence, "covariate perturbation needs a covariate"));
                }
                for t in 1..data.p() {
                    out.push(match cfg.s_x {
                        Some(s_x) => PerturbationScheme::Covariate { t, s_x },
                        None => PerturbationScheme::covariate_default(data, t),
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn influence(cfg: &AnalysisConfig, dataset: &Dataset, fit: &FitResult) -> StageResult<Vec<InfluenceReport>> {
    schemes(cfg, dataset)?
        .into_iter()
        .map(|scheme| {
            let d = delta_matrix(scheme, fit, &dataset.data).map_err(at(Stage::Influence))?;
            influence_report(&d, &fit.hessian, cfg.q).map_err(at(Stage::Influence))
        })
        .collect()
}

/// 0-based indices to delete, sorted and unique.
pub fn deletion_targets(cfg: &AnalysisConfig, n: usize, reports: &[InfluenceReport]) -> StageResult<Vec<usize>> {
    let set: BTreeSet<usize> = match &cfg.deletions {
        Deletions::None => BTreeSet::new(),
        Deletions::Flagged => reports.iter().flat_map(|r| r.flagged.iter().copied()).collect(),
        Deletions::Explicit(obs) => {
            if let Some(bad) = obs.iter().find(|&&o| o == 0 || o > n) {
                return Err(PipelineError::new(
                    Stage::Deletion,
                    format!("observation {bad} is outside 1..={n}"),
                ));
            }
            obs.iter().map(|o| o - 1).collect()
        }
    };
    Ok(set.into_iter().collect())
}

pub fn residual_stage(cfg: &AnalysisConfig, dataset: &Dataset, fit: &FitResult) -> StageResult<(ResidualSet, TestResult, Option<TestResult>, Envelope)> {
    let r = quantile_residuals(fit, &dataset.data).map_err(at(Stage::Residuals))?;
    let ks = ks_normal_test(&r).map_err(at(Stage::Residuals))?;
    let sw = shapiro_wilk(&r).ok();
    let env = envelope(fit, &dataset.data, cfg.envelope_sims, cfg.envelope_level, cfg.seed, &cfg.fit)
        .map_err(at(Stage::Envelope))?;
    Ok((r, ks, sw, env))
}

pub fn analyze(cfg: &AnalysisConfig) -> StageResult<Analysis> {
    let dataset = load(cfg)?;
    let responses = dataset.responses();
    let descriptive = descriptive_stats(&responses, cfg.convention).map_err(at(Stage::Describe))?;
    let lags = cfg.acf_lags.min((responses.len().saturating_sub(1)) / 2).max(1);
    let acf = acf(&responses, lags).map_err(at(Stage::Describe))?;
    let fit = fit(cfg, &dataset)?;
    let (residuals, ks, shapiro_wilk, envelope) = residual_stage(cfg, &dataset, &fit)?;
    let influence = influence(cfg, &dataset, &fit)?;
    let targets = deletion_targets(cfg, dataset.data.n(), &influence)?;
    let deletions = deletion_impacts(&dataset.data, &fit, &targets, &cfg.fit).map_err(at(Stage::Deletion))?;
    Ok(Analysis {
        dataset,
        descriptive,
        acf,
        fit,
        residuals,
        ks,
        shapiro_wilk,
        envelope,
        influence,
        deletions,
    })
}

/// Files to write, as paths relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub files: Vec<(PathBuf, String)>,
}

/// Writes every artifact; on any failure the files and directories created
/// so far are removed again.
pub fn write_artifacts(dir: &Path, artifacts: &Artifacts) -> StageResult<Vec<PathBuf>> {
    let mut created_dirs: Vec<PathBuf> = Vec::new();
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> std::io::Result<()> {
        for (rel, content) in &artifacts.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                let mut missing = Vec::new();
                let mut p = parent;
                while !p.exists() {
                    missing.push(p.to_path_buf());
                    match p.parent() {
                        Some(up) if !up.as_os_str().is_empty() => p = up,
                        _ => break,
                    }
                }
                fs::create_dir_all(parent)?;
                created_dirs.extend(missing.into_iter().rev());
            }
            fs::write(&path, content)?;
            written.push(path);
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for f in &written {
                let _ = fs::remove_file(f);
            }
            for d in created_dirs.iter().rev() {
                let _ = fs::remove_dir(d);
            }
            Err(PipelineError::new(Stage::Write, e))
        }
    }
}

/// Runs every stage and writes `report.json`, `tables/*.csv` and
/// `plots/*.svg` under the output directory.
pub fn run_pipeline(cfg: &AnalysisConfig) -> StageResult<(Analysis, Vec<PathBuf>)> {
    let analysis = analyze(cfg)?;
    let artifacts = report::render(cfg, &analysis).map_err(at(Stage::Render))?;
    let written = write_artifacts(&cfg.output_dir, &artifacts)?;
    Ok((analysis, written))
}

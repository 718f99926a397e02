//! Command-line front end: argument parsing, subcommands and the report
//! pipeline.

pub mod pipeline;
pub mod report;
pub mod svg;

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evbs::dataset::{IngestConfig, MomentConvention};
use evbs::simulation::{format_tables, run_scenario, ScenarioConfig};
use evbs::{FitOptions, Mode};

use pipeline::{AnalysisConfig, Deletions, PipelineError, SchemeChoice};

/// Environment variable that overrides a configured seed.
pub const SEED_VAR: &str = "EVBS_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "evbs",
    version,
    about = "Extreme-value Birnbaum-Saunders regression with local influence diagnostics",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model and print estimates with standard errors.
    Fit(DataArgs),
    /// Local influence for one perturbation scheme.
    Influence(InfluenceArgs),
    /// Quantile residuals, normality tests and a simulated envelope.
    Residuals(ResidualArgs),
    /// Monte Carlo study for a preset or a scenario config file.
    Simulate(SimulateArgs),
    /// Full analysis written to report.json, tables/ and plots/.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding a unique row key.
    #[arg(long, default_value = "date")]
    pub key_column: String,
    #[arg(long, default_value = "gust_ms")]
    pub response: String,
    /// Covariate column; repeat for several.
    #[arg(long = "covariate", default_value = "pressure_mb")]
    pub covariates: Vec<String>,
    /// Model the logarithm of the response.
    #[arg(long)]
    pub log_response: bool,
    /// Physical range check `column:low:high`; repeat for several. Defaults to
    /// `pressure_mb:800:1100` when that column is a covariate.
    #[arg(long = "band", value_parser = parse_band)]
    pub bands: Vec<(String, f64, f64)>,
    /// Fix the tail index at zero.
    #[arg(long)]
    pub gumbel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    CaseWeights,
    Response,
    Covariate,
}

impl From<SchemeArg> for SchemeChoice {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::CaseWeights => SchemeChoice::CaseWeights,
            SchemeArg::Response => SchemeChoice::Response,
            SchemeArg::Covariate => SchemeChoice::Covariate,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InfluenceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "case-weights")]
    pub scheme: SchemeArg,
    /// Threshold multiplier in `λ* ≥ q/√n`; chosen from the data when absent.
    #[arg(long)]
    pub q: Option<usize>,
    /// Response perturbation scale (default: sample SD of the response).
    #[arg(long)]
    pub s_y: Option<f64>,
    /// Covariate perturbation scale (default: sample SD of the column).
    #[arg(long)]
    pub s_x: Option<f64>,
    /// Number of normalized eigenvalues to print.
    #[arg(long, default_value_t = 4)]
    pub top: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ResidualArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 100)]
    pub envelope_sims: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Preset scenario (1, 2 or 3); ignored when --config is given.
    #[arg(long, default_value_t = 1)]
    pub scenario: u8,
    /// Scenario config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sample size; repeat for several.
    #[arg(long = "n")]
    pub sizes: Vec<usize>,
    /// True tail index; repeat for several.
    #[arg(long = "gamma", allow_hyphen_values = true)]
    pub gammas: Vec<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print aligned tables instead of CSV.
    #[arg(long)]
    pub tables: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Raw,
    BiasCorrected,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "evbs-report")]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Schemes to analyse; repeat for several (default: all).
    #[arg(long = "scheme", value_enum)]
    pub schemes: Vec<SchemeArg>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub s_y: Option<f64>,
    #[arg(long)]
    pub s_x: Option<f64>,
    /// `flagged`, `none`, or comma-separated 1-based observation numbers.
    #[arg(long, default_value = "flagged", value_parser = parse_deletions)]
    pub delete: Deletions,
    #[arg(long, default_value_t = 100)]
    pub envelope_sims: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 24)]
    pub acf_lags: usize,
    #[arg(long, value_enum, default_value = "raw")]
    pub convention: ConventionArg,
}

fn parse_band(s: &str) -> Result<(String, f64, f64), String> {
    let parts: Vec<&str> = s.rsplitn(3, ':').collect();
    if parts.len() != 3 {
        return Err(format!("expected column:low:high, got {s:?}"));
    }
    let hi: f64 = parts[0].parse().map_err(|_| format!("bad upper bound in {s:?}"))?;
    let lo: f64 = parts[1].parse().map_err(|_| format!("bad lower bound in {s:?}"))?;
    if !(lo < hi) {
        return Err(format!("empty band in {s:?}"));
    }
    Ok((parts[2].to_string(), lo, hi))
}

fn parse_deletions(s: &str) -> Result<Deletions, String> {
    match s {
        "flagged" => Ok(Deletions::Flagged),
        "none" => Ok(Deletions::None),
        list => list
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad observation number {t:?}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Deletions::Explicit),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Analysis(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// An explicit flag wins, then `EVBS_SEED`, then the configured value.
pub fn resolve_seed(flag: Option<u64>, configured: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_VAR}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(configured),
    }
}

impl DataArgs {
    fn ingest(&self) -> IngestConfig {
        let bands = if self.bands.is_empty() {
            IngestConfig::default()
                .bands
                .into_iter()
                .filter(|(c, _, _)| self.covariates.contains(c))
                .collect()
        } else {
            self.bands.clone()
        };
        IngestConfig {
            date_column: self.key_column.clone(),
            response_column: self.response.clone(),
            covariate_columns: self.covariates.clone(),
            log_response: self.log_response,
            bands,
        }
    }

    fn config(&self) -> AnalysisConfig {
        let mut cfg = AnalysisConfig::new(self.input.clone(), self.ingest());
        if self.gumbel {
            cfg.fit = FitOptions {
                mode: Mode::Gumbel,
                ..FitOptions::default()
            };
        }
        cfg
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into())
}

fn cmd_fit(args: &DataArgs) -> Result<String, CliError> {
    let cfg = args.config();
    let ds = pipeline::load(&cfg)?;
    let fit = pipeline::fit(&cfg, &ds)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "n = {}, log-likelihood = {:.4}, iterations = {}, mode = {:?}{}",
        ds.data.n(),
        fit.loglik,
        fit.iterations,
        fit.mode,
        if fit.boundary_active { ", boundary active" } else { "" }
    );
    let _ = writeln!(s, "{:<24} {:>12} {:>12} {:>10} {:>10}", "parameter", "estimate", "std.error", "z", "p");
    for p in report::parameters(&fit, &ds.data) {
        let _ = writeln!(
            s,
            "{:<24} {:>12.4} {:>12} {:>10} {:>10}",
            p.name,
            p.estimate,
            fmt_opt(p.std_error, 4),
            fmt_opt(p.z, 3),
            fmt_opt(p.p_value, 4)
        );
    }
    Ok(s)
}

fn cmd_influence(args: &InfluenceArgs) -> Result<String, CliError> {
    let mut cfg = args.data.config();
    cfg.schemes = vec![args.scheme.into()];
    cfg.q = args.q;
    cfg.s_y = args.s_y;
    cfg.s_x = args.s_x;
    let ds = pipeline::load(&cfg)?;
    let fit = pipeline::fit(&cfg, &ds)?;
    let reports = pipeline::influence(&cfg, &ds, &fit)?;
    let mut s = String::new();
    for r in &reports {
        let tag = report::scheme_tag(&r.scheme, &ds.data);
        let top = &r.normalized_eigenvalues[..args.top.min(r.normalized_eigenvalues.len())];
        let top: Vec<String> = top.iter().map(|v| format!("{v:.5}")).collect();
        let _ = writeln!(s, "scheme {tag}");
        let _ = writeln!(s, "  normalized eigenvalues: {}", top.join(" "));
        let _ = writeln!(
            s,
            "  q = {}{}, influential directions k = {}, benchmark b(q) = {:.5}",
            r.q,
            if r.q_default { " (default)" } else { "" },
            r.k,
            r.benchmark
        );
        if r.flagged.is_empty() {
            let _ = writeln!(s, "  no observation above the benchmark");
        }
        for &i in &r.flagged {
            let _ = writeln!(s, "  #{:<5} {:<12} B = {:.5}", i + 1, ds.records[i].date, r.contributions[i]);
        }
    }
    Ok(s)
}

fn cmd_residuals(args: &ResidualArgs) -> Result<String, CliError> {
    let mut cfg = args.data.config();
    cfg.envelope_sims = args.envelope_sims;
    cfg.envelope_level = args.level;
    cfg.seed = resolve_seed(args.seed, cfg.seed)?;
    let ds = pipeline::load(&cfg)?;
    let fit = pipeline::fit(&cfg, &ds)?;
    let (r, ks, sw, env) = pipeline::residual_stage(&cfg, &ds, &fit)?;
    let mut s = String::new();
    let _ = writeln!(s, "n = {}, clamped = {}", r.len(), r.clamped);
    let _ = writeln!(s, "Kolmogorov-Smirnov D = {:.4}, p = {:.4}", ks.statistic, ks.p_value);
    match sw {
        Some(t) => {
            let _ = writeln!(s, "Shapiro-Wilk W = {:.4}, p = {:.4}", t.statistic, t.p_value);
        }
        None => {
            let _ = writeln!(s, "Shapiro-Wilk not available for n = {}", r.len());
        }
    }
    let _ = writeln!(
        s,
        "envelope: {} simulations ({} failed), level {}, {:.1}% of points inside",
        env.n_sim,
        env.n_failed,
        env.level,
        100.0 * env.coverage()
    );
    Ok(s)
}

/// Builds the scenario from the preset or file and applies overrides.
pub fn scenario_config(args: &SimulateArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Analysis(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::parse(&text).map_err(|e| CliError::Analysis(e.to_string()))?
        }
        None => ScenarioConfig::preset(args.scenario).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    if !args.sizes.is_empty() {
        cfg.sizes = args.sizes.clone();
    }
    if !args.gammas.is_empty() {
        cfg.gammas = args.gammas.clone();
    }
    if let Some(r) = args.replicas {
        cfg.replicas = r;
    }
    cfg.seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let cfg = scenario_config(args)?;
    let result = run_scenario(&cfg).map_err(|e| CliError::Analysis(e.to_string()))?;
    let tables = format_tables(&result);
    if let Some(path) = &args.output {
        std::fs::write(path, &tables.csv)?;
    }
    Ok(match (args.tables, &args.output) {
        (true, _) => format!("{}\n{}", tables.estimates, tables.accuracy),
        (false, Some(path)) => format!("wrote {}\n", path.display()),
        (false, None) => tables.csv,
    })
}

fn cmd_report(args: &ReportArgs) -> Result<String, CliError> {
    let mut cfg = args.data.config();
    cfg.output_dir = args.output.clone();
    cfg.seed = resolve_seed(args.seed, cfg.seed)?;
    if !args.schemes.is_empty() {
        cfg.schemes = args.schemes.iter().map(|&s| s.into()).collect();
    }
    cfg.q = args.q;
    cfg.s_y = args.s_y;
    cfg.s_x = args.s_x;
    cfg.deletions = args.delete.clone();
    cfg.envelope_sims = args.envelope_sims;
    cfg.envelope_level = args.level;
    cfg.acf_lags = args.acf_lags;
    cfg.convention = match args.convention {
        ConventionArg::Raw => MomentConvention::Raw,
        ConventionArg::BiasCorrected => MomentConvention::BiasCorrected,
    };
    let (analysis, written) = pipeline::run_pipeline(&cfg)?;
    let mut s = String::new();
    let flagged: Vec<String> = analysis
        .influence
        .iter()
        .map(|r| {
            let obs: Vec<String> = r.flagged.iter().map(|i| format!("#{}", i + 1)).collect();
            format!("{}: {}", report::scheme_tag(&r.scheme, &analysis.dataset.data), obs.join(" "))
        })
        .collect();
    let _ = writeln!(s, "flagged {}", flagged.join("; "));
    let _ = writeln!(s, "wrote {} files under {}", written.len(), cfg.output_dir.display());
    Ok(s)
}

/// Runs a parsed command, writing its output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match &cli.command {
        Command::Fit(a) => cmd_fit(a)?,
        Command::Influence(a) => cmd_influence(a)?,
        Command::Residuals(a) => cmd_residuals(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Report(a) => cmd_report(a)?,
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

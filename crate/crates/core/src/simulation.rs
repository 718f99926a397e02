//! Monte Carlo study of the MLE: bias, RMSE and Wald coverage over a grid of
//! sample sizes and tail indices.
//!
//! Every (cell, replica) pair owns an RNG stream derived from the scenario
//! seed, so results do not depend on thread count or scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{logevbs_sample, LogEvbsParams};
use crate::error::{Error, Result};
use crate::regression::{fit_mle, FitOptions, Mode, RegressionData, ThetaParams};
use crate::rng::RngState;

/// Nominal 95% Wald quantile.
pub const WALD_Z: f64 = 1.96;

/// Share of diverged replicas above which a cell is flagged.
pub const DIVERGENCE_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: u8,
    pub sizes: Vec<usize>,
    pub gammas: Vec<f64>,
    pub replicas: usize,
    /// True `(β₀, β₁)`.
    pub beta: Vec<f64>,
    pub alpha: f64,
    pub x_range: (f64, f64),
    /// Share of covariates replaced by high-leverage values.
    pub leverage_fraction: f64,
    pub leverage_range: (f64, f64),
    /// Share of errors drawn with `contamination_alpha` instead of `alpha`.
    pub contamination_fraction: f64,
    pub contamination_alpha: f64,
    pub seed: u64,
    /// Search box for `γ̂`. Wider than the default so that estimates near a
    /// true γ of 0.2 are not truncated.
    pub fit_gamma_lower: f64,
    pub fit_gamma_upper: f64,
}

impl ScenarioConfig {
    /// The three designs of the study, with 5000 replicas and seed 1.
    pub fn preset(scenario: u8) -> Result<Self> {
        let base = ScenarioConfig {
            scenario,
            sizes: vec![60, 120, 180],
            gammas: vec![-0.2, 0.0, 0.2],
            replicas: 5000,
            beta: vec![0.5, 0.5],
            alpha: 0.5,
            x_range: (0.0, 1.0),
            leverage_fraction: 0.0,
            leverage_range: (5.0, 10.0),
            contamination_fraction: 0.0,
            contamination_alpha: 0.7,
            seed: 1,
            fit_gamma_lower: -1.0 + 1e-6,
            fit_gamma_upper: 1.0 - 1e-6,
        };
        match scenario {
            1 => Ok(base),
            2 => Ok(ScenarioConfig {
                leverage_fraction: 0.1,
                ..base
            }),
            3 => Ok(ScenarioConfig {
                beta: vec![1.0, 2.0],
                alpha: 1.2,
                contamination_fraction: 0.1,
                ..base
            }),
            _ => Err(Error::InvalidInput(format!("unknown scenario {scenario}, expected 1, 2 or 3"))),
        }
    }

    /// Reads `key = value` lines; `#` starts a comment. Keys not given keep
    /// the preset of the `scenario` key (default 1).
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_error(k + 1, format!("expected key = value, got {line:?}")));
            };
            pairs.push((k + 1, key.trim().to_string(), value.trim().to_string()));
        }
        let scenario = match pairs.iter().find(|(_, key, _)| key == "scenario") {
            Some((line, _, v)) => parse_num::<u8>(*line, v)?,
            None => 1,
        };
        let mut cfg = ScenarioConfig::preset(scenario)?;
        for (line, key, value) in &pairs {
            let line = *line;
            match key.as_str() {
                "scenario" => {}
                "sizes" | "n" => cfg.sizes = parse_list(line, value)?,
                "gammas" | "gamma" => cfg.gammas = parse_list(line, value)?,
                "replicas" => cfg.replicas = parse_num(line, value)?,
                "beta" => cfg.beta = parse_list(line, value)?,
                "alpha" => cfg.alpha = parse_num(line, value)?,
                "x_range" => cfg.x_range = parse_pair(line, value)?,
                "leverage_fraction" => cfg.leverage_fraction = parse_num(line, value)?,
                "leverage_range" => cfg.leverage_range = parse_pair(line, value)?,
                "contamination_fraction" => cfg.contamination_fraction = parse_num(line, value)?,
                "contamination_alpha" => cfg.contamination_alpha = parse_num(line, value)?,
                "seed" => cfg.seed = parse_num(line, value)?,
                "fit_gamma_lower" => cfg.fit_gamma_lower = parse_num(line, value)?,
                "fit_gamma_upper" => cfg.fit_gamma_upper = parse_num(line, value)?,
                other => return Err(config_error(line, format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(1..=3).contains(&self.scenario) {
            return bad(format!("unknown scenario {}", self.scenario));
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 4) {
            return bad(format!("sample sizes must be at least 4, got {:?}", self.sizes));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g > -1.0 && *g < 1.0)) {
            return bad(format!("gammas must lie in (-1, 1), got {:?}", self.gammas));
        }
        if self.beta.len() != 2 || self.beta.iter().any(|b| !b.is_finite()) {
            return bad(format!("beta needs two finite entries, got {:?}", self.beta));
        }
        for (name, a) in [("alpha", self.alpha), ("contamination_alpha", self.contamination_alpha)] {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("{name} must be positive, got {a}"));
            }
        }
        for (name, f) in [
            ("leverage_fraction", self.leverage_fraction),
            ("contamination_fraction", self.contamination_fraction),
        ] {
            if !(0.0..1.0).contains(&f) {
                return bad(format!("{name} must lie in [0, 1), got {f}"));
            }
        }
        for (name, (lo, hi)) in [("x_range", self.x_range), ("leverage_range", self.leverage_range)] {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return bad(format!("{name} must be an increasing finite pair, got ({lo}, {hi})"));
            }
        }
        if !(self.fit_gamma_lower > -1.0 && self.fit_gamma_lower < self.fit_gamma_upper && self.fit_gamma_upper < 1.0) {
            return bad(format!(
                "fit gamma box ({}, {}) must sit inside (-1, 1)",
                self.fit_gamma_lower, self.fit_gamma_upper
            ));
        }
        Ok(())
    }

    /// `(n, γ)` cells in row-major order: sizes outer, gammas inner.
    pub fn cells(&self) -> Vec<(usize, f64)> {
        self.sizes
            .iter()
            .flat_map(|&n| self.gammas.iter().map(move |&g| (n, g)))
            .collect()
    }

    pub fn truth(&self, gamma: f64) -> ThetaParams {
        ThetaParams::new(self.beta.clone(), self.alpha, gamma)
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            gamma_lower: self.fit_gamma_lower,
            gamma_upper: self.fit_gamma_upper,
            mode: Mode::Free,
            auto_gumbel: false,
            ..FitOptions::default()
        }
    }
}

fn config_error(line: usize, message: String) -> Error {
    Error::InvalidInput(format!("config line {line}: {message}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| config_error(line, format!("cannot parse {v:?}")))
}

fn parse_list<T: std::str::FromStr>(line: usize, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_num(line, s)).collect()
}

fn parse_pair(line: usize, v: &str) -> Result<(f64, f64)> {
    match parse_list::<f64>(line, v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(config_error(line, format!("expected two values, got {v:?}"))),
    }
}

fn count_of(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).min(n)
}

/// One simulated dataset for cell `cell` of [`ScenarioConfig::cells`].
pub fn generate_replica(cfg: &ScenarioConfig, cell: usize, replica: usize) -> Result<RegressionData> {
    let cells = cfg.cells();
    let Some(&(n, gamma)) = cells.get(cell) else {
        return Err(Error::InvalidInput(format!("cell {cell} out of range")));
    };
    let mut rng = RngState::derive(cfg.seed, ((cell as u64) << 32) | replica as u64);

    let mut x: Vec<f64> = (0..n).map(|_| rng.uniform(cfg.x_range.0, cfg.x_range.1)).collect();
    let k = count_of(cfg.leverage_fraction, n);
    if k > 0 {
        for i in rng.choose_indices(n, k) {
            x[i] = rng.uniform(cfg.leverage_range.0, cfg.leverage_range.1);
        }
    }

    let mut eps = logevbs_sample(n, &LogEvbsParams::new(cfg.alpha, 0.0, gamma)?, &mut rng);
    let m = count_of(cfg.contamination_fraction, n);
    if m > 0 {
        let idx = rng.choose_indices(n, m);
        let alt = logevbs_sample(m, &LogEvbsParams::new(cfg.contamination_alpha, 0.0, gamma)?, &mut rng);
        for (i, e) in idx.into_iter().zip(alt) {
            eps[i] = e;
        }
    }

    let y: Vec<f64> = x
        .iter()
        .zip(&eps)
        .map(|(xi, e)| cfg.beta[0] + cfg.beta[1] * xi + e)
        .collect();
    RegressionData::from_columns(y, &[("x", &x)])
}

/// Summary of one `(n, γ)` cell. Vectors are ordered `β₀, β₁, α, γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub gamma: f64,
    pub truth: Vec<f64>,
    pub replicas: usize,
    /// Replicas whose fit failed, did not converge or had no standard errors.
    pub diverged: usize,
    pub mean: Vec<f64>,
    pub bias: Vec<f64>,
    pub rmse: Vec<f64>,
    pub cp: Vec<f64>,
    pub flagged: bool,
}

impl CellResult {
    pub fn used(&self) -> usize {
        self.replicas - self.diverged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: u8,
    pub cells: Vec<CellResult>,
}

/// Estimates and standard errors of one replica, or `None` when diverged.
fn replica_estimate(cfg: &ScenarioConfig, cell: usize, replica: usize, opts: &FitOptions) -> Option<(Vec<f64>, Vec<f64>)> {
    let data = generate_replica(cfg, cell, replica).ok()?;
    let fit = fit_mle(&data, None, opts).ok().filter(|f| f.converged)?;
    let se = fit.std_errors.clone()?;
    Some((fit.theta_hat.to_vec(Mode::Free), se))
}

fn summarize(n: usize, gamma: f64, truth: Vec<f64>, replicas: usize, estimates: &[(Vec<f64>, Vec<f64>)]) -> CellResult {
    let k = truth.len();
    let used = estimates.len();
    let diverged = replicas - used;
    let flagged = diverged as f64 > DIVERGENCE_LIMIT * replicas as f64;
    if used == 0 {
        let nan = vec![f64::NAN; k];
        return CellResult {
            n,
            gamma,
            truth,
            replicas,
            diverged,
            mean: nan.clone(),
            bias: nan.clone(),
            rmse: nan.clone(),
            cp: nan,
            flagged: true,
        };
    }
    let u = used as f64;
    let mut mean = vec![0.0; k];
    let mut sq = vec![0.0; k];
    let mut hits = vec![0usize; k];
    // sequential sums in replica order keep the result bit-reproducible
    for (est, se) in estimates {
        for j in 0..k {
            let d = est[j] - truth[j];
            mean[j] += est[j];
            sq[j] += d * d;
            if d.abs() <= WALD_Z * se[j] {
                hits[j] += 1;
            }
        }
    }
    for m in &mut mean {
        *m /= u;
    }
    CellResult {
        n,
        gamma,
        bias: mean.iter().zip(&truth).map(|(m, t)| m - t).collect(),
        rmse: sq.iter().map(|s| (s / u).sqrt()).collect(),
        cp: hits.iter().map(|&h| h as f64 / u).collect(),
        mean,
        truth,
        replicas,
        diverged,
        flagged,
    }
}

/// Fits every replica of every cell; replicas run in parallel.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let opts = cfg.fit_options();
    let cells = cfg
        .cells()
        .into_iter()
        .enumerate()
        .map(|(c, (n, gamma))| {
            let estimates: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.replicas)
                .into_par_iter()
                .filter_map(|r| replica_estimate(cfg, c, r, &opts))
                .collect();
            summarize(n, gamma, cfg.truth(gamma).to_vec(Mode::Free), cfg.replicas, &estimates)
        })
        .collect();
    Ok(ScenarioResult {
        scenario: cfg.scenario,
        cells,
    })
}

const NAMES: [&str; 4] = ["beta0", "beta1", "alpha", "gamma"];

pub fn csv_header() -> String {
    let mut cols = vec!["scenario".to_string(), "n".into(), "gamma".into(), "replicas".into(), "diverged".into(), "flagged".into()];
    for block in ["truth", "mean", "bias", "rmse", "cp"] {
        cols.extend(NAMES.iter().map(|n| format!("{block}_{n}")));
    }
    cols.join(",")
}

/// CSV and aligned-text renderings of a result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tables {
    pub csv: String,
    /// Mean and bias, one row per cell.
    pub estimates: String,
    /// RMSE and coverage, one row per cell.
    pub accuracy: String,
}

/// Floats are written in shortest round-trip form, so [`read_tables_csv`]
/// recovers them exactly.
pub fn format_tables(result: &ScenarioResult) -> Tables {
    let mut csv = csv_header();
    csv.push('\n');
    for c in &result.cells {
        let mut row = vec![
            result.scenario.to_string(),
            c.n.to_string(),
            c.gamma.to_string(),
            c.replicas.to_string(),
            c.diverged.to_string(),
            c.flagged.to_string(),
        ];
        for block in [&c.truth, &c.mean, &c.bias, &c.rmse, &c.cp] {
            row.extend(block.iter().map(|v| v.to_string()));
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }

    let head = |left: &str, right: &str| {
        let mut s = format!("{:>5} {:>6} |", "n", "gamma");
        for side in [left, right] {
            for n in NAMES {
                s.push_str(&format!(" {:>12}", format!("{side}_{n}")));
            }
        }
        s.push('\n');
        s
    };
    let mut estimates = head("mean", "bias");
    let mut accuracy = head("rmse", "cp");
    for c in &result.cells {
        for (out, a, b) in [(&mut estimates, &c.mean, &c.bias), (&mut accuracy, &c.rmse, &c.cp)] {
            let _ = write!(out, "{:>5} {:>6.2} |", c.n, c.gamma);
            for v in a.iter().chain(b.iter()) {
                let _ = write!(out, " {v:>12.3}");
            }
            if c.flagged {
                let _ = write!(out, "  [{} of {} diverged]", c.diverged, c.replicas);
            }
            out.push('\n');
        }
    }
    Tables {
        csv,
        estimates,
        accuracy,
    }
}

/// Inverse of the CSV part of [`format_tables`].
pub fn read_tables_csv(text: &str) -> Result<ScenarioResult> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != csv_header() {
        return Err(Error::InvalidInput("unexpected simulation table header".into()));
    }
    let mut scenario = None;
    let mut cells = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let f = |j: usize| parse_num::<f64>(line, &rec[j]);
        let block = |start: usize| -> Result<Vec<f64>> { (start..start + 4).map(f).collect() };
        let s: u8 = parse_num(line, &rec[0])?;
        if scenario.is_some_and(|p| p != s) {
            return Err(config_error(line, "mixed scenarios in one table".into()));
        }
        scenario = Some(s);
        cells.push(CellResult {
            n: parse_num(line, &rec[1])?,
            gamma: f(2)?,
            replicas: parse_num(line, &rec[3])?,
            diverged: parse_num(line, &rec[4])?,
            flagged: parse_num(line, &rec[5])?,
            truth: block(6)?,
            mean: block(10)?,
            bias: block(14)?,
            rmse: block(18)?,
            cp: block(22)?,
        });
    }
    Ok(ScenarioResult {
        scenario: scenario.unwrap_or(1),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_the_designs() {
        let s3 = ScenarioConfig::preset(3).unwrap();
        assert_eq!(s3.beta, vec![1.0, 2.0]);
        assert_eq!((s3.alpha, s3.contamination_alpha, s3.contamination_fraction), (1.2, 0.7, 0.1));
        assert_eq!(ScenarioConfig::preset(2).unwrap().leverage_fraction, 0.1);
        assert!(ScenarioConfig::preset(4).is_err());
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = ScenarioConfig::parse("# desk run\nscenario = 2\nsizes = 120 # one size\nreplicas=50\nseed = 9\n").unwrap();
        assert_eq!(cfg.scenario, 2);
        assert_eq!(cfg.sizes, vec![120]);
        assert_eq!(cfg.replicas, 50);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.leverage_fraction, 0.1);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = ScenarioConfig::parse("replicas = 5\nfoo = 1\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(ScenarioConfig::parse("replicas = 0").is_err());
        assert!(ScenarioConfig::parse("leverage_fraction = 1").is_err());
        assert!(ScenarioConfig::parse("sizes = 10, x").is_err());
    }

    #[test]
    fn empty_result_gives_header_only() {
        let t = format_tables(&ScenarioResult {
            scenario: 1,
            cells: vec![],
        });
        assert_eq!(t.csv.lines().count(), 1);
        assert_eq!(read_tables_csv(&t.csv).unwrap().cells.len(), 0);
    }

    #[test]
    fn summary_basics() {
        let truth = vec![0.0, 0.0, 1.0, 0.0];
        let est = vec![
            (vec![0.1, -0.1, 1.0, 0.0], vec![1.0; 4]),
            (vec![-0.1, 0.1, 1.2, 0.0], vec![0.01; 4]),
        ];
        let c = summarize(10, 0.0, truth, 3, &est);
        assert_eq!(c.diverged, 1);
        assert!(c.flagged);
        assert!((c.bias[2] - 0.1).abs() < 1e-12);
        assert!((c.rmse[0] - 0.1).abs() < 1e-12);
        assert_eq!(c.cp[0], 0.5);
        assert_eq!(c.cp[3], 1.0);
        for j in 0..4 {
            assert!(c.rmse[j] >= c.bias[j].abs());
        }
    }
}

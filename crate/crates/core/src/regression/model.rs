use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg::{lstsq, Matrix, SymMatrix};

/// Log-scale responses with a design matrix whose first column is the
/// intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    y: Vec<f64>,
    x: Matrix,
    labels: Vec<String>,
}

impl RegressionData {
    /// Checks `n > p ≥ 1`, a leading column of ones, finite entries and full
    /// column rank.
    pub fn new(y: Vec<f64>, x: Matrix, labels: Vec<String>) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        if y.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} responses for {} design rows",
                y.len(),
                n
            )));
        }
        if p == 0 || n <= p {
            return Err(Error::InvalidInput(format!("need n > p >= 1, got n={n}, p={p}")));
        }
        if labels.len() != p {
            return Err(Error::InvalidInput(format!("{} labels for {} columns", labels.len(), p)));
        }
        if (0..n).any(|i| x[(i, 0)] != 1.0) {
            return Err(Error::InvalidInput("first design column must be all ones".into()));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression data".into()));
        }
        lstsq(&x, &y)?;
        Ok(RegressionData { y, x, labels })
    }

    /// Intercept plus the given covariate columns.
    pub fn from_columns(y: Vec<f64>, covariates: &[(&str, &[f64])]) -> Result<Self> {
        let n = y.len();
        let p = covariates.len() + 1;
        if let Some((name, _)) = covariates.iter().find(|(_, c)| c.len() != n) {
            return Err(Error::InvalidInput(format!("column {name} has the wrong length")));
        }
        let x = Matrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { covariates[j - 1].1[i] });
        let mut labels = vec!["(intercept)".to_string()];
        labels.extend(covariates.iter().map(|(name, _)| name.to_string()));
        RegressionData::new(y, x, labels)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j)
    }

    /// Linear predictor `xᵢᵀβ`.
    pub fn eta(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    pub fn without_row(&self, index: usize) -> Result<Self> {
        if index >= self.n() {
            return Err(Error::InvalidInput(format!("row {index} out of range")));
        }
        let keep: Vec<usize> = (0..self.n()).filter(|&i| i != index).collect();
        self.select_rows(&keep)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let y = rows.iter().map(|&i| self.y[i]).collect();
        let x = Matrix::from_fn(rows.len(), self.p(), |r, j| self.x[(rows[r], j)]);
        RegressionData::new(y, x, self.labels.clone())
    }

    /// Same design with a new response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::InvalidInput("response length mismatch".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response".into()));
        }
        Ok(RegressionData {
            y,
            x: self.x.clone(),
            labels: self.labels.clone(),
        })
    }

    /// Adds `shift[i]` to column `col`. The intercept cannot be shifted.
    pub fn with_column_shift(&self, col: usize, shift: &[f64]) -> Result<Self> {
        if col == 0 || col >= self.p() {
            return Err(Error::InvalidInput(format!("cannot shift column {col}")));
        }
        let mut x = self.x.clone();
        for (i, s) in shift.iter().enumerate() {
            x[(i, col)] += s;
        }
        RegressionData::new(self.y.clone(), x, self.labels.clone())
    }
}

/// `θ = (β, α, γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub beta: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

/// `Free` estimates `γ`; `Gumbel` fixes `γ = 0` and drops it from the
/// parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Free,
    Gumbel,
}

impl Mode {
    pub fn dim(self, p: usize) -> usize {
        match self {
            Mode::Free => p + 2,
            Mode::Gumbel => p + 1,
        }
    }
}

impl ThetaParams {
    pub fn new(beta: Vec<f64>, alpha: f64, gamma: f64) -> Self {
        ThetaParams { beta, alpha, gamma }
    }

    pub fn to_vec(&self, mode: Mode) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.alpha);
        if mode == Mode::Free {
            v.push(self.gamma);
        }
        v
    }

    pub fn from_vec(v: &[f64], p: usize, mode: Mode) -> Self {
        assert_eq!(v.len(), mode.dim(p));
        ThetaParams {
            beta: v[..p].to_vec(),
            alpha: v[p],
            gamma: if mode == Mode::Free { v[p + 1] } else { 0.0 },
        }
    }

    fn effective_gamma(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Free => self.gamma,
            Mode::Gumbel => 0.0,
        }
    }
}

/// Partials of one observation's log-density with respect to the
/// residual `r = y − xᵀβ`, `α` and `γ`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ObsTerms {
    pub r: f64,
    pub rr: f64,
    pub a: f64,
    pub aa: f64,
    pub ra: f64,
    pub g: f64,
    pub rg: f64,
    pub ag: f64,
    pub gg: f64,
}

pub(crate) fn obs_terms(resid: f64, alpha: f64, gamma: f64) -> Option<ObsTerms> {
    let c = (0.5 * resid).cosh();
    let s = (0.5 * resid).sinh();
    let x1 = 2.0 / alpha * c;
    let x2 = 2.0 / alpha * s;
    let d = kernel::log_density(x2, gamma)?;
    let ratio = s / c;
    Some(ObsTerms {
        r: 0.5 * ratio + 0.5 * d.lx * x1,
        rr: 0.25 * (1.0 - ratio * ratio) + 0.25 * d.lxx * x1 * x1 + 0.25 * d.lx * x2,
        a: -(1.0 + d.lx * x2) / alpha,
        aa: (1.0 + d.lxx * x2 * x2 + 2.0 * d.lx * x2) / (alpha * alpha),
        ra: -x1 / (2.0 * alpha) * (d.lxx * x2 + d.lx),
        g: d.lg,
        rg: 0.5 * d.lxg * x1,
        ag: -d.lxg * x2 / alpha,
        gg: d.lgg,
    })
}

fn check_theta(theta: &ThetaParams, data: &RegressionData) -> Result<()> {
    if theta.beta.len() != data.p() {
        return Err(Error::InvalidInput(format!(
            "beta has {} entries, design has {} columns",
            theta.beta.len(),
            data.p()
        )));
    }
    if !(theta.alpha > 0.0) || !theta.alpha.is_finite() || !theta.gamma.is_finite() {
        return Err(Error::Domain(format!("invalid alpha/gamma ({}, {})", theta.alpha, theta.gamma)));
    }
    Ok(())
}

/// Per-observation terms, failing at the first point outside the support.
pub(crate) fn all_obs_terms(theta: &ThetaParams, data: &RegressionData, mode: Mode) -> Result<Vec<ObsTerms>> {
    check_theta(theta, data)?;
    let gamma = theta.effective_gamma(mode);
    (0..data.n())
        .map(|i| {
            let r = data.y()[i] - data.eta(i, &theta.beta);
            obs_terms(r, theta.alpha, gamma).ok_or(Error::Infeasible { index: i })
        })
        .collect()
}

/// `(ξ₁, ξ₂)` for every observation.
pub fn xi_terms(theta: &ThetaParams, data: &RegressionData) -> Result<(Vec<f64>, Vec<f64>)> {
    check_theta(theta, data)?;
    let mut xi1 = Vec::with_capacity(data.n());
    let mut xi2 = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let h = 0.5 * (data.y()[i] - data.eta(i, &theta.beta));
        let a = 2.0 / theta.alpha * h.cosh();
        let b = 2.0 / theta.alpha * h.sinh();
        if !(1.0 + theta.gamma * b > 0.0) {
            return Err(Error::Infeasible { index: i });
        }
        xi1.push(a);
        xi2.push(b);
    }
    Ok((xi1, xi2))
}

pub fn loglik(theta: &ThetaParams, data: &RegressionData) -> Result<f64> {
    loglik_mode(theta, data, Mode::Free)
}

pub fn loglik_mode(theta: &ThetaParams, data: &RegressionData, mode: Mode) -> Result<f64> {
    loglik_weighted(theta, data, mode, None)
}

/// `Σ wᵢ ℓᵢ`; unit weights when `weights` is `None`.
pub(crate) fn loglik_weighted(
    theta: &ThetaParams,
    data: &RegressionData,
    mode: Mode,
    weights: Option<&[f64]>,
) -> Result<f64> {
    check_theta(theta, data)?;
    let gamma = theta.effective_gamma(mode);
    let mut total = 0.0;
    for i in 0..data.n() {
        let r = data.y()[i] - data.eta(i, &theta.beta);
        let h = 0.5 * r;
        let x2 = 2.0 / theta.alpha * h.sinh();
        let d = kernel::log_density(x2, gamma).ok_or(Error::Infeasible { index: i })?;
        let li = -LN_2 + (2.0 / theta.alpha * h.cosh()).ln() + d.l;
        total += weights.map_or(1.0, |w| w[i]) * li;
    }
    Ok(total)
}

/// Gradient of the log-likelihood; length `p + 2` (`p + 1` in Gumbel mode).
pub fn score(theta: &ThetaParams, data: &RegressionData, mode: Mode) -> Result<Vec<f64>> {
    score_weighted(theta, data, mode, None)
}

pub(crate) fn score_weighted(
    theta: &ThetaParams,
    data: &RegressionData,
    mode: Mode,
    weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let terms = all_obs_terms(theta, data, mode)?;
    let p = data.p();
    let mut g = vec![0.0; mode.dim(p)];
    for (i, t) in terms.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        for (k, xk) in data.row(i).iter().enumerate() {
            g[k] -= w * xk * t.r;
        }
        g[p] += w * t.a;
        if mode == Mode::Free {
            g[p + 1] += w * t.g;
        }
    }
    Ok(g)
}

/// Analytic Hessian of the log-likelihood.
pub fn hessian(theta: &ThetaParams, data: &RegressionData, mode: Mode) -> Result<SymMatrix> {
    hessian_weighted(theta, data, mode, None)
}

pub(crate) fn hessian_weighted(
    theta: &ThetaParams,
    data: &RegressionData,
    mode: Mode,
    weights: Option<&[f64]>,
) -> Result<SymMatrix> {
    let terms = all_obs_terms(theta, data, mode)?;
    Ok(assemble_hessian(&terms, data, mode, weights))
}

pub(crate) fn assemble_hessian(
    terms: &[ObsTerms],
    data: &RegressionData,
    mode: Mode,
    weights: Option<&[f64]>,
) -> SymMatrix {
    let p = data.p();
    let d = mode.dim(p);
    let mut h = Matrix::zeros(d, d);
    for (i, t) in terms.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let x = data.row(i);
        for j in 0..p {
            for k in j..p {
                h[(j, k)] += w * x[j] * x[k] * t.rr;
            }
            h[(j, p)] -= w * x[j] * t.ra;
            if mode == Mode::Free {
                h[(j, p + 1)] -= w * x[j] * t.rg;
            }
        }
        h[(p, p)] += w * t.aa;
        if mode == Mode::Free {
            h[(p, p + 1)] += w * t.ag;
            h[(p + 1, p + 1)] += w * t.gg;
        }
    }
    for j in 0..d {
        for k in 0..j {
            h[(j, k)] = h[(k, j)];
        }
    }
    SymMatrix::new(h).expect("hessian is symmetric by construction")
}

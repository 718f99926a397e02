//! GEV, EVBS and log-EVBS distributions under the unified tail-index
//! parameterization.
//!
//! If `X ~ GEV(0, 1, γ)` then `T = β (αX/2 + √((αX/2)² + 1))²` is
//! `EVBS(α, β, γ)` and `Y = ln T` is `log-EVBS(α, ln β, γ)`. Both transforms
//! are increasing, so every cdf here is a GEV cdf evaluated at
//! `ξ₂ = (2/α) sinh((y − η)/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel;
use crate::rng::RngState;

/// Below this `|γ|` the Gumbel form is used.
pub const GUMBEL_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, gamma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() || !gamma.is_finite() || !sigma.is_finite() {
            return Err(Error::Domain(format!("GEV requires sigma > 0, got {sigma}")));
        }
        Ok(GevParams { mu, sigma, gamma })
    }

    pub fn standard(gamma: f64) -> Self {
        GevParams {
            mu: 0.0,
            sigma: 1.0,
            gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvbsParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EvbsParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() || !gamma.is_finite() {
            return Err(Error::Domain(format!(
                "EVBS requires alpha > 0 and beta > 0, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(EvbsParams { alpha, beta, gamma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEvbsParams {
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
}

impl LogEvbsParams {
    pub fn new(alpha: f64, eta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() || !eta.is_finite() || !gamma.is_finite() {
            return Err(Error::Domain(format!("log-EVBS requires alpha > 0, got {alpha}")));
        }
        Ok(LogEvbsParams { alpha, eta, gamma })
    }
}

fn snap(gamma: f64) -> f64 {
    if gamma.abs() < GUMBEL_THRESHOLD {
        0.0
    } else {
        gamma
    }
}

/// Standard GEV cdf with the hard plateaus outside the support.
fn std_gev_cdf(x: f64, gamma: f64) -> f64 {
    let gamma = snap(gamma);
    match kernel::cdf_exponent(x, gamma) {
        Some(e) => (-e).exp(),
        None if gamma > 0.0 => 0.0,
        None => 1.0,
    }
}

/// Standard GEV log-density; `-inf` outside the support.
fn std_gev_ln_pdf(x: f64, gamma: f64) -> f64 {
    match kernel::log_density(x, snap(gamma)) {
        Some(d) => d.l,
        None => f64::NEG_INFINITY,
    }
}

pub fn gev_cdf(x: f64, p: &GevParams) -> f64 {
    std_gev_cdf((x - p.mu) / p.sigma, p.gamma)
}

pub fn gev_pdf(x: f64, p: &GevParams) -> f64 {
    std_gev_ln_pdf((x - p.mu) / p.sigma, p.gamma).exp() / p.sigma
}

/// Inverse of the standard GEV cdf at `u ∈ (0, 1)`.
pub fn gev_std_quantile(u: f64, gamma: f64) -> f64 {
    let e = -u.ln();
    let gamma = snap(gamma);
    if gamma == 0.0 {
        -e.ln()
    } else {
        (-gamma * e.ln()).exp_m1() / gamma
    }
}

pub fn gev_sample(n: usize, p: &GevParams, rng: &mut RngState) -> Vec<f64> {
    (0..n)
        .map(|_| p.mu + p.sigma * gev_std_quantile(rng.open01(), p.gamma))
        .collect()
}

/// `(2/α) sinh(u/2)`, the GEV argument for a log-scale deviation `u`.
fn xi2(u: f64, alpha: f64) -> f64 {
    2.0 / alpha * (0.5 * u).sinh()
}

fn xi1(u: f64, alpha: f64) -> f64 {
    2.0 / alpha * (0.5 * u).cosh()
}

fn check_positive(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("EVBS is supported on t > 0, got {t}")))
    }
}

pub fn evbs_cdf(t: f64, p: &EvbsParams) -> Result<f64> {
    check_positive(t)?;
    Ok(std_gev_cdf(xi2((t / p.beta).ln(), p.alpha), p.gamma))
}

pub fn evbs_pdf(t: f64, p: &EvbsParams) -> Result<f64> {
    check_positive(t)?;
    let u = (t / p.beta).ln();
    let ln_g = std_gev_ln_pdf(xi2(u, p.alpha), p.gamma);
    Ok((ln_g + (0.5 * xi1(u, p.alpha)).ln() - t.ln()).exp())
}

/// `β (αx/2 + √((αx/2)² + 1))² = β exp(2 asinh(αx/2))`.
pub fn evbs_from_gev(x: f64, alpha: f64, beta: f64) -> f64 {
    beta * (2.0 * (0.5 * alpha * x).asinh()).exp()
}

pub fn evbs_sample(n: usize, p: &EvbsParams, rng: &mut RngState) -> Vec<f64> {
    (0..n)
        .map(|_| evbs_from_gev(gev_std_quantile(rng.open01(), p.gamma), p.alpha, p.beta))
        .collect()
}

pub fn logevbs_ln_pdf(y: f64, p: &LogEvbsParams) -> f64 {
    let u = y - p.eta;
    std_gev_ln_pdf(xi2(u, p.alpha), p.gamma) + (0.5 * xi1(u, p.alpha)).ln()
}

pub fn logevbs_pdf(y: f64, p: &LogEvbsParams) -> f64 {
    logevbs_ln_pdf(y, p).exp()
}

pub fn logevbs_cdf(y: f64, p: &LogEvbsParams) -> f64 {
    std_gev_cdf(xi2(y - p.eta, p.alpha), p.gamma)
}

/// `η + 2 asinh(αx/2)` for a standard GEV variate `x`.
pub fn logevbs_from_gev(x: f64, alpha: f64, eta: f64) -> f64 {
    eta + 2.0 * (0.5 * alpha * x).asinh()
}

pub fn logevbs_quantile(u: f64, p: &LogEvbsParams) -> f64 {
    logevbs_from_gev(gev_std_quantile(u, p.gamma), p.alpha, p.eta)
}

pub fn logevbs_sample(n: usize, p: &LogEvbsParams, rng: &mut RngState) -> Vec<f64> {
    (0..n).map(|_| logevbs_quantile(rng.open01(), p)).collect()
}

/// Open support interval `(lower, upper)`; infinite ends are `±inf`.
pub fn logevbs_support(p: &LogEvbsParams) -> (f64, f64) {
    let gamma = snap(p.gamma);
    if gamma == 0.0 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let bound = p.eta + 2.0 * (-p.alpha / (2.0 * gamma)).asinh();
    if gamma > 0.0 {
        (bound, f64::INFINITY)
    } else {
        (f64::NEG_INFINITY, bound)
    }
}

/// Whether the EVBS moment of the given order is finite. The same
/// conditions are sufficient for the log-EVBS moments.
pub fn moment_exists(order: u32, gamma: f64) -> Result<bool> {
    match order {
        1 => Ok(gamma < 0.5),
        2 => Ok(gamma < 0.25),
        _ => Err(Error::Unsupported(format!("moment order {order}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeRegime {
    /// `γ < −1`: increasing between `η` and the upper support bound.
    IncreasingOnInterval,
    /// `γ = −1`, `α ≥ 4`: increasing, decreasing, increasing.
    TwoCriticalPoints,
    /// `γ = −1`, `α < 4`.
    StrictlyIncreasing,
    /// `γ = 0`, `α < 2`.
    LocalMaxAtEta,
    /// `γ = 0`, `α > 2`.
    LocalMinAtEta,
    /// `γ = 0`, `α = 2`.
    Boundary,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub regime: ShapeRegime,
    /// Log-scale critical points of the density, ascending.
    pub critical_points: Vec<f64>,
    /// Interval on which the density is known to increase, if the regime
    /// gives one.
    pub increasing_on: Option<(f64, f64)>,
}

const SHAPE_TOLERANCE: f64 = 1e-12;

/// Classifies the log-EVBS density shape for the regimes with a known
/// answer. Other parameter values are reported as unclassified rather than
/// guessed.
pub fn classify_pdf_shape(p: &LogEvbsParams) -> ShapeReport {
    let (alpha, eta, gamma) = (p.alpha, p.eta, p.gamma);
    let upper = logevbs_support(p).1;
    if (gamma + 1.0).abs() <= SHAPE_TOLERANCE {
        if alpha >= 4.0 {
            let root = (alpha * alpha - 16.0).max(0.0).sqrt();
            let y1 = eta + 2.0 * (-alpha / 4.0 - root / 4.0).asinh();
            let y2 = eta + 2.0 * (-alpha / 4.0 + root / 4.0).asinh();
            return ShapeReport {
                regime: ShapeRegime::TwoCriticalPoints,
                critical_points: vec![y1, y2],
                increasing_on: Some((f64::NEG_INFINITY, y1)),
            };
        }
        return ShapeReport {
            regime: ShapeRegime::StrictlyIncreasing,
            critical_points: vec![],
            increasing_on: Some((f64::NEG_INFINITY, upper)),
        };
    }
    if gamma < -1.0 {
        return ShapeReport {
            regime: ShapeRegime::IncreasingOnInterval,
            critical_points: vec![],
            increasing_on: Some((eta, upper)),
        };
    }
    if gamma.abs() < GUMBEL_THRESHOLD {
        let (regime, increasing_on) = if (alpha - 2.0).abs() <= SHAPE_TOLERANCE {
            (ShapeRegime::Boundary, None)
        } else if alpha < 2.0 {
            (ShapeRegime::LocalMaxAtEta, Some((f64::NEG_INFINITY, eta)))
        } else {
            (ShapeRegime::LocalMinAtEta, None)
        };
        return ShapeReport {
            regime,
            critical_points: vec![eta],
            increasing_on,
        };
    }
    ShapeReport {
        regime: ShapeRegime::Unclassified,
        critical_points: vec![],
        increasing_on: None,
    }
}

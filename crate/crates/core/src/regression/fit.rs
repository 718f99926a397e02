use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma as gamma_fn;

use super::model::{hessian_weighted, loglik_mode, loglik_weighted, score_weighted, Mode, RegressionData, ThetaParams};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, Cholesky, Matrix, SymMatrix};
use crate::optim::{maximize, OptimOptions};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub optim: OptimOptions,
    /// Closed search box for `γ`; the defaults sit 1e-6 inside `(−1, 1/4)`.
    pub gamma_lower: f64,
    pub gamma_upper: f64,
    /// `α` is searched in `(0, alpha_upper]`.
    pub alpha_upper: f64,
    pub mode: Mode,
    /// Refit with `γ = 0` when `|γ̂|` falls below `gumbel_threshold`.
    pub auto_gumbel: bool,
    pub gumbel_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            optim: OptimOptions::default(),
            gamma_lower: -1.0 + 1e-6,
            gamma_upper: 0.25 - 1e-6,
            alpha_upper: 2.0,
            mode: Mode::Free,
            auto_gumbel: true,
            gumbel_threshold: 1e-4,
        }
    }
}

impl FitOptions {
    fn in_box(&self, alpha: f64, gamma: f64) -> bool {
        alpha > 0.0
            && alpha <= self.alpha_upper
            && (self.mode == Mode::Gumbel || (gamma >= self.gamma_lower && gamma <= self.gamma_upper))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta_hat: ThetaParams,
    pub loglik: f64,
    pub mode: Mode,
    /// Score at `θ̂`.
    pub score: Vec<f64>,
    pub hessian: SymMatrix,
    /// `(−L̈)⁻¹`; absent when `−L̈` is not positive definite.
    pub observed_info_inverse: Option<SymMatrix>,
    pub std_errors: Option<Vec<f64>>,
    /// Wald statistics and two-sided p-values for the `β` entries.
    pub wald_z: Option<Vec<f64>>,
    pub p_values: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub gamma_zero_mode: bool,
    pub hessian_negative_definite: bool,
    /// Some parameter sits on the edge of the search box.
    pub boundary_active: bool,
}

impl FitResult {
    pub fn n_params(&self) -> usize {
        self.score.len()
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    (m, (ss / (n - 1.0)).sqrt())
}

/// Mean and standard deviation of a standard GEV variate; the variance
/// needs `γ < 1/2`. Near zero the gamma-function form cancels badly and the
/// Gumbel values are used.
fn gev_mean_sd(gamma: f64) -> (f64, f64) {
    if gamma.abs() < 1e-4 {
        return (EULER_GAMMA, std::f64::consts::PI / 6f64.sqrt());
    }
    let g1 = gamma_fn(1.0 - gamma);
    let g2 = gamma_fn(1.0 - 2.0 * gamma);
    ((g1 - 1.0) / gamma, ((g2 - g1 * g1) / (gamma * gamma)).sqrt())
}

const INIT_GRID: [f64; 5] = [-0.3, -0.15, 0.0, 0.1, 0.2];

/// Starting point: least squares for `β`, `α` matched to the residual
/// spread, and the best of a small `γ` grid.
pub fn default_init(data: &RegressionData) -> Result<ThetaParams> {
    let beta = lstsq(data.x(), data.y())?;
    let s: Vec<f64> = (0..data.n())
        .map(|i| (0.5 * (data.y()[i] - data.eta(i, &beta))).sinh())
        .collect();
    let (_, sd_s) = mean_sd(&s);

    let candidate = |gamma: f64| {
        let (ex, sdx) = gev_mean_sd(gamma);
        let alpha = (2.0 * sd_s / sdx).clamp(0.05, 2.0);
        let mut b = beta.clone();
        b[0] -= alpha * ex;
        ThetaParams::new(b, alpha, gamma)
    };

    let mut best: Option<(f64, ThetaParams)> = None;
    for &g in &INIT_GRID {
        let theta = candidate(g);
        if let Ok(l) = loglik_mode(&theta, data, Mode::Free) {
            if l.is_finite() && best.as_ref().map_or(true, |(bl, _)| l > *bl) {
                best = Some((l, theta));
            }
        }
    }
    Ok(best.map_or_else(|| candidate(0.0), |(_, t)| t))
}

/// Column centring and scaling used internally by the optimizer.
struct Standardization {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardization {
    fn new(data: &RegressionData) -> Self {
        let p = data.p();
        let mut mean = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for j in 1..p {
            let (m, s) = mean_sd(&data.column(j));
            mean[j] = m;
            scale[j] = if s > 0.0 { s } else { 1.0 };
        }
        Standardization { mean, scale }
    }

    fn apply(&self, data: &RegressionData) -> Result<RegressionData> {
        let x = data.x();
        let z = Matrix::from_fn(x.rows(), x.cols(), |i, j| {
            if j == 0 {
                1.0
            } else {
                (x[(i, j)] - self.mean[j]) / self.scale[j]
            }
        });
        RegressionData::new(data.y().to_vec(), z, data.labels().to_vec())
    }

    fn to_std(&self, beta: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = beta.iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        b[0] = beta[0] + (1..beta.len()).map(|j| beta[j] * self.mean[j]).sum::<f64>();
        b
    }

    fn from_std(&self, b: &[f64]) -> Vec<f64> {
        let mut beta: Vec<f64> = b.iter().zip(&self.scale).map(|(v, s)| v / s).collect();
        beta[0] = b[0] - (1..b.len()).map(|j| beta[j] * self.mean[j]).sum::<f64>();
        beta
    }

    /// Largest factor by which a standardized gradient entry can grow when
    /// mapped back to the original coordinates.
    fn amplification(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.scale)
            .map(|(m, s)| m.abs() + s)
            .fold(1.0, f64::max)
    }
}


const MAX_PIN_ROUNDS: usize = 6;

/// Maximum likelihood fit with BFGS.
///
/// `init` defaults to [`default_init`]. A failure to converge is reported in
/// the result, not as an error.
pub fn fit_mle(data: &RegressionData, init: Option<&ThetaParams>, options: &FitOptions) -> Result<FitResult> {
    let fit = fit_impl(data, init, options, None)?;
    if options.mode == Mode::Free && options.auto_gumbel && fit.theta_hat.gamma.abs() < options.gumbel_threshold {
        let gumbel = FitOptions {
            mode: Mode::Gumbel,
            ..*options
        };
        let start = ThetaParams {
            gamma: 0.0,
            ..fit.theta_hat.clone()
        };
        return fit_impl(data, Some(&start), &gumbel, None);
    }
    Ok(fit)
}

/// Maximizes `Σ wᵢ ℓᵢ` in the mode fixed by `options`.
pub(crate) fn fit_weighted(
    data: &RegressionData,
    init: Option<&ThetaParams>,
    options: &FitOptions,
    weights: &[f64],
) -> Result<FitResult> {
    if weights.len() != data.n() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidInput("case weights must be finite, one per observation".into()));
    }
    fit_impl(data, init, options, Some(weights))
}

fn fit_impl(
    data: &RegressionData,
    init: Option<&ThetaParams>,
    options: &FitOptions,
    weights: Option<&[f64]>,
) -> Result<FitResult> {
    let mode = options.mode;
    let p = data.p();
    let mut start = match init {
        Some(t) => t.clone(),
        None => default_init(data)?,
    };
    if mode == Mode::Gumbel {
        start.gamma = 0.0;
    }
    if start.beta.len() != p {
        return Err(Error::InvalidInput(format!("init beta has {} entries, expected {p}", start.beta.len())));
    }
    if !options.in_box(start.alpha, start.gamma) {
        return Err(Error::InvalidInput(format!(
            "start alpha={} gamma={} outside the search box",
            start.alpha, start.gamma
        )));
    }
    loglik_weighted(&start, data, mode, weights)?;

    let std = Standardization::new(data);
    let zdata = std.apply(data)?;
    let to_theta = |v: &[f64]| ThetaParams::from_vec(v, p, mode);
    let mut v = ThetaParams {
        beta: std.to_std(&start.beta),
        ..start.clone()
    }
    .to_vec(mode);
    let target = options.optim.gradient_tolerance;
    let dim = v.len();
    // Box bounds that hold at the optimum are pinned and the remaining
    // coordinates re-optimized; `pins` holds (index, value).
    let mut pins: Vec<(usize, f64)> = Vec::new();
    let mut iterations = 0;
    let mut rounds = 0;
    let admissible = |full: &[f64]| {
        loglik_weighted(&to_theta(full), &zdata, mode, weights).is_ok_and(|l| l.is_finite())
    };
    let upper_bound = |i: usize, val: f64| i == p || val == options.gamma_upper;
    let mut theta;
    let mut grad;
    let mut opt_converged;
    loop {
        let free: Vec<usize> = (0..dim).filter(|i| pins.iter().all(|(j, _)| j != i)).collect();
        let expand = |r: &[f64]| {
            let mut full = v.clone();
            for (k, &i) in free.iter().enumerate() {
                full[i] = r[k];
            }
            for &(j, val) in &pins {
                full[j] = val;
            }
            full
        };
        let objective = |r: &[f64]| {
            loglik_weighted(&to_theta(&expand(r)), &zdata, mode, weights).unwrap_or(f64::NEG_INFINITY)
        };
        let gradient = |r: &[f64]| match score_weighted(&to_theta(&expand(r)), &zdata, mode, weights) {
            Ok(g) => free.iter().map(|&i| g[i]).collect(),
            Err(_) => vec![f64::NAN; r.len()],
        };
        let gamma_pinned = pins.iter().any(|(j, _)| *j == p + 1);
        let feasible = |r: &[f64]| {
            let full = expand(r);
            let alpha = full[p];
            alpha > 0.0 && alpha <= options.alpha_upper && (gamma_pinned || options.in_box(alpha, full.get(p + 1).copied().unwrap_or(0.0)))
        };

        let mut inner = options.optim;
        inner.gradient_tolerance = target / std.amplification();
        let mut r: Vec<f64> = free.iter().map(|&i| v[i]).collect();
        loop {
            let m = maximize(objective, gradient, &r, feasible, &inner)?;
            iterations += m.iterations;
            r = m.x;
            opt_converged = m.converged;
            let t = to_theta(&expand(&r));
            theta = ThetaParams {
                beta: std.from_std(&t.beta),
                ..t
            };
            grad = score_weighted(&theta, data, mode, weights)?;
            let free_norm = free.iter().fold(0.0f64, |a, &i| a.max(grad[i].abs()));
            if !opt_converged || free_norm < target || inner.gradient_tolerance < target * 1e-4 {
                break;
            }
            inner.gradient_tolerance /= 10.0;
        }
        v = expand(&r);

        rounds += 1;
        if rounds >= MAX_PIN_ROUNDS {
            break;
        }
        // a pin whose gradient points inward is released one step inside
        let inward = pins.iter().position(|&(j, val)| {
            if upper_bound(j, val) { grad[j] < -target } else { grad[j] > target }
        });
        if let Some(k) = inward {
            let (j, val) = pins[k];
            let span = if j == p { options.alpha_upper } else { options.gamma_upper - options.gamma_lower };
            let mut trial = v.clone();
            trial[j] = if upper_bound(j, val) { val - 1e-4 * span } else { val + 1e-4 * span };
            if !admissible(&trial) {
                break;
            }
            pins.remove(k);
            v = trial;
            continue;
        }
        let mut new_pin = None;
        let stalled = |i: usize, outward: bool| !opt_converged || outward && grad[i].abs() >= target;
        if pins.iter().all(|(j, _)| *j != p)
            && v[p] >= options.alpha_upper * (1.0 - 1e-8)
            && stalled(p, grad[p] > 0.0)
        {
            new_pin = Some((p, options.alpha_upper));
        }
        if mode == Mode::Free && pins.iter().all(|(j, _)| *j != p + 1) {
            let g = v[p + 1];
            if options.gamma_upper - g < 1e-6 && stalled(p + 1, grad[p + 1] > 0.0) {
                new_pin = Some((p + 1, options.gamma_upper));
            } else if g - options.gamma_lower < 1e-6 && stalled(p + 1, grad[p + 1] < 0.0) {
                new_pin = Some((p + 1, options.gamma_lower));
            }
        }
        match new_pin {
            Some((j, val)) if pins.len() + 2 <= dim => {
                let mut trial = v.clone();
                trial[j] = val;
                if !admissible(&trial) {
                    break;
                }
                v = trial;
                pins.push((j, val));
            }
            _ => break,
        }
    }

    // KKT: free coordinates stationary, pinned ones pushing outward.
    let kkt = (0..dim).all(|i| match pins.iter().find(|(j, _)| *j == i) {
        None => grad[i].abs() < target,
        Some(&(_, val)) => {
            if upper_bound(i, val) { grad[i] > -target } else { grad[i] < target }
        }
    });
    let converged = opt_converged && kkt;

    let loglik = loglik_weighted(&theta, data, mode, weights)?;
    let h = hessian_weighted(&theta, data, mode, weights)?;
    let boundary_active = theta.alpha >= options.alpha_upper * (1.0 - 1e-8)
        || (mode == Mode::Free
            && (theta.gamma - options.gamma_lower < 1e-6 || options.gamma_upper - theta.gamma < 1e-6));

    let neg = h.scale(-1.0);
    let (inv, negdef) = match Cholesky::factor(&neg) {
        Ok(c) => (Some(c.inverse()), true),
        Err(_) => (None, false),
    };
    let std_errors = inv.as_ref().map(|m| m.diag().iter().map(|d| d.sqrt()).collect::<Vec<_>>());
    let wald_z = std_errors
        .as_ref()
        .map(|se| (0..p).map(|j| theta.beta[j] / se[j]).collect::<Vec<_>>());
    let p_values = wald_z
        .as_ref()
        .map(|z| z.iter().map(|z| erfc(z.abs() / std::f64::consts::SQRT_2)).collect());

    Ok(FitResult {
        theta_hat: theta,
        loglik,
        mode,
        score: grad,
        hessian: h,
        observed_info_inverse: inv,
        std_errors,
        wald_z,
        p_values,
        converged,
        iterations,
        gamma_zero_mode: mode == Mode::Gumbel,
        hessian_negative_definite: negdef,
        boundary_active,
    })
}

/// `exp(xᵀβ̂)`, the fitted median-type response curve.
pub fn predict_response(fit: &FitResult, x_new: &[f64]) -> Result<f64> {
    let beta = &fit.theta_hat.beta;
    if x_new.len() != beta.len() {
        return Err(Error::InvalidInput(format!(
            "covariate row has {} entries, expected {}",
            x_new.len(),
            beta.len()
        )));
    }
    Ok(x_new.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>().exp())
}

//! Local influence under case-weight, response and covariate perturbations.
//!
//! For a perturbation vector `ω` with null value `ω₀`, `Δ = ∂²ℓ(θ|ω)/∂θ∂ωᵀ`
//! at `(θ̂, ω₀)` and `F = Δᵀ(−L̈)⁻¹Δ`. The normal curvature in direction `l`
//! is `C_l = 2 lᵀFl` and the conformal curvature is `B_l = lᵀFl / ‖F‖_F`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_spd, sym_eigen, Matrix, SymMatrix};
use crate::regression::{
    all_obs_terms, fit_mle, fit_weighted, loglik_mode, loglik_weighted, FitOptions, FitResult, Mode,
    RegressionData, ThetaParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum PerturbationScheme {
    /// `ℓ(θ|ω) = Σ ωᵢ ℓᵢ(θ)`, `ω₀ = 1`.
    CaseWeights,
    /// `yᵢ → yᵢ + ωᵢ s_y`, `ω₀ = 0`.
    Response { s_y: f64 },
    /// `x_{it} → x_{it} + ωᵢ s_x`, `ω₀ = 0`.
    Covariate { t: usize, s_x: f64 },
}

impl PerturbationScheme {
    /// Response perturbation scaled by the sample standard deviation of `y`.
    pub fn response_default(data: &RegressionData) -> Self {
        PerturbationScheme::Response { s_y: sample_sd(data.y()) }
    }

    /// Covariate perturbation of column `t` scaled by its standard deviation.
    pub fn covariate_default(data: &RegressionData, t: usize) -> Self {
        let sd = if t < data.p() { sample_sd(&data.column(t)) } else { f64::NAN };
        PerturbationScheme::Covariate { t, s_x: sd }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PerturbationScheme::CaseWeights => "case-weights",
            PerturbationScheme::Response { .. } => "response",
            PerturbationScheme::Covariate { .. } => "covariate",
        }
    }

    pub fn null_perturbation(&self, n: usize) -> Vec<f64> {
        match self {
            PerturbationScheme::CaseWeights => vec![1.0; n],
            _ => vec![0.0; n],
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        match *self {
            PerturbationScheme::CaseWeights => Ok(()),
            PerturbationScheme::Response { s_y } if s_y > 0.0 && s_y.is_finite() => Ok(()),
            PerturbationScheme::Response { s_y } => Err(Error::InvalidInput(format!("s_y must be positive, got {s_y}"))),
            PerturbationScheme::Covariate { t, .. } if t == 0 || t >= p => Err(Error::InvalidInput(format!(
                "covariate perturbation needs a non-intercept column, got {t}"
            ))),
            PerturbationScheme::Covariate { s_x, .. } if s_x > 0.0 && s_x.is_finite() => Ok(()),
            PerturbationScheme::Covariate { s_x, .. } => {
                Err(Error::InvalidInput(format!("s_x must be positive, got {s_x}")))
            }
        }
    }
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `Δ` with one row per parameter and one column per observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaMatrix {
    pub entries: Matrix,
    pub scheme: PerturbationScheme,
    pub omega0: Vec<f64>,
    pub mode: Mode,
}

fn require_maximum(fit: &FitResult) -> Result<()> {
    if !fit.converged {
        return Err(Error::NotConverged("influence analysis needs a converged fit".into()));
    }
    if !fit.hessian_negative_definite {
        return Err(Error::NotPositiveDefinite { pivot: 0 });
    }
    Ok(())
}

pub fn delta_matrix(scheme: PerturbationScheme, fit: &FitResult, data: &RegressionData) -> Result<DeltaMatrix> {
    require_maximum(fit)?;
    delta_at(scheme, &fit.theta_hat, fit.mode, data)
}

/// `Δ` at an arbitrary feasible `θ`, without the maximum check.
pub fn delta_at(scheme: PerturbationScheme, theta: &ThetaParams, mode: Mode, data: &RegressionData) -> Result<DeltaMatrix> {
    let (n, p) = (data.n(), data.p());
    scheme.validate(p)?;
    let terms = all_obs_terms(theta, data, mode)?;
    let free = mode == Mode::Free;
    let mut d = Matrix::zeros(mode.dim(p), n);
    for (j, t) in terms.iter().enumerate() {
        let x = data.row(j);
        // column j = (β block, α, γ)
        let (beta_coef, extra, a, g) = match scheme {
            PerturbationScheme::CaseWeights => (-t.r, None, t.a, t.g),
            PerturbationScheme::Response { s_y } => (-s_y * t.rr, None, s_y * t.ra, s_y * t.rg),
            PerturbationScheme::Covariate { t: col, s_x } => {
                let bt = theta.beta[col];
                (s_x * bt * t.rr, Some((col, -s_x * t.r)), -bt * s_x * t.ra, -bt * s_x * t.rg)
            }
        };
        for k in 0..p {
            d[(k, j)] = beta_coef * x[k];
        }
        if let Some((col, v)) = extra {
            d[(col, j)] += v;
        }
        d[(p, j)] = a;
        if free {
            d[(p + 1, j)] = g;
        }
    }
    Ok(DeltaMatrix {
        entries: d,
        scheme,
        omega0: scheme.null_perturbation(n),
        mode,
    })
}

/// `ℓ(θ|ω)` for the given scheme.
pub fn perturbed_loglik(
    theta: &ThetaParams,
    data: &RegressionData,
    mode: Mode,
    scheme: PerturbationScheme,
    omega: &[f64],
) -> Result<f64> {
    if omega.len() != data.n() {
        return Err(Error::InvalidInput(format!("omega has {} entries, n = {}", omega.len(), data.n())));
    }
    match scheme {
        PerturbationScheme::CaseWeights => loglik_weighted(theta, data, mode, Some(omega)),
        _ => loglik_mode(theta, &perturbed_data(data, scheme, omega)?, mode),
    }
}

fn perturbed_data(data: &RegressionData, scheme: PerturbationScheme, omega: &[f64]) -> Result<RegressionData> {
    match scheme {
        PerturbationScheme::CaseWeights => Ok(data.clone()),
        PerturbationScheme::Response { s_y } => {
            data.with_response(data.y().iter().zip(omega).map(|(y, w)| y + w * s_y).collect())
        }
        PerturbationScheme::Covariate { t, s_x } => {
            data.with_column_shift(t, &omega.iter().map(|w| w * s_x).collect::<Vec<_>>())
        }
    }
}

/// `F = Δᵀ(−L̈)⁻¹Δ`, an `n × n` positive semidefinite matrix at a maximum.
pub fn curvature_matrix(delta: &DeltaMatrix, hessian: &SymMatrix) -> Result<SymMatrix> {
    let d = &delta.entries;
    if hessian.order() != d.rows() {
        return Err(Error::InvalidInput(format!(
            "hessian order {} does not match delta rows {}",
            hessian.order(),
            d.rows()
        )));
    }
    let solved = solve_spd(&hessian.scale(-1.0), d)?;
    let f = d.transpose().matmul(&solved);
    let n = f.rows();
    SymMatrix::from_upper(n, |i, j| 0.5 * (f[(i, j)] + f[(j, i)]))
}

fn check_unit(l: &[f64], n: usize) -> Result<()> {
    if l.len() != n {
        return Err(Error::InvalidInput(format!("direction has {} entries, n = {n}", l.len())));
    }
    let norm = l.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("direction must be a unit vector, norm is {norm}")));
    }
    Ok(())
}

/// Normal curvature `C_l = 2 lᵀFl`.
pub fn curvature_normal(delta: &DeltaMatrix, hessian: &SymMatrix, l: &[f64]) -> Result<f64> {
    check_unit(l, delta.entries.cols())?;
    Ok(2.0 * curvature_matrix(delta, hessian)?.quad_form(l))
}

fn frobenius(f: &SymMatrix) -> f64 {
    f.as_matrix().as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Conformal normal curvature `B_l = lᵀFl / √tr(F²)`, in `[0, 1]` at a
/// maximum.
pub fn curvature_conformal(delta: &DeltaMatrix, hessian: &SymMatrix, l: &[f64]) -> Result<f64> {
    check_unit(l, delta.entries.cols())?;
    let f = curvature_matrix(delta, hessian)?;
    let norm = frobenius(&f);
    if !(norm > 0.0) {
        return Err(Error::Domain("curvature matrix is zero".into()));
    }
    Ok(f.quad_form(l) / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceReport {
    pub scheme: PerturbationScheme,
    /// Eigenvalues of `F`, descending.
    pub eigenvalues: Vec<f64>,
    /// `λᵢ / √Σλ²`, descending.
    pub normalized_eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
    pub q: usize,
    /// Whether `q` came from the default rule rather than the caller.
    pub q_default: bool,
    /// Number of directions with `λ* ≥ q/√n`.
    pub k: usize,
    /// `B_j(q)` for each observation.
    pub contributions: Vec<f64>,
    /// `b(q) = Σ_{i≤k} λᵢ* / n`.
    pub benchmark: f64,
    /// 0-based indices with `B_j(q) ≥ b(q)`.
    pub flagged: Vec<usize>,
}

/// Largest `q` with at least one q-influential direction, kept in
/// `[1, √n)`.
pub fn default_q(lambda1_star: f64, n: usize) -> usize {
    let root = (n as f64).sqrt();
    let max_q = (root.ceil() as usize).saturating_sub(1).max(1);
    ((lambda1_star * root).floor() as usize).clamp(1, max_q)
}

pub fn influence_report(delta: &DeltaMatrix, hessian: &SymMatrix, q: Option<usize>) -> Result<InfluenceReport> {
    let f = curvature_matrix(delta, hessian)?;
    let n = f.order();
    let eig = sym_eigen(&f);
    let norm = eig.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Domain("curvature matrix is zero".into()));
    }
    // F is PSD, so ordering by |λ| is ordering by λ up to roundoff.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.values[i]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |r, c| eig.vectors[(r, order[c])]);
    let lstar: Vec<f64> = eigenvalues.iter().map(|v| v / norm).collect();

    let root = (n as f64).sqrt();
    let (q, q_default) = match q {
        Some(q) => {
            if q < 1 || (q as f64) >= root {
                return Err(Error::InvalidInput(format!("q must satisfy 1 <= q < sqrt(n) = {root:.4}, got {q}")));
            }
            (q, false)
        }
        None => (default_q(lstar[0], n), true),
    };
    let cut = q as f64 / root;
    let k = lstar.iter().take_while(|&&v| v >= cut).count();
    let contributions: Vec<f64> = (0..n)
        .map(|j| (0..k).map(|i| lstar[i] * eigenvectors[(j, i)].powi(2)).sum())
        .collect();
    let benchmark = lstar[..k].iter().sum::<f64>() / n as f64;
    let flagged = if k == 0 {
        Vec::new()
    } else {
        (0..n).filter(|&j| contributions[j] >= benchmark).collect()
    };
    Ok(InfluenceReport {
        scheme: delta.scheme,
        eigenvalues,
        normalized_eigenvalues: lstar,
        eigenvectors,
        q,
        q_default,
        k,
        contributions,
        benchmark,
        flagged,
    })
}

fn refit_options(fit: &FitResult, options: &FitOptions) -> FitOptions {
    FitOptions {
        mode: fit.mode,
        auto_gumbel: false,
        ..*options
    }
}

/// `θ̂_ω`, the maximizer of the perturbed likelihood, started from `θ̂`.
pub fn perturbed_fit(
    fit: &FitResult,
    data: &RegressionData,
    scheme: PerturbationScheme,
    omega: &[f64],
    options: &FitOptions,
) -> Result<FitResult> {
    scheme.validate(data.p())?;
    if omega.len() != data.n() {
        return Err(Error::InvalidInput(format!("omega has {} entries, n = {}", omega.len(), data.n())));
    }
    let opts = refit_options(fit, options);
    let refit = match scheme {
        PerturbationScheme::CaseWeights => fit_weighted(data, Some(&fit.theta_hat), &opts, omega),
        _ => fit_mle(&perturbed_data(data, scheme, omega)?, Some(&fit.theta_hat), &opts),
    };
    match refit {
        Ok(r) if r.converged => Ok(r),
        Ok(_) => Err(Error::NotConverged(format!("perturbed refit at omega = {omega:?}"))),
        Err(e) => Err(Error::NotConverged(format!("perturbed refit at omega = {omega:?}: {e}"))),
    }
}

/// `g(ω) = 2[ℓ(θ̂) − ℓ(θ̂_ω)]`, both terms under the unperturbed likelihood.
pub fn likelihood_displacement(
    fit: &FitResult,
    data: &RegressionData,
    omega: &[f64],
    scheme: PerturbationScheme,
    options: &FitOptions,
) -> Result<f64> {
    let refit = perturbed_fit(fit, data, scheme, omega, options)?;
    let base = loglik_mode(&fit.theta_hat, data, fit.mode)?;
    let moved = loglik_mode(&refit.theta_hat, data, fit.mode)?;
    Ok(2.0 * (base - moved))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeletionImpact {
    /// 0-based index of the removed observation.
    pub index: usize,
    pub refit: Option<FitResult>,
    /// `100 (θ̂_(i) − θ̂) / |θ̂|` over `(β, α, γ)`; absent when the refit
    /// failed.
    pub rate_of_change: Option<Vec<f64>>,
    pub diverged: bool,
    pub message: Option<String>,
}

fn theta_full(t: &ThetaParams) -> Vec<f64> {
    t.to_vec(Mode::Free)
}

pub fn deletion_impact(data: &RegressionData, fit: &FitResult, index: usize, options: &FitOptions) -> Result<DeletionImpact> {
    if data.n() - 1 <= data.p() {
        return Err(Error::InvalidInput("too few observations to delete one".into()));
    }
    let reduced = data.without_row(index)?;
    let opts = refit_options(fit, options);
    // start at θ̂; fall back to the default start if that does not converge
    let (refit, message) = match fit_mle(&reduced, Some(&fit.theta_hat), &opts) {
        Ok(r) if r.converged => (Some(r), None),
        first => match (fit_mle(&reduced, None, &opts), first) {
            (Ok(r), _) if r.converged => (Some(r), None),
            (_, Ok(r)) => (Some(r), None),
            (Ok(r), Err(_)) => (Some(r), None),
            (Err(e), Err(_)) => (None, Some(e.to_string())),
        },
    };
    let converged = refit.as_ref().is_some_and(|r| r.converged);
    let rate_of_change = refit.as_ref().filter(|_| converged).map(|r| {
        theta_full(&r.theta_hat)
            .iter()
            .zip(theta_full(&fit.theta_hat))
            .map(|(new, old)| (new - old) / old.abs() * 100.0)
            .collect()
    });
    Ok(DeletionImpact {
        index,
        refit,
        rate_of_change,
        diverged: !converged,
        message,
    })
}

/// [`deletion_impact`] for several indices, refitting in parallel.
pub fn deletion_impacts(
    data: &RegressionData,
    fit: &FitResult,
    indices: &[usize],
    options: &FitOptions,
) -> Result<Vec<DeletionImpact>> {
    indices
        .par_iter()
        .map(|&i| deletion_impact(data, fit, i, options))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_q_rule() {
        assert_eq!(default_q(0.69678, 124), 7);
        assert_eq!(default_q(0.01, 124), 1);
        assert_eq!(default_q(1.0, 124), 11);
        assert_eq!(default_q(1.0, 121), 10);
        assert_eq!(default_q(1.0, 3), 1);
    }

    #[test]
    fn equal_eigenvalues_give_inverse_root_n() {
        let n = 9;
        let delta = DeltaMatrix {
            entries: Matrix::identity(n),
            scheme: PerturbationScheme::CaseWeights,
            omega0: vec![1.0; n],
            mode: Mode::Free,
        };
        let h = SymMatrix::new(Matrix::identity(n).scale(-2.0)).unwrap();
        let mut l = vec![0.0; n];
        l[4] = 1.0;
        let b = curvature_conformal(&delta, &h, &l).unwrap();
        assert!((b - 1.0 / 3.0).abs() < 1e-14);
        assert!((curvature_normal(&delta, &h, &l).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let delta = DeltaMatrix {
            entries: Matrix::identity(2),
            scheme: PerturbationScheme::CaseWeights,
            omega0: vec![1.0; 2],
            mode: Mode::Free,
        };
        let h = SymMatrix::new(Matrix::identity(2).scale(-1.0)).unwrap();
        assert!(curvature_normal(&delta, &h, &[1.0, 1.0]).is_err());
        let pos = SymMatrix::new(Matrix::identity(2)).unwrap();
        assert!(matches!(
            curvature_normal(&delta, &pos, &[1.0, 0.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(PerturbationScheme::Covariate { t: 0, s_x: 1.0 }.validate(2).is_err());
    }
}

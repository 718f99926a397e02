mod common;

use common::{assert_close, simulate};
use evbs::distributions::{logevbs_ln_pdf, LogEvbsParams};
use evbs::fd::{fd_gradient, fd_jacobian};
use evbs::regression::{hessian, loglik, loglik_mode, score, xi_terms};
use evbs::{Mode, RegressionData, RngState, ThetaParams};

/// Feasible `(θ, data)` pairs: data drawn at a truth, `θ` a jittered copy.
fn draws() -> Vec<(ThetaParams, RegressionData, Mode)> {
    let gammas = [1e-3, -1e-3, 0.2, -0.2, 0.7, -0.7, 0.05, -0.45, 0.0, 0.0];
    let mut rng = RngState::new(2024);
    let mut out = Vec::new();
    for i in 0..50 {
        let g = gammas[i % gammas.len()];
        let mode = if g == 0.0 { Mode::Gumbel } else { Mode::Free };
        let truth = ThetaParams::new(
            vec![rng.uniform(-1.0, 1.0), rng.uniform(-2.0, 2.0)],
            rng.uniform(0.2, 1.8),
            g,
        );
        let data = simulate(&truth, 15 + i, 0.0, 3.0, 100 + i as u64);
        loop {
            let theta = ThetaParams::new(
                truth.beta.iter().map(|b| b + rng.uniform(-0.05, 0.05)).collect(),
                truth.alpha * rng.uniform(0.9, 1.1),
                if g == 0.0 { 0.0 } else { g + rng.uniform(-0.1, 0.1) * g.abs() },
            );
            if xi_terms(&theta, &data).is_ok() {
                out.push((theta, data, mode));
                break;
            }
        }
    }
    out
}

fn to_theta(v: &[f64], mode: Mode) -> ThetaParams {
    ThetaParams::from_vec(v, 2, mode)
}

#[test]
fn score_matches_finite_differences() {
    for (k, (theta, data, mode)) in draws().into_iter().enumerate() {
        let v = theta.to_vec(mode);
        let fd = fd_gradient(|v| loglik_mode(&to_theta(v, mode), &data, mode).ok(), &v, 1e-6);
        assert!(fd.one_sided.is_empty(), "draw {k}: stencil left the support");
        let an = score(&theta, &data, mode).unwrap();
        let scale = an.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        assert_close(&an, &fd.value, 1e-6, scale, &format!("score draw {k}"));
    }
}

#[test]
fn hessian_matches_finite_differences() {
    for (k, (theta, data, mode)) in draws().into_iter().enumerate() {
        let v = theta.to_vec(mode);
        let fd = fd_jacobian(|v| score(&to_theta(v, mode), &data, mode).ok(), &v, 1e-5);
        assert!(fd.one_sided.is_empty());
        let h = hessian(&theta, &data, mode).unwrap();
        let scale = h.as_matrix().max_abs().max(1.0);
        for r in 0..v.len() {
            assert_close(h.as_matrix().row(r), &fd.value[r], 1e-5, scale, &format!("hessian draw {k} row {r}"));
        }
    }
}

#[test]
fn loglik_is_sum_of_log_densities() {
    for (theta, data, mode) in draws() {
        let gamma = if mode == Mode::Gumbel { 0.0 } else { theta.gamma };
        let direct: f64 = (0..data.n())
            .map(|i| {
                let p = LogEvbsParams::new(theta.alpha, data.eta(i, &theta.beta), gamma).unwrap();
                logevbs_ln_pdf(data.y()[i], &p)
            })
            .sum();
        let l = loglik_mode(&theta, &data, mode).unwrap();
        assert!((l - direct).abs() <= 1e-10 * l.abs().max(1.0), "{l} vs {direct}");
    }
}

#[test]
fn gumbel_branch_is_the_gamma_limit() {
    for (theta, data, _) in draws() {
        let g0 = ThetaParams { gamma: 0.0, ..theta.clone() };
        let tiny = ThetaParams { gamma: 1e-8, ..theta.clone() };
        if xi_terms(&g0, &data).is_err() || xi_terms(&tiny, &data).is_err() {
            continue;
        }
        let a = loglik_mode(&g0, &data, Mode::Gumbel).unwrap();
        let b = loglik(&tiny, &data).unwrap();
        assert!((a - b).abs() < 1e-6 * a.abs());
    }
}

#[test]
fn hyperbolic_identity() {
    for (theta, data, _) in draws() {
        let (x1, x2) = xi_terms(&theta, &data).unwrap();
        let c = 4.0 / (theta.alpha * theta.alpha);
        for (a, b) in x1.iter().zip(&x2) {
            assert!(*a > 0.0);
            assert!((a * a - b * b - c).abs() <= 1e-12 * (a * a).max(1.0));
        }
    }
}

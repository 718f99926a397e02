mod common;

use common::simulate;
use evbs::linalg::Cholesky;
use evbs::regression::{default_init, fit_mle, hessian};
use evbs::{FitOptions, Mode, RegressionData, ThetaParams};

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn large_sample_recovers_truth() {
    let truth = ThetaParams::new(vec![0.5, 0.5], 0.5, 0.2);
    let data = simulate(&truth, 10_000, 0.0, 1.0, 11);
    let fit = fit_mle(&data, None, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let se = fit.std_errors.as_ref().unwrap();
    let est = fit.theta_hat.to_vec(Mode::Free);
    for (i, t) in truth.to_vec(Mode::Free).iter().enumerate() {
        assert!((est[i] - t).abs() < 3.0 * se[i], "param {i}: {} vs {t} (se {})", est[i], se[i]);
    }
}

#[test]
fn gumbel_data_gives_small_gamma() {
    let truth = ThetaParams::new(vec![0.5, 0.5], 0.5, 0.0);
    let data = simulate(&truth, 10_000, 0.0, 1.0, 12);
    let fit = fit_mle(&data, None, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert!(fit.theta_hat.gamma.abs() < 0.02, "gamma = {}", fit.theta_hat.gamma);
}

#[test]
fn converged_fit_is_a_proper_maximum() {
    for (seed, g) in [(1u64, -0.3), (2, 0.0), (3, 0.15), (4, -0.1)] {
        let truth = ThetaParams::new(vec![1.0, -0.5], 0.8, g);
        let data = simulate(&truth, 150, 0.0, 2.0, seed);
        let opts = FitOptions::default();
        let fit = fit_mle(&data, None, &opts).unwrap();
        assert!(fit.converged, "seed {seed}");
        assert!(inf_norm(&fit.score) < opts.optim.gradient_tolerance);
        let h = hessian(&fit.theta_hat, &data, fit.mode).unwrap();
        assert!(Cholesky::factor(&h.scale(-1.0)).is_ok());
        assert!(fit.hessian_negative_definite);
        let se = fit.std_errors.unwrap();
        let inv = fit.observed_info_inverse.unwrap();
        for (i, s) in se.iter().enumerate() {
            assert!((s * s - inv[(i, i)]).abs() < 1e-14 * inv[(i, i)]);
        }
        for p in fit.p_values.unwrap() {
            assert!((0.0..=1.0).contains(&p));
        }
    }
}

#[test]
fn shifting_a_covariate_only_moves_the_intercept() {
    let truth = ThetaParams::new(vec![2.0, 0.7], 0.6, -0.15);
    let data = simulate(&truth, 200, 0.0, 3.0, 77);
    let opts = FitOptions::default();
    let fit = fit_mle(&data, None, &opts).unwrap();
    let c = 1000.0;
    let shifted = data.with_column_shift(1, &vec![c; data.n()]).unwrap();
    let fit2 = fit_mle(&shifted, None, &opts).unwrap();
    assert!(fit.converged && fit2.converged);
    let b = &fit.theta_hat.beta;
    let b2 = &fit2.theta_hat.beta;
    assert!((b2[0] - (b[0] - b[1] * c)).abs() < 1e-6 * (1.0 + b2[0].abs()));
    assert!((b2[1] - b[1]).abs() < 1e-6);
    assert!((fit2.theta_hat.alpha - fit.theta_hat.alpha).abs() < 1e-6);
    assert!((fit2.theta_hat.gamma - fit.theta_hat.gamma).abs() < 1e-6);
    assert!((fit2.loglik - fit.loglik).abs() < 1e-6);
}

#[test]
fn gumbel_mode_has_fewer_parameters() {
    let truth = ThetaParams::new(vec![0.0, 1.0], 0.4, 0.0);
    let data = simulate(&truth, 300, 0.0, 1.0, 5);
    let opts = FitOptions {
        mode: Mode::Gumbel,
        ..FitOptions::default()
    };
    let fit = fit_mle(&data, None, &opts).unwrap();
    assert!(fit.gamma_zero_mode);
    assert_eq!(fit.score.len(), 3);
    assert_eq!(fit.hessian.order(), 3);
    assert_eq!(fit.theta_hat.gamma, 0.0);
}

#[test]
fn init_is_finite_and_feasible() {
    let x: Vec<f64> = (0..124).map(|i| 1000.0 + (i as f64 * 0.37).sin() * 8.0).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, xi)| 25.0 - 0.022 * xi + 0.15 * ((i * 7 % 13) as f64 / 13.0 - 0.5)).collect();
    let data = RegressionData::from_columns(y, &[("pressure", &x)]).unwrap();
    let t = default_init(&data).unwrap();
    assert!(t.alpha > 0.0 && t.alpha <= 2.0);
    assert!(evbs::regression::loglik(&t, &data).unwrap().is_finite());
}

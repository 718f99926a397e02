mod common;

use common::simulate;
use evbs::distributions::{logevbs_quantile, LogEvbsParams};
use evbs::regression::fit_mle;
use evbs::residuals::{envelope, ks_normal_test, normal_scores, quantile_residuals, shapiro_wilk, ResidualSet};
use evbs::{FitOptions, RegressionData, ThetaParams};

/// Deterministic skewed sample: `−ln({iφ})`.
fn golden_exponential(n: usize) -> ResidualSet {
    let phi = 0.618_033_988_749_894_9;
    ResidualSet::from_values((1..=n).map(|i| -((i as f64 * phi) % 1.0).ln()).collect()).unwrap()
}

// Reference values come from an independent Shapiro-Wilk implementation
// that works in single precision, hence the 1e-5 tolerance.
#[test]
fn shapiro_wilk_reference_values() {
    let cases = [
        (10, 0.9237838895213287, 0.38959726068258715),
        (30, 0.8692221437621727, 0.0016098466186800437),
        (124, 0.8293271863912385, 1.1227675900241438e-10),
    ];
    for (n, w, p) in cases {
        let t = shapiro_wilk(&golden_exponential(n)).unwrap();
        assert!((t.statistic - w).abs() < 1e-5, "n={n}: W {} vs {w}", t.statistic);
        assert!((t.p_value - p).abs() < 1e-5 * p.max(1e-3), "n={n}: p {} vs {p}", t.p_value);
    }
}

#[test]
fn shapiro_wilk_on_normal_scores() {
    let r = ResidualSet::from_values(normal_scores(124)).unwrap();
    let t = shapiro_wilk(&r).unwrap();
    assert!(t.statistic > 0.99);
    assert!((t.statistic - 0.9992964502912386).abs() < 1e-5);
}

#[test]
fn shapiro_wilk_rejects_exponential() {
    assert!(shapiro_wilk(&golden_exponential(124)).unwrap().p_value < 0.01);
    assert!(shapiro_wilk(&golden_exponential(7)).is_err());
}

#[test]
fn ks_reference_values() {
    let cases = [
        (10, 0.5228632650353722, 0.008441689834091451),
        (30, 0.5085830019460283, 3.639486642462839e-07),
        (124, 0.5032568697554539, 1.0540189259811631e-27),
    ];
    for (n, d, p) in cases {
        let t = ks_normal_test(&golden_exponential(n)).unwrap();
        assert!((t.statistic - d).abs() < 1e-12);
        assert!((t.p_value - p).abs() < 1e-9 * p);
    }
}

#[test]
fn ks_near_perfect_and_uniform_inputs() {
    let n = 10_000;
    let r = ResidualSet::from_values((1..=n).map(|i| evbs::residuals::normal_quantile(i as f64 / (n as f64 + 1.0))).collect())
        .unwrap();
    assert!(ks_normal_test(&r).unwrap().statistic < 0.02);

    let u = ResidualSet::from_values((1..=500).map(|i| i as f64 / 501.0).collect()).unwrap();
    assert!(ks_normal_test(&u).unwrap().p_value < 1e-6);
}

#[test]
fn residual_at_model_median_is_zero() {
    let truth = ThetaParams::new(vec![0.2, 0.8], 0.5, -0.1);
    let data = simulate(&truth, 80, 0.0, 1.0, 8);
    let fit = fit_mle(&data, None, &FitOptions::default()).unwrap();
    let t = &fit.theta_hat;
    let x = data.column(1);
    let y: Vec<f64> = (0..data.n())
        .map(|i| logevbs_quantile(0.5, &LogEvbsParams::new(t.alpha, data.eta(i, &t.beta), t.gamma).unwrap()))
        .collect();
    let at_median = RegressionData::from_columns(y, &[("x", &x)]).unwrap();
    let r = quantile_residuals(&fit, &at_median).unwrap();
    assert!(r.r.iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn residuals_are_order_invariant() {
    let truth = ThetaParams::new(vec![0.2, 0.8], 0.5, -0.1);
    let data = simulate(&truth, 80, 0.0, 1.0, 8);
    let fit = fit_mle(&data, None, &FitOptions::default()).unwrap();
    let r = quantile_residuals(&fit, &data).unwrap();
    let rev: Vec<usize> = (0..data.n()).rev().collect();
    let r2 = quantile_residuals(&fit, &data.select_rows(&rev).unwrap()).unwrap();
    for (i, &j) in rev.iter().enumerate() {
        assert_eq!(r2.r[i], r.r[j]);
    }
}

#[test]
fn pit_on_large_simulated_sample() {
    let truth = ThetaParams::new(vec![0.5, 0.5], 0.5, 0.1);
    let data = simulate(&truth, 10_000, 0.0, 1.0, 21);
    let fit = fit_mle(&data, None, &FitOptions::default()).unwrap();
    let r = quantile_residuals(&fit, &data).unwrap();
    assert!(ks_normal_test(&r).unwrap().statistic < 0.02);
}

#[test]
fn envelope_degenerate_and_nested() {
    let truth = ThetaParams::new(vec![0.5, 0.5], 0.5, 0.0);
    let data = simulate(&truth, 40, 0.0, 1.0, 4);
    let opts = FitOptions::default();
    let fit = fit_mle(&data, None, &opts).unwrap();
    let e19 = envelope(&fit, &data, 19, 0.95, 7, &opts).unwrap();
    assert_eq!(e19.n_failed, 0);
    assert_eq!(e19.observed.len(), 40);
    assert!(envelope(&fit, &data, 18, 0.95, 7, &opts).is_err());

    let e80 = envelope(&fit, &data, 100, 0.8, 7, &opts).unwrap();
    let e95 = envelope(&fit, &data, 100, 0.95, 7, &opts).unwrap();
    for i in 0..40 {
        assert!(e19.lower[i] <= e19.median[i] && e19.median[i] <= e19.upper[i]);
        assert!(e95.lower[i] <= e80.lower[i] && e80.upper[i] <= e95.upper[i]);
    }
    // same seed, same bands
    assert_eq!(envelope(&fit, &data, 19, 0.95, 7, &opts).unwrap(), e19);
}

#[test]
fn envelope_coverage_under_the_model() {
    let opts = FitOptions::default();
    let mut total = 0.0;
    let trials = 50;
    for t in 0..trials {
        let truth = ThetaParams::new(vec![0.5, 0.5], 0.5, 0.1);
        let data = simulate(&truth, 40, 0.0, 1.0, 1000 + t);
        let fit = fit_mle(&data, None, &opts).unwrap();
        // type-1 bands from 199 draws cover a fresh draw with probability 191/200
        let e = envelope(&fit, &data, 199, 0.95, t, &opts).unwrap();
        total += e.coverage();
    }
    let avg = total / trials as f64;
    println!("average coverage {avg}");
    assert!(avg >= 0.95, "average pointwise coverage {avg}");
}

#![allow(dead_code)]

use evbs::distributions::{logevbs_sample, LogEvbsParams};
use evbs::{RegressionData, RngState, ThetaParams};

/// `y = β₀ + β₁x + ε`, `x ~ U(lo, hi)`, `ε ~ log-EVBS(α, 0, γ)`.
pub fn simulate(theta: &ThetaParams, n: usize, lo: f64, hi: f64, seed: u64) -> RegressionData {
    let mut rng = RngState::new(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.uniform(lo, hi)).collect();
    let eps = logevbs_sample(n, &LogEvbsParams::new(theta.alpha, 0.0, theta.gamma).unwrap(), &mut rng);
    let y = x
        .iter()
        .zip(&eps)
        .map(|(xi, e)| theta.beta[0] + theta.beta[1] * xi + e)
        .collect();
    RegressionData::from_columns(y, &[("x", &x)]).unwrap()
}

/// Entrywise check `|a − b| ≤ tol · max(|a|, |b|, floor)`.
pub fn assert_close(a: &[f64], b: &[f64], tol: f64, floor: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let scale = x.abs().max(y.abs()).max(floor);
        assert!(
            (x - y).abs() <= tol * scale,
            "{what}[{i}]: {x} vs {y} (rel {:.3e})",
            (x - y).abs() / scale
        );
    }
}

/// Adaptive Simpson quadrature on a finite interval.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Kolmogorov distance between sorted data and a cdf.
pub fn ks_distance(mut v: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

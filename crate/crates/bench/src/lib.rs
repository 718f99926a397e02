//! Shared fixtures for the benchmarks in `benches/`.

use evbs::distributions::{logevbs_sample, LogEvbsParams};
use evbs::{RegressionData, RngState, ThetaParams};

/// Parameters close to a monthly wind-gust fit on pressure.
pub fn reference_theta() -> ThetaParams {
    ThetaParams::new(vec![25.5, -0.0227], 0.19, -0.15)
}

/// `n` responses from [`reference_theta`] with pressures uniform on
/// `[1005, 1025]`.
pub fn gust_like(n: usize, seed: u64) -> RegressionData {
    let theta = reference_theta();
    let mut rng = RngState::new(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.uniform(1005.0, 1025.0)).collect();
    let err = logevbs_sample(n, &LogEvbsParams::new(theta.alpha, 0.0, theta.gamma).unwrap(), &mut rng);
    let y = x.iter().zip(&err).map(|(xi, e)| theta.beta[0] + theta.beta[1] * xi + e).collect();
    RegressionData::from_columns(y, &[("pressure_mb", &x)]).unwrap()
}

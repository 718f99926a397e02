//! Extreme-value Birnbaum-Saunders regression.
//!
//! Maximum likelihood fitting of the log-linear EVBS model with analytic
//! derivatives, local influence diagnostics based on conformal normal
//! curvature, quantile-residual checks and a Monte Carlo harness.

pub mod dataset;
pub mod distributions;
pub mod error;
pub mod fd;
pub mod influence;
mod kernel;
pub mod linalg;
pub mod optim;
pub mod regression;
pub mod residuals;
pub mod rng;
pub mod simulation;

pub use error::{Error, LoadIssue, Result};
pub use linalg::{Matrix, SymMatrix};
pub use optim::OptimOptions;
pub use regression::{fit_mle, FitOptions, FitResult, Mode, RegressionData, ThetaParams};
pub use rng::RngState;

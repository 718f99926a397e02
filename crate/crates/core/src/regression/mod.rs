//! EVBS log-linear regression: `yᵢ = xᵢᵀβ + εᵢ` with
//! `εᵢ ~ log-EVBS(α, 0, γ)`.

mod fit;
mod model;

pub use fit::{default_init, fit_mle, predict_response, FitOptions, FitResult};
pub use model::{hessian, loglik, loglik_mode, score, xi_terms, Mode, RegressionData, ThetaParams};

pub(crate) use fit::fit_weighted;
pub(crate) use model::{all_obs_terms, loglik_weighted};

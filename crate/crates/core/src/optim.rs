//! BFGS maximization with a backtracking Armijo line search.
//!
//! The feasible set is open and given as a predicate; trial points outside it
//! are treated like a failed sufficient-decrease test and the step shrinks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the gradient ∞-norm.
    pub gradient_tolerance: f64,
    /// Convergence threshold on the step ∞-norm, relative to `1 + |x|`.
    pub step_tolerance: f64,
    /// Step contraction ratio in (0, 1).
    pub contraction: f64,
    /// Armijo sufficient-increase constant in (0, 1).
    pub sufficient_decrease: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            step_tolerance: 1e-12,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.step_tolerance > 0.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.sufficient_decrease > 0.0
            && self.sufficient_decrease < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid optimizer options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

const MAX_BACKTRACKS: usize = 60;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `objective` starting from `start`.
///
/// `objective` and `gradient` are only called at points accepted by
/// `feasible`. Returns the best point found; `converged` is true only when
/// the gradient ∞-norm there is below `gradient_tolerance`.
pub fn maximize<F, G, P>(
    objective: F,
    gradient: G,
    start: &[f64],
    feasible: P,
    options: &OptimOptions,
) -> Result<Maximum>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> bool,
{
    options.validate()?;
    let n = start.len();
    if !feasible(start) {
        return Err(Error::Domain("start point is infeasible".into()));
    }
    let mut x = start.to_vec();
    // Internally minimize f = -objective.
    let mut f = -objective(&x);
    if !f.is_finite() {
        return Err(Error::NonFinite(format!("objective at start {x:?}")));
    }
    let mut g: Vec<f64> = gradient(&x).into_iter().map(|v| -v).collect();
    if g.len() != n || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("gradient at start {x:?}")));
    }

    // Inverse Hessian approximation, row-major.
    let identity = |scale: f64| {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = scale;
        }
        h
    };
    let mut h = identity(1.0);
    let mut fresh = true;
    let mut reset_used = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        if inf_norm(&g) < options.gradient_tolerance {
            break;
        }
        iterations += 1;

        let mut d: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>())
            .collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity(1.0);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        if fresh {
            // Keep the first trial step of unit length in the ∞-norm.
            let dn = inf_norm(&d);
            if dn > 1.0 {
                for v in &mut d {
                    *v /= dn;
                }
                slope /= dn;
            }
        }

        let gnorm = inf_norm(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            if feasible(&trial) {
                let ft = -objective(&trial);
                if ft.is_finite() {
                    if ft <= f + options.sufficient_decrease * t * slope {
                        accepted = Some((trial, ft, None));
                        break;
                    }
                    // Near the optimum the objective is flat to rounding;
                    // accept steps that improve the gradient instead.
                    if (ft - f).abs() <= 1e-12 * (1.0 + f.abs()) {
                        let gt: Vec<f64> = gradient(&trial).into_iter().map(|v| -v).collect();
                        if gt.iter().all(|v| v.is_finite()) && inf_norm(&gt) < gnorm {
                            accepted = Some((trial, ft, Some(gt)));
                            break;
                        }
                    }
                }
            }
            t *= options.contraction;
        }

        let Some((x_new, f_new, g_cached)) = accepted else {
            if fresh || reset_used {
                break;
            }
            h = identity(1.0);
            fresh = true;
            reset_used = true;
            continue;
        };

        let g_new = match g_cached {
            Some(gc) => gc,
            None => gradient(&x_new).into_iter().map(|v| -v).collect(),
        };
        if g_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient at {x_new:?}")));
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let step_small = s
            .iter()
            .zip(&x_new)
            .all(|(si, xi)| si.abs() <= options.step_tolerance * (1.0 + xi.abs()));

        let sy = dot(&s, &y);
        if sy > 0.0 {
            if fresh {
                let yy = dot(&y, &y);
                h = identity(sy / yy);
            }
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
                .collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
            fresh = false;
        }

        x = x_new;
        f = f_new;
        g = g_new;
        if step_small {
            break;
        }
    }

    let converged = inf_norm(&g) < options.gradient_tolerance;
    Ok(Maximum {
        value: -f,
        gradient: g.into_iter().map(|v| -v).collect(),
        x,
        converged,
        iterations,
    })
}

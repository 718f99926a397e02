//! Central finite differences, used as an independent check of analytic
//! derivatives.

/// A finite-difference estimate. `one_sided` lists the coordinates where the
/// central stencil left the domain and a forward or backward difference was
/// used instead.
#[derive(Debug, Clone, PartialEq)]
pub struct FdEstimate<T> {
    pub value: T,
    pub one_sided: Vec<usize>,
}

fn step(h: f64, xi: f64) -> f64 {
    h * xi.abs().max(1.0)
}

fn shifted(x: &[f64], i: usize, d: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[i] += d;
    y
}

/// Gradient of `f` at `x`. `f` returns `None` (or a non-finite value)
/// outside its domain.
pub fn fd_gradient(f: impl Fn(&[f64]) -> Option<f64>, x: &[f64], h: f64) -> FdEstimate<Vec<f64>> {
    let finite = |v: Option<f64>| v.filter(|v| v.is_finite());
    let f0 = finite(f(x));
    let mut grad = Vec::with_capacity(x.len());
    let mut one_sided = Vec::new();
    for i in 0..x.len() {
        let hi = step(h, x[i]);
        let plus = finite(f(&shifted(x, i, hi)));
        let minus = finite(f(&shifted(x, i, -hi)));
        let d = match (plus, minus, f0) {
            (Some(p), Some(m), _) => (p - m) / (2.0 * hi),
            (Some(p), None, Some(c)) => {
                one_sided.push(i);
                (p - c) / hi
            }
            (None, Some(m), Some(c)) => {
                one_sided.push(i);
                (c - m) / hi
            }
            _ => {
                one_sided.push(i);
                f64::NAN
            }
        };
        grad.push(d);
    }
    FdEstimate {
        value: grad,
        one_sided,
    }
}

/// Jacobian of `f` at `x`; row `r` holds the derivatives of output `r`.
pub fn fd_jacobian(
    f: impl Fn(&[f64]) -> Option<Vec<f64>>,
    x: &[f64],
    h: f64,
) -> FdEstimate<Vec<Vec<f64>>> {
    let finite = |v: Option<Vec<f64>>| v.filter(|v| v.iter().all(|e| e.is_finite()));
    let f0 = finite(f(x));
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    let mut one_sided = Vec::new();
    for i in 0..x.len() {
        let hi = step(h, x[i]);
        let plus = finite(f(&shifted(x, i, hi)));
        let minus = finite(f(&shifted(x, i, -hi)));
        let col = match (plus, minus, &f0) {
            (Some(p), Some(m), _) => p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * hi)).collect(),
            (Some(p), None, Some(c)) => {
                one_sided.push(i);
                p.iter().zip(c).map(|(a, b)| (a - b) / hi).collect()
            }
            (None, Some(m), Some(c)) => {
                one_sided.push(i);
                c.iter().zip(&m).map(|(a, b)| (a - b) / hi).collect()
            }
            _ => {
                one_sided.push(i);
                vec![f64::NAN; f0.as_ref().map_or(0, |c| c.len())]
            }
        };
        cols.push(col);
    }
    let rows = cols.first().map_or(0, |c| c.len());
    let value = (0..rows)
        .map(|r| cols.iter().map(|c| c[r]).collect())
        .collect();
    FdEstimate { value, one_sided }
}

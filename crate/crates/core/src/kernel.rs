//! The standard GEV log-density and its derivatives in `(x, γ)`.
//!
//! Everything is written through `φ(γ; x) = ln(1 + γx)/γ`, which is smooth
//! across `γ = 0` (where `φ = x`). For small `|γx|` it is evaluated by its
//! power series so the Gumbel limit needs no separate branch.

/// Below this `|γx|` the series is used.
const SERIES_CUTOFF: f64 = 0.05;
const SERIES_TERMS: usize = 25;

/// `φ` and its first two derivatives in `γ`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Phi {
    pub phi: f64,
    pub d1: f64,
    pub d2: f64,
    /// `1 + γx`, positive.
    pub w: f64,
}

/// Returns `None` when `1 + γx <= 0`.
pub(crate) fn phi(x: f64, gamma: f64) -> Option<Phi> {
    let z = gamma * x;
    let w = 1.0 + z;
    if !(w > 0.0) {
        return None;
    }
    if z.abs() < SERIES_CUTOFF {
        // φ   = x  Σ_{k≥0} (−z)^k / (k+1)
        // φ'  = −x² Σ_{k≥1} k/(k+1) (−z)^{k−1}
        // φ'' = x³ Σ_{k≥2} k(k−1)/(k+1) (−z)^{k−2}
        let mz = -z;
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let mut pow = 1.0; // (−z)^k
        for k in 0..SERIES_TERMS {
            let kf = k as f64;
            s0 += pow / (kf + 1.0);
            if k + 1 < SERIES_TERMS {
                s1 += (kf + 1.0) / (kf + 2.0) * pow;
            }
            if k + 2 < SERIES_TERMS {
                s2 += (kf + 2.0) * (kf + 1.0) / (kf + 3.0) * pow;
            }
            pow *= mz;
        }
        Some(Phi {
            phi: x * s0,
            d1: -x * x * s1,
            d2: x * x * x * s2,
            w,
        })
    } else {
        let p = z.ln_1p() / gamma;
        let d1 = (x / w - p) / gamma;
        let d2 = -x * x / (gamma * w * w) - 2.0 * d1 / gamma;
        Some(Phi { phi: p, d1, d2, w })
    }
}

/// `L(x, γ) = ln g_γ(x)` for the standard GEV density and its partials.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogDensity {
    pub l: f64,
    pub lx: f64,
    pub lxx: f64,
    pub lg: f64,
    pub lgg: f64,
    pub lxg: f64,
}

pub(crate) fn log_density(x: f64, gamma: f64) -> Option<LogDensity> {
    let Phi { phi, d1, d2, w } = phi(x, gamma)?;
    let p = (-phi).exp();
    let a = 1.0 + gamma - p;
    Some(LogDensity {
        l: -(1.0 + gamma) * phi - p,
        lx: -a / w,
        lxx: (1.0 + gamma) * (gamma - p) / (w * w),
        lg: -phi - (1.0 + gamma) * d1 + p * d1,
        lgg: -2.0 * d1 - a * d2 - p * d1 * d1,
        lxg: -(1.0 + p * d1) / w + a * x / (w * w),
    })
}

/// `-ln G_γ(x)`, the exponent of the GEV cdf: `(1 + γx)^{−1/γ}`.
pub(crate) fn cdf_exponent(x: f64, gamma: f64) -> Option<f64> {
    phi(x, gamma).map(|p| (-p.phi).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_phi(x: f64, g: f64) -> f64 {
        if g == 0.0 {
            x
        } else {
            (1.0 + g * x).ln() / g
        }
    }

    #[test]
    fn series_matches_closed_form_at_cutoff() {
        for &x in &[-3.0, -0.5, 0.7, 4.0] {
            let g = 0.0499 / x;
            let s = phi(x, g).unwrap();
            let g2 = 0.0501 / x;
            let c = phi(x, g2).unwrap();
            // both sides continuous through the cutoff
            assert!((s.phi - direct_phi(x, g)).abs() < 1e-14 * x.abs().max(1.0));
            assert!((c.phi - direct_phi(x, g2)).abs() < 1e-14 * x.abs().max(1.0));
            let h = 1e-6 * g.abs();
            let fd1 = (phi(x, g + h).unwrap().phi - phi(x, g - h).unwrap().phi) / (2.0 * h);
            assert!((fd1 - s.d1).abs() < 1e-6 * s.d1.abs().max(1.0));
            let fd2 = (phi(x, g + h).unwrap().d1 - phi(x, g - h).unwrap().d1) / (2.0 * h);
            assert!((fd2 - s.d2).abs() < 1e-6 * s.d2.abs().max(1.0));
        }
    }

    #[test]
    fn gumbel_limit() {
        let d = log_density(0.8, 0.0).unwrap();
        assert!((d.l - (-0.8 - (-0.8f64).exp())).abs() < 1e-15);
        assert!((d.lx - (-1.0 + (-0.8f64).exp())).abs() < 1e-15);
        assert!((d.lxx - (-(-0.8f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn infeasible() {
        assert!(phi(2.0, -0.5).is_none());
        assert!(phi(-2.0, 0.5).is_none());
    }
}

//! Similarity profiles `Phi_{1,n}(eta)` and `Phi_{2,n}(xi)` and the scaled
//! observable that converges to the latter.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::ModelParams;
pub use crate::quadrature::{quad_breakpoints, quad_finite, Quadrature, QuadratureSpec};

/// Outer profile along `eta = j/tau`: `(1 - eta)^{-(n-1)/n}` below 1, zero above.
pub fn phi1(n: u32, eta: f64) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Domain(format!("phi1 needs eta > 0, got {eta}")));
    }
    if eta == 1.0 {
        return Err(Error::Domain("phi1 is singular at eta = 1; use phi2 there".into()));
    }
    if eta > 1.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    Ok((1.0 - eta).powf(-(nf - 1.0) / nf))
}

/// Upper limit `W` such that the integrand of `phi2` has dropped by more than
/// `e^{-40}` from its maximum for `w > W`.
pub fn phi2_cutoff(n: u32, xi: f64) -> f64 {
    ((-xi).max(0.0) + 9.0).powf(1.0 / n as f64)
}

/// Inner profile `Phi_{2,n}(xi) = e^{-xi^2/2} int_0^inf exp(-xi w^n - w^{2n}/2) dw`.
///
/// The prefactor is folded into the integrand as `exp(-(w^n + xi)^2/2)`, which
/// stays representable for any `xi`.
pub fn phi2(n: u32, xi: f64, spec: &QuadratureSpec) -> Result<f64> {
    if n < 2 {
        return Err(Error::Validation(format!("phi2 needs n >= 2, got {n}")));
    }
    if !xi.is_finite() {
        return Err(Error::Validation(format!("xi must be finite, got {xi}")));
    }
    let inv = 1.0 / n as f64;
    let upper = phi2_cutoff(n, xi);
    let mut pts = vec![0.0, upper];
    if xi < 0.0 {
        // the integrand peaks where w^n = -xi, with unit width in w^n
        for k in [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
            let v = -xi + k;
            if v > 0.0 {
                let w = v.powf(inv);
                if w < upper {
                    pts.push(w);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
    }
    let ni = n as i32;
    let q = quad_breakpoints(
        |w| {
            let z = w.powi(ni) + xi;
            (-0.5 * z * z).exp()
        },
        &pts,
        spec,
    )?;
    Ok(q.value)
}

/// `Phi_{2,n}(0) = 2^{1/(2n)} Gamma(1/(2n)) / (2n)`.
pub fn phi2_at_zero(n: u32) -> f64 {
    let a = 1.0 / (2.0 * n as f64);
    2f64.powf(a) * crate::special::ln_gamma(a).exp() * a
}

/// Prefactor `sqrt(2 pi)/alpha (alpha/n)^{1/n}` shared by scaled quantities.
pub fn scale_constant(params: &ModelParams) -> f64 {
    TAU.sqrt() / params.alpha * (params.alpha / params.nf()).powf(1.0 / params.nf())
}

/// `F = sqrt(2 pi)/alpha (alpha/n)^{1/n} tau^{(n-1)/(2n)} c`.
pub fn scaled_observable(params: &ModelParams, tau: f64, c_val: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("scaled observable needs tau > 0, got {tau}")));
    }
    if !(c_val >= 0.0) {
        return Err(Error::Domain(format!("scaled observable needs c >= 0, got {c_val}")));
    }
    Ok(scale_constant(params) * tau.powf(0.5 * params.theta()) * c_val)
}

/// Values from `lo` to `hi` inclusive in steps of `step`, built by index so
/// the endpoints are exact.
pub fn xi_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::Validation(format!("bad grid [{lo}, {hi}] with step {step}")));
    }
    let count = ((hi - lo) / step).round() as usize + 1;
    Ok((0..count)
        .map(|i| if i + 1 == count { hi } else { lo + i as f64 * step })
        .collect())
}

/// One entry of a profile table.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProfileRow {
    pub xi: f64,
    pub n: u32,
    pub phi2: f64,
}

/// `Phi_{2,n}` for every `n` (outer) and `xi` (inner).
pub fn profile_table(ns: &[u32], xis: &[f64], spec: &QuadratureSpec) -> Result<Vec<ProfileRow>> {
    let mut rows = Vec::with_capacity(ns.len() * xis.len());
    for &n in ns {
        for &xi in xis {
            rows.push(ProfileRow {
                xi,
                n,
                phi2: phi2(n, xi, spec)?,
            });
        }
    }
    Ok(rows)
}

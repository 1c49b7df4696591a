//! Exact representation `c_j(tau) = I1 + I2`, the geometry of the curves
//! `j = tau + xi sqrt(tau)`, and the split sums used for power-law data.
//!
//! Every Poisson-type weight is handled through its logarithm; at `j ~ 10^4`
//! both `tau^j` and `j!` overflow long before their ratio does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{c1_tilde, MonomerTrajectory};
use crate::model::{InitialData, ModelParams, Tail};
use crate::quadrature::{quad_breakpoints, QuadratureSpec};
use crate::special::{ln_gamma_kernel, CompensatedSum};

/// Log-drop from the kernel maximum that bounds the `I2` integration window.
const WINDOW_LOG_DROP: f64 = 40.0;

/// Half-width of the index window kept in Poisson sums, in standard deviations.
const POISSON_SIGMAS: f64 = 40.0;

/// A size `j` together with the time `tau` at which it sits at offset `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub j: u64,
    pub xi: f64,
    pub tau: f64,
    pub delta: f64,
}

impl ScalingPoint {
    /// Solve `tau + xi sqrt(tau) = j`; `tau_min` rejects points too early in time.
    pub fn new(j: u64, xi: f64, tau_min: f64) -> Result<Self> {
        let delta = delta_j(xi, j, tau_min)?;
        Ok(Self {
            j,
            xi,
            tau: j as f64 * delta,
            delta,
        })
    }
}

/// `Delta_j(xi)` with `tau = j Delta_j` solving `tau + xi sqrt(tau) = j`.
///
/// Points whose `tau` falls below `tau_min` are rejected (pass `0` to disable).
pub fn delta_j(xi: f64, j: u64, tau_min: f64) -> Result<f64> {
    if j == 0 {
        return Err(Error::Validation("delta_j needs j >= 1".into()));
    }
    if !xi.is_finite() {
        return Err(Error::Validation(format!("xi must be finite, got {xi}")));
    }
    let a = xi * xi / (4.0 * j as f64);
    // (sqrt(1+a) - sqrt(a))^2 = 1/(sqrt(1+a) + sqrt(a))^2 avoids cancellation for xi > 0
    let s = (1.0 + a).sqrt() + a.sqrt();
    let delta = if xi > 0.0 {
        1.0 / (s * s)
    } else if xi < 0.0 {
        s * s
    } else {
        1.0
    };
    let tau = j as f64 * delta;
    if tau < tau_min {
        return Err(Error::DegenerateGeometry(format!(
            "xi = {xi} at j = {j} gives tau = {tau} below {tau_min}"
        )));
    }
    Ok(delta)
}

/// Index `j* = (j - n) - (1 + |xi|) sqrt(j - n)` splitting the small and large `l` sums.
pub fn j_star(j: u64, xi: f64, n: u32) -> f64 {
    let m = j.saturating_sub(n as u64) as f64;
    m - (1.0 + xi.abs()) * m.sqrt()
}

/// `ln(e^{-tau} tau^m / m!)`.
pub fn poisson_weight_log(m: u64, tau: f64) -> f64 {
    ln_gamma_kernel(m as f64, tau)
}

/// Index range `[lo, hi]` of `m` outside which the Poisson weight is negligible.
fn poisson_window(tau: f64) -> (u64, u64) {
    let w = POISSON_SIGMAS * (tau.sqrt() + 1.0);
    ((tau - w).max(0.0).floor() as u64, (tau + w).ceil() as u64)
}

/// Initial-data part `I1 = sum_{k=n}^{j} c_k(0) e^{-tau} tau^{j-k}/(j-k)!`.
pub fn i1(j: u64, tau: f64, data: &InitialData) -> f64 {
    if data.is_monomer_only() || j < data.n() as u64 {
        return 0.0;
    }
    if tau == 0.0 {
        return data.c0(j);
    }
    let (m_lo, m_hi) = poisson_window(tau);
    if m_lo > j {
        return 0.0;
    }
    let k_lo = j.saturating_sub(m_hi);
    let k_hi = j - m_lo;
    let s: CompensatedSum = data
        .entries_between(k_lo, k_hi)
        .into_iter()
        .map(|(k, c)| c * poisson_weight_log(j - k, tau).exp())
        .collect();
    s.value()
}

/// Points `s` in `[lo, hi]` where the concave `ln(s^m e^{-s})` is `drop` below its peak at `m`.
fn kernel_window(m: f64, lo: f64, hi: f64, drop: f64) -> (f64, f64) {
    let peak = m.clamp(lo, hi);
    let level = log_kernel(m, peak) - drop;
    let edge = |mut inside: f64, mut outside: f64| {
        if log_kernel(m, outside) >= level {
            return outside;
        }
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if log_kernel(m, mid) >= level {
                inside = mid;
            } else {
                outside = mid;
            }
            if (outside - inside).abs() <= 1e-12 * outside.abs().max(1.0) {
                break;
            }
        }
        outside
    };
    (edge(peak, lo), edge(peak, hi))
}

/// Unnormalized `m ln s - s`.
fn log_kernel(m: f64, s: f64) -> f64 {
    if m == 0.0 {
        -s
    } else if s == 0.0 {
        f64::NEG_INFINITY
    } else {
        m * s.ln() - s
    }
}

/// Breakpoints covering `[a, b]` with extra nodes around the kernel peak.
fn peak_breakpoints(m: f64, a: f64, b: f64) -> Vec<f64> {
    let sigma = m.max(1.0).sqrt();
    let mut pts = vec![a, b];
    for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
        let p = m + k * sigma;
        if p > a && p < b {
            pts.push(p);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Source term `I2 = 1/(j-n)! int_0^tau c1(tau-s)^{n-1} s^{j-n} e^{-s} ds`.
pub fn i2(j: u64, tau: f64, n: u32, traj: &MonomerTrajectory, quad: &QuadratureSpec) -> Result<f64> {
    if j < n as u64 {
        return Err(Error::Validation(format!("I2 needs j >= n ({j} < {n})")));
    }
    if !(tau >= 0.0) || tau > traj.tau_max() {
        return Err(Error::Range {
            what: "tau",
            value: tau,
            lo: 0.0,
            hi: traj.tau_max(),
        });
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let m = (j - n as u64) as f64;
    let (a, b) = kernel_window(m, 0.0, tau, WINDOW_LOG_DROP);
    let mut pts = peak_breakpoints(m, a, b);
    // c1 behaves like a root of tau near the start of the trajectory
    if tau - 1.0 > a && tau - 1.0 < b {
        pts.push(tau - 1.0);
        pts.sort_by(f64::total_cmp);
    }
    let k = n as i32 - 1;
    let mut failed = None;
    let q = quad_breakpoints(
        |s| match c1_tilde(traj, (tau - s).max(0.0)) {
            Ok(c) => c.powi(k) * ln_gamma_kernel(m, s).exp(),
            Err(e) => {
                failed.get_or_insert(e);
                0.0
            }
        },
        &pts,
        quad,
    )?;
    match failed {
        Some(e) => Err(e),
        None => Ok(q.value),
    }
}

/// `c_j(tau) = I1 + I2` for `j >= n`.
pub fn c_tilde(j: u64, tau: f64, data: &InitialData, traj: &MonomerTrajectory, quad: &QuadratureSpec) -> Result<f64> {
    Ok(i1(j, tau, data) + i2(j, tau, data.n(), traj, quad)?)
}

fn power_law_parts(j: u64, params: &ModelParams, data: &InitialData) -> Result<f64> {
    match data.tail {
        Tail::PowerLaw { mu, k_cut, .. } => {
            if k_cut < j {
                return Err(Error::Applicability(format!("power-law cut-off {k_cut} below j = {j}")));
            }
            if j <= params.n as u64 {
                return Err(Error::Applicability(format!("split sums need j > n ({j} <= {})", params.n)));
            }
            Ok(mu)
        }
        _ => Err(Error::Applicability("split sums are defined for power-law data only".into())),
    }
}

/// `(j Delta)^{(n-1)/2n} e^{-j Delta} sum_{l in range} (j Delta)^l / (l! (j-l)^mu)`.
fn split_sum(j: u64, xi: f64, params: &ModelParams, mu: f64, lo: u64, hi: u64) -> Result<f64> {
    let tau = j as f64 * delta_j(xi, j, 0.0)?;
    let pre = 0.5 * params.theta() * tau.ln();
    let s: CompensatedSum = (lo..=hi)
        .map(|l| (pre + poisson_weight_log(l, tau) - mu * ((j - l) as f64).ln()).exp())
        .collect();
    Ok(s.value())
}

fn star_index(j: u64, xi: f64, n: u32) -> Option<u64> {
    let js = j_star(j, xi, n);
    (js >= 0.0).then(|| js.floor() as u64)
}

/// Small-`l` part (`l <= j*`) of the power-law sum, constants dropped.
pub fn s3(j: u64, xi: f64, data: &InitialData, params: &ModelParams) -> Result<f64> {
    let mu = power_law_parts(j, params, data)?;
    match star_index(j, xi, params.n) {
        Some(top) => split_sum(j, xi, params, mu, 0, top),
        None => Ok(0.0),
    }
}

/// Large-`l` part (`j* < l <= j - n`) of the power-law sum, constants dropped.
pub fn s4(j: u64, xi: f64, data: &InitialData, params: &ModelParams) -> Result<f64> {
    let mu = power_law_parts(j, params, data)?;
    let lo = star_index(j, xi, params.n).map_or(0, |t| t + 1);
    let hi = j - params.n as u64;
    if lo > hi {
        return Ok(0.0);
    }
    split_sum(j, xi, params, mu, lo, hi)
}

/// Whole power-law sum over `0 <= l <= j - n`, constants dropped.
pub fn scaled_sum(j: u64, xi: f64, data: &InitialData, params: &ModelParams) -> Result<f64> {
    let mu = power_law_parts(j, params, data)?;
    split_sum(j, xi, params, mu, 0, j - params.n as u64)
}

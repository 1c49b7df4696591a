//! Monomer/bulk dynamics, the intrinsic clock `tau(t) = int_0^t c1`, and the
//! truncated cluster hierarchy in both time scales.
//!
//! With `x = c1` and `y = sum_{j>=n} c_j` the monomer equation closes into
//!
//! ```text
//! x' = alpha - n x^n - x y,    y' = x^n
//! ```
//!
//! The pair is integrated in physical time up to `tau = 1` and in `tau`
//! afterwards (`dx/dtau = (alpha - n x^n - x y)/x`, `dy/dtau = x^{n-1}`,
//! `dt/dtau = 1/x`). In the `tau` form the relaxation rate of `x` grows like
//! `alpha/x^2 ~ tau^{2/n}`, so the integrator is implicit.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{nu0, InitialData, ModelParams};
use crate::ode::{Dopri5, OdeSystem, Radau5, Tolerance};

/// `tau` at which integration switches from `t` to `tau` as independent variable.
pub const TAU_SWITCH: f64 = 1.0;

/// Smallest `tau` accepted by [`c1_asymptotic`] unless overridden.
pub const TAU_ASYMPTOTIC_MIN: f64 = 1e2;

/// Degree of the piecewise interpolant used for dense output.
pub const INTERPOLATION_DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryNode {
    pub t: f64,
    pub tau: f64,
    pub x: f64,
    pub y: f64,
    /// Derivatives of `(t, tau, x, y)` with respect to the segment variable.
    deriv: [f64; 4],
}

impl TrajectoryNode {
    fn value(&self) -> [f64; 4] {
        [self.t, self.tau, self.x, self.y]
    }
}

/// Dense record of `(t, tau, x = c1, y)` with cubic Hermite interpolation.
///
/// Nodes before [`TAU_SWITCH`] carry derivatives in `t`, later ones in `tau`;
/// the switch node appears in both lists.
#[derive(Debug, Clone)]
pub struct MonomerTrajectory {
    time_nodes: Vec<TrajectoryNode>,
    tau_nodes: Vec<TrajectoryNode>,
    tau_max: f64,
}

fn hermite(s0: f64, s1: f64, v0: f64, v1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let h = s1 - s0;
    let u = (s - s0) / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    h00 * v0 + h10 * h * d0 + h01 * v1 + h11 * h * d1
}

fn hermite_slope(s0: f64, s1: f64, v0: f64, v1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let h = s1 - s0;
    let u = (s - s0) / h;
    let u2 = u * u;
    ((6.0 * u2 - 6.0 * u) * v0 + (6.0 * u - 6.0 * u2) * v1) / h + (3.0 * u2 - 4.0 * u + 1.0) * d0 + (3.0 * u2 - 2.0 * u) * d1
}

impl MonomerTrajectory {
    /// Synthetic trajectory with `c1 ≡ kappa` on `[0, tau_max]`.
    pub fn constant(kappa: f64, tau_max: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !(tau_max > 0.0) {
            return Err(Error::Validation(format!(
                "constant trajectory needs kappa >= 0, tau_max > 0 ({kappa}, {tau_max})"
            )));
        }
        let rate = if kappa > 0.0 { 1.0 / kappa } else { 0.0 };
        let node = |tau: f64| TrajectoryNode {
            t: tau * rate,
            tau,
            x: kappa,
            y: 0.0,
            deriv: [rate, 1.0, 0.0, 0.0],
        };
        Ok(Self {
            time_nodes: Vec::new(),
            tau_nodes: vec![node(0.0), node(tau_max)],
            tau_max,
        })
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    /// All nodes in increasing `tau` (the switch node once).
    pub fn nodes(&self) -> impl Iterator<Item = &TrajectoryNode> {
        let skip = usize::from(!self.time_nodes.is_empty());
        self.time_nodes.iter().chain(self.tau_nodes.iter().skip(skip))
    }

    /// Interpolated state `(t, tau, x, y)` at intrinsic time `tau`.
    pub fn state_at(&self, tau: f64) -> Result<[f64; 4]> {
        if !(tau >= 0.0 && tau <= self.tau_max * (1.0 + 1e-13)) {
            return Err(Error::Range {
                what: "tau",
                value: tau,
                lo: 0.0,
                hi: self.tau_max,
            });
        }
        let in_time_phase = self.tau_nodes.is_empty() || self.time_nodes.last().is_some_and(|last| tau <= last.tau);
        if in_time_phase {
            let nodes = &self.time_nodes;
            let tau = tau.min(nodes[nodes.len() - 1].tau);
            let i = segment_index(nodes, tau);
            let (a, b) = (&nodes[i], &nodes[i + 1]);
            if tau == a.tau {
                return Ok(a.value());
            }
            // invert the monotone cubic tau(t) on the segment
            let (mut lo, mut hi) = (a.t, b.t);
            let mut t = a.t + (b.t - a.t) * (tau - a.tau) / (b.tau - a.tau);
            for _ in 0..100 {
                let f = hermite(a.t, b.t, a.tau, b.tau, a.deriv[1], b.deriv[1], t) - tau;
                if f > 0.0 {
                    hi = t;
                } else {
                    lo = t;
                }
                let slope = hermite_slope(a.t, b.t, a.tau, b.tau, a.deriv[1], b.deriv[1], t);
                let mut next = t - f / slope;
                if !(next > lo && next < hi) || !next.is_finite() {
                    next = 0.5 * (lo + hi);
                }
                if (next - t).abs() <= 1e-15 * t.abs().max(1e-300) {
                    t = next;
                    break;
                }
                t = next;
            }
            let mut out = [0.0; 4];
            out[0] = t;
            out[1] = tau;
            for k in 2..4 {
                out[k] = hermite(a.t, b.t, a.value()[k], b.value()[k], a.deriv[k], b.deriv[k], t);
            }
            Ok(out)
        } else {
            let nodes = &self.tau_nodes;
            let tau = tau.min(self.tau_max);
            let i = segment_index(nodes, tau);
            let (a, b) = (&nodes[i], &nodes[i + 1]);
            let mut out = [0.0; 4];
            for k in 0..4 {
                out[k] = hermite(a.tau, b.tau, a.value()[k], b.value()[k], a.deriv[k], b.deriv[k], tau);
            }
            out[1] = tau;
            Ok(out)
        }
    }

    /// Trajectory as CSV with columns `t,tau,x,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,tau,x,y")?;
        for nd in self.nodes() {
            writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", nd.t, nd.tau, nd.x, nd.y)?;
        }
        Ok(())
    }
}

/// Index `i` with `nodes[i].tau <= tau <= nodes[i+1].tau`.
fn segment_index(nodes: &[TrajectoryNode], tau: f64) -> usize {
    let p = nodes.partition_point(|nd| nd.tau <= tau);
    p.saturating_sub(1).min(nodes.len() - 2)
}

struct TimeForm {
    n: i32,
    alpha: f64,
}

impl OdeSystem for TimeForm {
    fn dim(&self) -> usize {
        3
    }
    fn rhs(&self, _t: f64, u: &[f64], du: &mut [f64]) {
        let (x, y) = (u[0], u[1]);
        let xn = x.powi(self.n);
        du[0] = self.alpha - self.n as f64 * xn - x * y;
        du[1] = xn;
        du[2] = x;
    }
    fn jacobian(&self, _t: f64, u: &[f64], jac: &mut DMatrix<f64>) {
        let (x, y) = (u[0], u[1]);
        let nf = self.n as f64;
        let xn1 = x.powi(self.n - 1);
        jac.fill(0.0);
        jac[(0, 0)] = -nf * nf * xn1 - y;
        jac[(0, 1)] = -x;
        jac[(1, 0)] = nf * xn1;
        jac[(2, 0)] = 1.0;
    }
}

struct TauForm {
    n: i32,
    alpha: f64,
}

impl OdeSystem for TauForm {
    fn dim(&self) -> usize {
        3
    }
    fn rhs(&self, _tau: f64, u: &[f64], du: &mut [f64]) {
        let (x, y) = (u[0], u[1]);
        let xn1 = x.powi(self.n - 1);
        du[0] = self.alpha / x - self.n as f64 * xn1 - y;
        du[1] = xn1;
        du[2] = 1.0 / x;
    }
    fn jacobian(&self, _tau: f64, u: &[f64], jac: &mut DMatrix<f64>) {
        let x = u[0];
        let nf = self.n as f64;
        let xn2 = x.powi(self.n - 2);
        jac.fill(0.0);
        jac[(0, 0)] = -self.alpha / (x * x) - nf * (nf - 1.0) * xn2;
        jac[(0, 1)] = -1.0;
        jac[(1, 0)] = (nf - 1.0) * xn2;
        jac[(2, 0)] = -1.0 / (x * x);
    }
}

/// Integrate the monomer/bulk pair from `x(0) = c1(0)`, `y(0) = nu0` until
/// `tau = tau_target`, keeping every accepted node for dense output.
pub fn solve_monomer_bulk(params: &ModelParams, data: &InitialData, tau_target: f64, rel_tol: f64) -> Result<MonomerTrajectory> {
    if !(tau_target > 0.0 && tau_target.is_finite()) {
        return Err(Error::Validation(format!("tau_target must be positive, got {tau_target}")));
    }
    if !(rel_tol > 1e-14 && rel_tol < 1e-3) {
        return Err(Error::Validation(format!("rel_tol must lie in (1e-14, 1e-3), got {rel_tol}")));
    }
    let n = params.n as i32;
    let alpha = params.alpha;
    let tol = Tolerance {
        rel: rel_tol,
        abs: rel_tol * 1e-6,
    };

    // physical time until the clock has advanced to TAU_SWITCH
    let switch = TAU_SWITCH.min(tau_target);
    let mut time_nodes = Vec::new();
    let mut radau = Radau5::new(tol);
    radau.h_max = Box::new(|t: f64| 0.02 * t.max(0.1));
    radau.h_init = 1e-6;
    let run = radau.integrate(
        &TimeForm { n, alpha },
        0.0,
        &[data.c1_0, nu0(data), 0.0],
        f64::INFINITY,
        |_, u| u[2] >= switch,
        |t, u, du| {
            time_nodes.push(TrajectoryNode {
                t,
                tau: u[2],
                x: u[0],
                y: u[1],
                deriv: [1.0, du[2], du[0], du[1]],
            })
        },
    )?;
    let (t1, x1, y1, tau1) = (run.s, run.u[0], run.u[1], run.u[2]);
    if !(x1 > 0.0) {
        return Err(Error::Instability {
            at: t1,
            what: format!("monomer concentration {x1} not positive at switch"),
        });
    }
    check_increasing(&time_nodes)?;

    let mut tau_nodes = Vec::new();
    if tau1 < tau_target {
        let mut radau = Radau5::new(tol);
        radau.h_max = Box::new(|tau: f64| 0.02 * tau);
        radau.h_init = 1e-3 * tau1;
        radau.integrate(
            &TauForm { n, alpha },
            tau1,
            &[x1, y1, t1],
            tau_target,
            |_, _| false,
            |tau, u, du| {
                tau_nodes.push(TrajectoryNode {
                    t: u[2],
                    tau,
                    x: u[0],
                    y: u[1],
                    deriv: [du[2], 1.0, du[0], du[1]],
                })
            },
        )?;
        check_increasing(&tau_nodes)?;
    }
    Ok(MonomerTrajectory {
        time_nodes,
        tau_nodes,
        tau_max: tau_target,
    })
}

fn check_increasing(nodes: &[TrajectoryNode]) -> Result<()> {
    for w in nodes.windows(2) {
        if !(w[1].tau > w[0].tau) {
            return Err(Error::Instability {
                at: w[1].t,
                what: format!("clock stalled at tau = {}", w[1].tau),
            });
        }
    }
    Ok(())
}

/// `c1` in the intrinsic clock, interpolated from the trajectory.
pub fn c1_tilde(traj: &MonomerTrajectory, tau: f64) -> Result<f64> {
    traj.state_at(tau).map(|s| s[2])
}

/// Two-term large-`tau` monomer law:
/// `c1^{n-1} = (alpha/(n tau))^{(n-1)/n} (1 + (n-1)(1-1/n) log(tau)/tau)`.
pub fn c1_asymptotic(params: &ModelParams, tau: f64, tau_min: f64) -> Result<f64> {
    if !(tau >= tau_min) {
        return Err(Error::Domain(format!(
            "asymptotic monomer law used at tau = {tau} below {tau_min}"
        )));
    }
    let nf = params.nf();
    let corr = 1.0 + (nf - 1.0) * (1.0 - 1.0 / nf) * tau.ln() / tau;
    Ok((params.alpha / (nf * tau)).powf(1.0 / nf) * corr.powf(1.0 / (nf - 1.0)))
}

/// Where `c1(tau)` comes from when building `f_n`.
#[derive(Debug, Clone, Copy)]
pub enum MonomerSource<'a> {
    Trajectory(&'a MonomerTrajectory),
    Asymptotic { tau_min: f64 },
}

impl MonomerSource<'_> {
    pub fn c1(&self, params: &ModelParams, tau: f64) -> Result<f64> {
        match self {
            MonomerSource::Trajectory(tr) => c1_tilde(tr, tau),
            MonomerSource::Asymptotic { tau_min } => c1_asymptotic(params, tau, *tau_min),
        }
    }
}

/// `f_n(tau) = -1 + (n tau/alpha)^{(n-1)/n} c1(tau)^{n-1}`.
pub fn fn_correction(source: MonomerSource<'_>, params: &ModelParams, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("f_n needs tau >= 0, got {tau}")));
    }
    let c = source.c1(params, tau)?;
    let k = params.n as i32 - 1;
    Ok(-1.0 + (params.nf() * tau / params.alpha).powf(params.theta()) * c.powi(k))
}

/// States of the truncated hierarchy `c1, c_n..c_J` at the requested times.
#[derive(Debug, Clone)]
pub struct TruncatedSolution {
    pub n: u32,
    pub j_max: u64,
    pub times: Vec<f64>,
    pub c1: Vec<f64>,
    /// `clusters[i][j - n]` is `c_j(times[i])`.
    pub clusters: Vec<Vec<f64>>,
    /// Clock `tau(t)` integrated alongside.
    pub tau: Vec<f64>,
    /// `int_0^t (J+1) c1 c_J ds`, the mass that left through the truncation.
    pub boundary_flux: Vec<f64>,
    initial_mass: f64,
    alpha: f64,
}

impl TruncatedSolution {
    pub fn c(&self, j: u64, i: usize) -> f64 {
        if j == 1 {
            self.c1[i]
        } else {
            self.clusters[i][(j - self.n as u64) as usize]
        }
    }

    /// `c1 + sum j c_j - (initial mass) - alpha t + flux`, which vanishes identically.
    pub fn mass_residual(&self, i: usize) -> f64 {
        let m: f64 = self.clusters[i]
            .iter()
            .enumerate()
            .map(|(k, c)| (k as f64 + self.n as f64) * c)
            .sum();
        self.c1[i] + m - self.initial_mass - self.alpha * self.times[i] + self.boundary_flux[i]
    }
}

struct Hierarchy {
    n: i32,
    alpha: f64,
    len: usize,
    j_max: f64,
}

impl OdeSystem for Hierarchy {
    fn dim(&self) -> usize {
        self.len + 3
    }
    fn rhs(&self, _t: f64, u: &[f64], du: &mut [f64]) {
        let c1 = u[0];
        let cl = &u[1..=self.len];
        let bulk: f64 = cl.iter().sum();
        let c1n = c1.powi(self.n);
        du[0] = self.alpha - self.n as f64 * c1n - c1 * bulk;
        du[1] = c1n - c1 * cl[0];
        for k in 1..self.len {
            du[1 + k] = c1 * (cl[k - 1] - cl[k]);
        }
        du[self.len + 1] = c1;
        du[self.len + 2] = (self.j_max + 1.0) * c1 * cl[self.len - 1];
    }
}

/// Integrate the hierarchy truncated at size `j_max` in physical time.
///
/// Roundoff-level negatives (below `10 rel_tol` times the largest cluster
/// concentration) are clamped to zero; anything larger is an error.
pub fn solve_full_truncated(
    params: &ModelParams,
    data: &InitialData,
    j_max: u64,
    times: &[f64],
    tol: Tolerance,
) -> Result<TruncatedSolution> {
    let n = params.n as u64;
    if j_max < n {
        return Err(Error::Validation(format!("truncation size {j_max} below critical size {n}")));
    }
    if let Some(top) = data.max_size() {
        if top > j_max {
            return Err(Error::Validation(format!(
                "initial data reaches size {top} beyond truncation {j_max}"
            )));
        }
    }
    if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Validation("output times must be nonnegative and nondecreasing".into()));
    }
    let len = (j_max - n + 1) as usize;
    let mut u0 = vec![0.0; len + 3];
    u0[0] = data.c1_0;
    for (k, c) in data.to_explicit() {
        u0[1 + (k - n) as usize] = c;
    }
    let initial_mass = data.c1_0 + data.to_explicit().iter().map(|&(k, c)| k as f64 * c).sum::<f64>();
    let sys = Hierarchy {
        n: params.n as i32,
        alpha: params.alpha,
        len,
        j_max: j_max as f64,
    };
    let rel = tol.rel;
    let clamp = |t: f64, u: &mut [f64]| -> Result<()> {
        let scale = u[1..=len].iter().fold(u[0].abs(), |m, v| m.max(v.abs()));
        for (i, v) in u[..=len].iter_mut().enumerate() {
            if *v < 0.0 {
                if -*v <= 10.0 * rel * scale {
                    *v = 0.0;
                } else {
                    return Err(Error::Negativity { index: i, value: *v, t });
                }
            }
        }
        Ok(())
    };
    let states = Dopri5::new(tol).integrate(&sys, 0.0, &u0, times, clamp)?;
    let mut sol = TruncatedSolution {
        n: params.n,
        j_max,
        times: times.to_vec(),
        c1: Vec::with_capacity(times.len()),
        clusters: Vec::with_capacity(times.len()),
        tau: Vec::with_capacity(times.len()),
        boundary_flux: Vec::with_capacity(times.len()),
        initial_mass,
        alpha: params.alpha,
    };
    for u in states {
        sol.c1.push(u[0]);
        sol.clusters.push(u[1..=len].to_vec());
        sol.tau.push(u[len + 1]);
        sol.boundary_flux.push(u[len + 2]);
    }
    Ok(sol)
}

struct Triangular<'a> {
    n: i32,
    len: usize,
    traj: &'a MonomerTrajectory,
}

impl OdeSystem for Triangular<'_> {
    fn dim(&self) -> usize {
        self.len
    }
    fn rhs(&self, tau: f64, u: &[f64], du: &mut [f64]) {
        // the integrator only visits tau inside the validated grid
        let c1 = c1_tilde(self.traj, tau).unwrap_or(f64::NAN);
        du[0] = c1.powi(self.n - 1) - u[0];
        for k in 1..self.len {
            du[k] = u[k - 1] - u[k];
        }
    }
}

/// Solve the linear triangular system in `tau` driven by the trajectory's `c1`;
/// row `i` holds `c_j(tau_grid[i])` for `j = n..=j_max`.
pub fn solve_triangular_tau(
    params: &ModelParams,
    data: &InitialData,
    traj: &MonomerTrajectory,
    j_max: u64,
    tau_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = params.n as u64;
    if j_max < n {
        return Err(Error::Validation(format!("truncation size {j_max} below critical size {n}")));
    }
    if tau_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Validation("tau grid must be nondecreasing".into()));
    }
    if let Some(&last) = tau_grid.last() {
        if !(tau_grid[0] >= 0.0) || last > traj.tau_max() {
            return Err(Error::Range {
                what: "tau",
                value: last,
                lo: 0.0,
                hi: traj.tau_max(),
            });
        }
    }
    let len = (j_max - n + 1) as usize;
    let u0: Vec<f64> = (n..=j_max).map(|j| data.c0(j)).collect();
    let sys = Triangular {
        n: params.n as i32,
        len,
        traj,
    };
    let tol = Tolerance { rel: 1e-12, abs: 1e-24 };
    Dopri5::new(tol).integrate(&sys, 0.0, &u0, tau_grid, |_, _| Ok(()))
}

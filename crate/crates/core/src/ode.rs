//! One-step integrators: an explicit Dormand–Prince 5(4) pair for the nonstiff
//! cluster hierarchies and a three-stage Radau IIA method with step-doubling
//! error control for the monomer/bulk pair, whose relaxation rate grows without
//! bound along the trajectory.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, s: f64, u: &[f64], du: &mut [f64]);

    /// Jacobian `d rhs / d u`; forward differences unless overridden.
    fn jacobian(&self, s: f64, u: &[f64], jac: &mut DMatrix<f64>) {
        let d = self.dim();
        let mut f0 = vec![0.0; d];
        let mut f1 = vec![0.0; d];
        self.rhs(s, u, &mut f0);
        let mut up = u.to_vec();
        for k in 0..d {
            let h = f64::EPSILON.sqrt() * u[k].abs().max(1e-8);
            up[k] = u[k] + h;
            self.rhs(s, &up, &mut f1);
            for i in 0..d {
                jac[(i, k)] = (f1[i] - f0[i]) / h;
            }
            up[k] = u[k];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    fn scaled_rms(&self, err: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let sum: f64 = err
            .iter()
            .zip(a.iter().zip(b))
            .map(|(e, (x, y))| {
                let sc = self.abs + self.rel * x.abs().max(y.abs());
                (e / sc).powi(2)
            })
            .sum();
        (sum / err.len() as f64).sqrt()
    }
}

const SAFETY: f64 = 0.9;

mod dp {
    pub const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    /// fifth-order weights minus embedded fourth-order weights
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

/// Explicit adaptive Dormand–Prince 5(4) integrator.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub tol: Tolerance,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(tol: Tolerance) -> Self {
        Self {
            tol,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }

    /// Integrate from `(s0, u0)` and return the state at each of `outputs`
    /// (nondecreasing, all `>= s0`). `after_step` may project the state after
    /// every accepted step, e.g. to clamp roundoff-level negatives.
    pub fn integrate<S, C>(&self, sys: &S, s0: f64, u0: &[f64], outputs: &[f64], mut after_step: C) -> Result<Vec<Vec<f64>>>
    where
        S: OdeSystem,
        C: FnMut(f64, &mut [f64]) -> Result<()>,
    {
        let d = sys.dim();
        let mut s = s0;
        let mut u = u0.to_vec();
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; d]; 7];
        let mut stage = vec![0.0; d];
        let mut unew = vec![0.0; d];
        let mut err = vec![0.0; d];
        let mut out = Vec::with_capacity(outputs.len());
        let span = outputs.last().map_or(0.0, |&e| e - s0);
        let mut h = (1e-3 * span).min(self.h_max).max(1e-12);
        let mut steps = 0usize;
        sys.rhs(s, &u, &mut k[0]);
        for &target in outputs {
            if target < s {
                return Err(Error::Validation(format!(
                    "output point {target} precedes current position {s}"
                )));
            }
            while s < target {
                if steps >= self.max_steps {
                    return Err(Error::Horizon {
                        target,
                        reached: s,
                        steps,
                    });
                }
                let last = s + h >= target;
                let hs = if last { target - s } else { h };
                for st in 1..7 {
                    for i in 0..d {
                        let mut acc = 0.0;
                        for (m, km) in k.iter().enumerate().take(st) {
                            acc += dp::A[st][m] * km[i];
                        }
                        stage[i] = u[i] + hs * acc;
                    }
                    let (head, tail) = k.split_at_mut(st);
                    let _ = head;
                    sys.rhs(s + dp::C[st] * hs, &stage, &mut tail[0]);
                    if st == 6 {
                        unew.copy_from_slice(&stage);
                    }
                }
                for i in 0..d {
                    err[i] = hs * (0..7).map(|m| dp::E[m] * k[m][i]).sum::<f64>();
                }
                let e = self.tol.scaled_rms(&err, &u, &unew);
                steps += 1;
                if !e.is_finite() || unew.iter().any(|v| !v.is_finite()) {
                    h = 0.25 * hs;
                    if h < 1e-14 * s.abs().max(1.0) {
                        return Err(Error::Instability {
                            at: s,
                            what: "non-finite state".into(),
                        });
                    }
                    continue;
                }
                if e <= 1.0 {
                    s = if last { target } else { s + hs };
                    u.copy_from_slice(&unew);
                    after_step(s, &mut u)?;
                    // FSAL unless the projection touched the state
                    sys.rhs(s, &u, &mut k[0]);
                    let fac = (SAFETY * e.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                    h = (hs * fac).min(self.h_max);
                    if last {
                        h = h.max(hs);
                    }
                } else {
                    h = hs * (SAFETY * e.powf(-0.2)).clamp(0.1, 1.0);
                }
            }
            out.push(u.clone());
        }
        Ok(out)
    }
}

mod radau {
    pub const SQ6: f64 = 2.449_489_742_783_178;
    pub const C: [f64; 3] = [(4.0 - SQ6) / 10.0, (4.0 + SQ6) / 10.0, 1.0];
    pub const A: [[f64; 3]; 3] = [
        [
            (88.0 - 7.0 * SQ6) / 360.0,
            (296.0 - 169.0 * SQ6) / 1800.0,
            (-2.0 + 3.0 * SQ6) / 225.0,
        ],
        [
            (296.0 + 169.0 * SQ6) / 1800.0,
            (88.0 + 7.0 * SQ6) / 360.0,
            (-2.0 - 3.0 * SQ6) / 225.0,
        ],
        [(16.0 - SQ6) / 36.0, (16.0 + SQ6) / 36.0, 1.0 / 9.0],
    ];
}

/// Three-stage Radau IIA (order 5, L-stable), error estimated by comparing one
/// step of size `h` with two of size `h/2`.
pub struct Radau5<'a> {
    pub tol: Tolerance,
    /// Largest admissible step as a function of the independent variable.
    pub h_max: Box<dyn Fn(f64) -> f64 + 'a>,
    pub h_init: f64,
    pub max_steps: usize,
}

/// Outcome of [`Radau5::integrate`].
#[derive(Debug, Clone)]
pub struct RadauRun {
    pub s: f64,
    pub u: Vec<f64>,
    pub steps: usize,
}

impl<'a> Radau5<'a> {
    pub fn new(tol: Tolerance) -> Self {
        Self {
            tol,
            h_max: Box::new(|_| f64::INFINITY),
            h_init: 1e-4,
            max_steps: 200_000,
        }
    }

    /// Integrate until `s_end` or until `stop(s, u)` holds after a step. `record`
    /// sees every accepted node (including the start) with the local derivative.
    pub fn integrate<S, P, R>(&self, sys: &S, s0: f64, u0: &[f64], s_end: f64, stop: P, mut record: R) -> Result<RadauRun>
    where
        S: OdeSystem,
        P: Fn(f64, &[f64]) -> bool,
        R: FnMut(f64, &[f64], &[f64]),
    {
        let d = sys.dim();
        let mut s = s0;
        let mut u = u0.to_vec();
        let mut du = vec![0.0; d];
        sys.rhs(s, &u, &mut du);
        record(s, &u, &du);
        let mut h = self.h_init.min((self.h_max)(s));
        let mut steps = 0usize;
        let mut jac = DMatrix::zeros(d, d);
        while s < s_end && !stop(s, &u) {
            if steps >= self.max_steps {
                return Err(Error::Horizon {
                    target: s_end,
                    reached: s,
                    steps,
                });
            }
            steps += 1;
            let last = s + h >= s_end;
            let hs = if last { s_end - s } else { h };
            sys.jacobian(s, &u, &mut jac);
            let attempt = (|| {
                let big = self.step(sys, &jac, s, &u, hs)?;
                let mid = self.step(sys, &jac, s, &u, 0.5 * hs)?;
                let fine = self.step(sys, &jac, s + 0.5 * hs, &mid, 0.5 * hs)?;
                Some((big, mid, fine))
            })();
            let Some((big, mid, fine)) = attempt else {
                h = 0.25 * hs;
                if h < 1e-14 * s.abs().max(1.0) {
                    return Err(Error::Instability {
                        at: s,
                        what: "Newton iteration failed at minimal step".into(),
                    });
                }
                continue;
            };
            let diff: Vec<f64> = fine.iter().zip(&big).map(|(a, b)| (a - b) / 31.0).collect();
            let e = self.tol.scaled_rms(&diff, &u, &fine);
            if !e.is_finite() {
                h = 0.25 * hs;
                continue;
            }
            if e <= 1.0 {
                let smid = s + 0.5 * hs;
                sys.rhs(smid, &mid, &mut du);
                record(smid, &mid, &du);
                s = if last { s_end } else { s + hs };
                u = fine;
                if u.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Instability {
                        at: s,
                        what: "non-finite state".into(),
                    });
                }
                sys.rhs(s, &u, &mut du);
                record(s, &u, &du);
                let fac = (SAFETY * e.max(1e-12).powf(-1.0 / 6.0)).clamp(0.2, 4.0);
                h = (hs * fac).min((self.h_max)(s));
            } else {
                h = hs * (SAFETY * e.powf(-1.0 / 6.0)).clamp(0.1, 1.0);
            }
        }
        Ok(RadauRun { s, u, steps })
    }

    /// One Radau IIA step by simplified Newton iteration; `None` if it fails to converge.
    fn step<S: OdeSystem>(&self, sys: &S, jac: &DMatrix<f64>, s: f64, u: &[f64], h: f64) -> Option<Vec<f64>> {
        let d = sys.dim();
        let n = 3 * d;
        let mut m = DMatrix::<f64>::identity(n, n);
        for i in 0..3 {
            for j in 0..3 {
                let a = h * radau::A[i][j];
                for r in 0..d {
                    for c in 0..d {
                        m[(i * d + r, j * d + c)] -= a * jac[(r, c)];
                    }
                }
            }
        }
        let lu = m.lu();
        let mut z = vec![0.0; n];
        let mut f = vec![vec![0.0; d]; 3];
        let mut stage = vec![0.0; d];
        let mut prev_norm = f64::INFINITY;
        for _ in 0..12 {
            for i in 0..3 {
                for r in 0..d {
                    stage[r] = u[r] + z[i * d + r];
                }
                sys.rhs(s + radau::C[i] * h, &stage, &mut f[i]);
            }
            let mut g = DVector::<f64>::zeros(n);
            for i in 0..3 {
                for r in 0..d {
                    let mut acc = 0.0;
                    for j in 0..3 {
                        acc += radau::A[i][j] * f[j][r];
                    }
                    g[i * d + r] = -(z[i * d + r] - h * acc);
                }
            }
            let dz = lu.solve(&g)?;
            let mut norm = 0.0;
            for i in 0..n {
                z[i] += dz[i];
                let r = i % d;
                let sc = self.tol.abs + self.tol.rel * u[r].abs();
                norm += (dz[i] / sc).powi(2);
            }
            let norm = (norm / n as f64).sqrt();
            if !norm.is_finite() || norm > 2.0 * prev_norm {
                return None;
            }
            if norm <= 1e-3 {
                return Some((0..d).map(|r| u[r] + z[2 * d + r]).collect());
            }
            prev_norm = norm;
        }
        None
    }
}

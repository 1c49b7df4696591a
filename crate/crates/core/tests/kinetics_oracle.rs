use approx::assert_relative_eq;
use coagscale::kinetics::{
    c1_asymptotic, c1_tilde, fn_correction, solve_full_truncated, solve_monomer_bulk, solve_triangular_tau, MonomerSource,
    TAU_ASYMPTOTIC_MIN,
};
use coagscale::ode::Tolerance;
use coagscale::{InitialData, ModelParams};

/// Classical RK4 in physical time on `(x, y, tau)`.
fn rk4_monomer(n: i32, alpha: f64, x0: f64, y0: f64, t_end: f64, steps: usize) -> Vec<(f64, f64, f64, f64)> {
    let f = |u: [f64; 3]| {
        let xn = u[0].powi(n);
        [alpha - n as f64 * xn - u[0] * u[1], xn, u[0]]
    };
    let h = t_end / steps as f64;
    let mut u = [x0, y0, 0.0];
    let mut out = vec![(0.0, u[2], u[0], u[1])];
    for i in 0..steps {
        let k1 = f(u);
        let k2 = f([0, 1, 2].map(|k| u[k] + 0.5 * h * k1[k]));
        let k3 = f([0, 1, 2].map(|k| u[k] + 0.5 * h * k2[k]));
        let k4 = f([0, 1, 2].map(|k| u[k] + h * k3[k]));
        for k in 0..3 {
            u[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        out.push(((i + 1) as f64 * h, u[2], u[0], u[1]));
    }
    out
}

#[test]
fn trajectory_matches_fixed_step_rk4() {
    for (n, alpha, x0, y0) in [(2u32, 1.0, 0.0, 0.0), (3, 0.5, 0.3, 0.2)] {
        let params = ModelParams::new(n, alpha).unwrap();
        let mut data = InitialData::monomer_only(&params).with_c1(x0).unwrap();
        if y0 > 0.0 {
            data = InitialData::explicit(&params, &[(n as u64 + 1, y0)])
                .unwrap()
                .with_c1(x0)
                .unwrap();
        }
        let rk = rk4_monomer(n as i32, alpha, x0, y0, 60.0, 120_000);
        let tau_end = rk.last().unwrap().1;
        let traj = solve_monomer_bulk(&params, &data, tau_end, 1e-10).unwrap();
        for &(t, tau, x, y) in rk.iter().step_by(4000).skip(1) {
            let [tt, _, xx, yy] = traj.state_at(tau).unwrap();
            assert_relative_eq!(tt, t, max_relative = 1e-7);
            assert_relative_eq!(xx, x, max_relative = 1e-7);
            assert_relative_eq!(yy, y, max_relative = 1e-7, epsilon = 1e-12);
        }
    }
}

#[test]
fn monomers_overshoot_then_decay() {
    let params = ModelParams::new(2, 1.0).unwrap();
    let traj = solve_monomer_bulk(&params, &InitialData::monomer_only(&params), 1e3, 1e-10).unwrap();
    let xs: Vec<f64> = traj.nodes().map(|n| n.x).collect();
    let peak = xs.iter().cloned().fold(0.0, f64::max);
    let x_star = 0.5f64.sqrt();
    assert!(peak < x_star && peak > 0.5 * x_star);
    assert!(*xs.last().unwrap() < 0.1 * peak);
}

#[test]
fn long_time_monomer_law() {
    for n in [2u32, 3] {
        let params = ModelParams::new(n, 1.0).unwrap();
        let traj = solve_monomer_bulk(&params, &InitialData::monomer_only(&params), 1e6, 1e-10).unwrap();
        let nf = n as f64;
        if n == 2 {
            let c = c1_tilde(&traj, 1e4).unwrap();
            assert!((c * (nf * 1e4).powf(1.0 / nf) - 1.0).abs() < 0.05);
        }
        let mut prev_gap = f64::INFINITY;
        let mut prev_rem = f64::INFINITY;
        for tau in [1e3, 1e4, 1e5, 1e6] {
            let c = c1_tilde(&traj, tau).unwrap();
            let asym = c1_asymptotic(&params, tau, TAU_ASYMPTOTIC_MIN).unwrap();
            let gap = ((c - asym) / c).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
            let f = fn_correction(MonomerSource::Trajectory(&traj), &params, tau).unwrap();
            let rem = (f - (nf - 1.0) * (1.0 - 1.0 / nf) * tau.ln() / tau).abs() / (tau.ln() / tau);
            assert!(rem < prev_rem, "remainder ratio {rem} at tau {tau}");
            prev_rem = rem;
        }
    }
}

#[test]
fn truncated_mass_balance_and_monomer_agreement() {
    for n in [2u32, 3] {
        let params = ModelParams::new(n, 1.0).unwrap();
        let data = InitialData::monomer_only(&params);
        let times: Vec<f64> = (1..=40).map(|i| i as f64 * 0.25).collect();
        let sol = solve_full_truncated(&params, &data, 300, &times, Tolerance { rel: 1e-10, abs: 1e-18 }).unwrap();
        let traj = solve_monomer_bulk(&params, &data, *sol.tau.last().unwrap(), 1e-12).unwrap();
        for (i, &t) in times.iter().enumerate() {
            assert!(sol.mass_residual(i).abs() <= 1e-7 * t);
            if *sol.clusters[i].last().unwrap() < 1e-12 {
                let [tt, _, x, _] = traj.state_at(sol.tau[i]).unwrap();
                assert_relative_eq!(tt, t, max_relative = 1e-6);
                assert_relative_eq!(x, sol.c1[i], max_relative = 1e-6);
            }
        }
    }
}

#[test]
fn truncated_and_triangular_agree() {
    let params = ModelParams::new(3, 1.0).unwrap();
    let data = InitialData::explicit(&params, &[(3, 0.2), (4, 0.1)])
        .unwrap()
        .with_c1(0.1)
        .unwrap();
    let times = [1.0, 5.0, 20.0, 60.0];
    let sol = solve_full_truncated(&params, &data, 150, &times, Tolerance { rel: 1e-12, abs: 1e-20 }).unwrap();
    let traj = solve_monomer_bulk(&params, &data, *sol.tau.last().unwrap(), 1e-12).unwrap();
    let tri = solve_triangular_tau(&params, &data, &traj, 150, &sol.tau).unwrap();
    for i in 0..times.len() {
        let mx = sol.clusters[i].iter().cloned().fold(0.0, f64::max);
        for (a, b) in sol.clusters[i].iter().zip(&tri[i]) {
            if *a > 1e-10 * mx {
                assert_relative_eq!(*a, *b, max_relative = 1e-6);
            }
        }
    }
}

#[test]
fn trajectory_csv_has_header_and_rows() {
    let params = ModelParams::new(2, 1.0).unwrap();
    let traj = solve_monomer_bulk(&params, &InitialData::monomer_only(&params), 10.0, 1e-8).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,tau,x,y"));
    assert_eq!(lines.count(), traj.nodes().count());
}

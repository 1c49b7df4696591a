use approx::assert_relative_eq;
use coagscale::closedform::i2;
use coagscale::diagnostics::{
    check_lemma_rates, decomposition_check, fit_rate, fit_rate_asymptotic, g_factor, j1_residual, j_term, phi_continuous,
    prefactor_p, prefactor_p_direct, FnBackend, JContext, Verdict,
};
use coagscale::kinetics::solve_monomer_bulk;
use coagscale::model::make_power_law;
use coagscale::profiles::{phi2_at_zero, scaled_observable};
use coagscale::{InitialData, ModelParams, QuadratureSpec};
use proptest::prelude::*;

#[test]
fn phi_continuous_agrees_with_scaled_i2() {
    let q = QuadratureSpec::default();
    for n in [2u32, 3] {
        let params = ModelParams::new(n, 1.0).unwrap();
        let traj = solve_monomer_bulk(&params, &InitialData::monomer_only(&params), 60.0, 1e-10).unwrap();
        let tau = 50.0;
        for j in [n as u64, n as u64 + 10, n as u64 + 100] {
            let a = phi_continuous(j as f64, tau, &params, &traj, &q).unwrap();
            let b = scaled_observable(&params, tau, i2(j, tau, n, &traj, &q).unwrap()).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
    }
}

#[test]
fn decomposition_identity_holds() {
    let q = QuadratureSpec::default();
    let params = ModelParams::new(2, 1.0).unwrap();
    let data = make_power_law(1.0, 2.0, 1000, &params).unwrap();
    let traj = solve_monomer_bulk(&params, &data, 1e4, 1e-10).unwrap();
    let ctx = JContext {
        params: &params,
        traj: &traj,
        backend: FnBackend::Trajectory,
        spec: &q,
    };
    for (xi, tau) in [(1.0, 1e3), (-2.0, 300.0), (0.3, 1e4), (0.0, 50.0)] {
        let c = decomposition_check(&ctx, xi, tau).unwrap();
        assert!(c.rel_err < 1e-6, "xi {xi} tau {tau}: {}", c.rel_err);
    }
}

#[test]
fn prefactor_rate_at_unit_xi() {
    let a = (prefactor_p(2, 1.0, 1e4).unwrap() * 0.5f64.exp() - 1.0).abs();
    let b = (prefactor_p(2, 1.0, 1e6).unwrap() * 0.5f64.exp() - 1.0).abs();
    assert!((a / b / 10.0 - 1.0).abs() < 0.05, "{a} {b}");
    for (xi, tau) in [(0.0, 10.0), (-1.0, 50.0), (2.0, 1e5)] {
        assert_relative_eq!(
            prefactor_p(3, xi, tau).unwrap(),
            prefactor_p_direct(3, xi, tau).unwrap(),
            max_relative = 1e-10
        );
    }
}

#[test]
fn j1_limit_value() {
    let q = QuadratureSpec::default();
    let params = ModelParams::new(2, 1.0).unwrap();
    let traj = solve_monomer_bulk(&params, &InitialData::monomer_only(&params), 10.0, 1e-8).unwrap();
    let ctx = JContext {
        params: &params,
        traj: &traj,
        backend: FnBackend::Trajectory,
        spec: &q,
    };
    let j1 = j_term(1, 0.0, 1e4, &ctx).unwrap();
    assert!((j1 - phi2_at_zero(2)).abs() <= 0.5 * (-1e4f64 / 2.0).exp() + 1e-12);
    assert!(j1_residual(2, 0.0, 100.0, &q).unwrap() < 1e-20);
}

#[test]
fn g_bounded_past_largest_root() {
    for (n, xi) in [(2u32, 0.0f64), (2, -1.5), (3, 1.0)] {
        let nf = n as f64;
        let x_star = (0..2000)
            .map(|k| {
                let k = k as f64;
                -(k + 3.0) / (2.0 * (k + 2.0)) * xi
                    + ((k + 3.0).powi(2) / (4.0 * (k + 2.0).powi(2)) * xi * xi + (k + 3.0) / (k + 1.0) * nf).sqrt()
            })
            .fold(0.0f64, f64::max);
        for tau in [1e2f64, 1e4, 1e6] {
            let theta = tau.sqrt();
            for i in 0..200 {
                let x = x_star + (theta - x_star) * i as f64 / 200.0;
                if x >= theta {
                    continue;
                }
                let g = g_factor(n, x.powf(1.0 / nf), tau, xi).unwrap();
                assert!(g.abs() <= 1.0 + 1e-12, "n {n} xi {xi} tau {tau} x {x}: g = {g}");
            }
        }
    }
}

#[test]
fn j2_combination_decays_with_asymptotic_backend() {
    let q = QuadratureSpec::default();
    let params = ModelParams::new(2, 1.0).unwrap();
    let data = make_power_law(1.0, 2.0, 1000, &params).unwrap();
    let traj = solve_monomer_bulk(&params, &data, 1e6, 1e-10).unwrap();
    let ctx = JContext {
        params: &params,
        traj: &traj,
        backend: FnBackend::Asymptotic { tau_min: 1e2 },
        spec: &q,
    };
    let grid = [1e2, 1e3, 1e4, 1e5, 1e6];
    let report = check_lemma_rates(&ctx, &data, 0.5, &grid).unwrap();
    let j2 = report.checks.iter().find(|c| c.quantity.contains("J2")).unwrap();
    assert!(j2.fit.unwrap().exponent < 0.0);
    let j3 = report.checks.iter().find(|c| c.quantity == "|J3|").unwrap();
    assert_eq!(j3.verdict, Verdict::Pass);
    assert!(check_lemma_rates(&ctx, &data, 0.5, &[1e2, 1e3, 1e4]).is_err());
}

proptest! {
    #[test]
    fn fit_exact_power_laws(p in -3.0f64..3.0, a in 0.01f64..100.0, s0 in 1.5f64..10.0, with_log: bool) {
        let pts: Vec<_> = (0..6).map(|i| {
            let s = s0 * 3f64.powi(i);
            let v = a * s.powf(p) * if with_log { s.ln() } else { 1.0 };
            (s, v)
        }).collect();
        let f = fit_rate(&pts, with_log).unwrap();
        prop_assert!((f.exponent - p).abs() < 1e-10);
        prop_assert!((f.amplitude / a - 1.0).abs() < 1e-9);
        prop_assert!(f.r_squared > 1.0 - 1e-9 && f.r_squared <= 1.0);
    }

    #[test]
    fn fit_scale_equivariant(k in 1e-6f64..1e6, noise in proptest::collection::vec(0.5f64..2.0, 5)) {
        let pts: Vec<_> = noise.iter().enumerate().map(|(i, &z)| {
            let s = 10f64.powi(i as i32 + 1);
            (s, z * s.powf(-0.4))
        }).collect();
        let scaled: Vec<_> = pts.iter().map(|&(s, v)| (s, k * v)).collect();
        let f = fit_rate_asymptotic(&pts, false).unwrap();
        let g = fit_rate_asymptotic(&scaled, false).unwrap();
        prop_assert!((f.exponent - g.exponent).abs() < 1e-10);
        prop_assert!((g.amplitude / f.amplitude / k - 1.0).abs() < 1e-9);
    }
}

use approx::assert_relative_eq;
use coagscale::closedform::{c_tilde, delta_j, i1, i2, poisson_weight_log, s3, s4, ScalingPoint};
use coagscale::kinetics::{solve_monomer_bulk, MonomerTrajectory};
use coagscale::model::make_power_law;
use coagscale::{InitialData, ModelParams, QuadratureSpec};
use proptest::prelude::*;
use statrs::function::gamma::gamma_lr;

/// Root of `tau + xi sqrt(tau) = j` from the quadratic in `sqrt(tau)`.
fn tau_oracle(xi: f64, j: f64) -> f64 {
    let r = (-xi + (xi * xi + 4.0 * j).sqrt()) / 2.0;
    r * r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn delta_round_trip_and_sign(xi in -20.0f64..20.0, j in 1u64..1_000_000) {
        let p = ScalingPoint::new(j, xi, 0.0).unwrap();
        let jf = j as f64;
        prop_assert!((p.tau - jf * p.delta).abs() <= 1e-12 * p.tau);
        let back = p.tau + xi * p.tau.sqrt();
        prop_assert!((back - jf).abs() <= 1e-12 * jf.max(p.tau));
        prop_assert!((p.tau - tau_oracle(xi, jf)).abs() <= 1e-10 * p.tau.max(1e-300) || xi > 0.0);
        if xi > 0.0 {
            prop_assert!(p.delta < 1.0);
        } else if xi < 0.0 {
            prop_assert!(p.delta > 1.0);
        } else {
            prop_assert_eq!(p.delta, 1.0);
        }
    }

    #[test]
    fn delta_tends_to_one(xi in -5.0f64..5.0, j in 4u64..10_000_000) {
        prop_assume!(j as f64 >= 4.0 * xi * xi);
        let d = delta_j(xi, j, 0.0).unwrap();
        prop_assert!((d - 1.0).abs() <= (xi.abs() + 1.0) / (j as f64).sqrt());
    }

    #[test]
    fn i1_is_linear(a in 0.0f64..3.0, tau in 0.0f64..300.0, j in 2u64..400,
                    c1 in 0.0f64..2.0, c2 in 0.0f64..2.0, k1 in 2u64..200, k2 in 2u64..200) {
        let params = ModelParams::new(2, 1.0).unwrap();
        let d1 = InitialData::explicit(&params, &[(k1, c1), (k2 + 3, 0.5)]).unwrap();
        let d2 = InitialData::explicit(&params, &[(k2, c2)]).unwrap();
        let comb = InitialData::linear_combination(a, &d1, &d2).unwrap();
        let lhs = i1(j, tau, &comb);
        let rhs = a * i1(j, tau, &d1) + i1(j, tau, &d2);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (lhs.abs() + rhs.abs()) + 1e-300);
    }
}

#[test]
fn delta_guard() {
    assert!(delta_j(6.0, 9, 2.0).is_err());
    assert!(delta_j(1.0, 9, 2.0).is_ok());
}

#[test]
fn poisson_normalization() {
    for tau in [0.5f64, 7.0, 100.0, 1e4] {
        let hi = (tau + 40.0 * tau.sqrt()).ceil() as u64;
        let mut sum = coagscale::special::CompensatedSum::new();
        for m in 0..=hi {
            sum.add(poisson_weight_log(m, tau).exp());
        }
        assert!((sum.value() - 1.0).abs() < 1e-12, "tau {tau}: {}", sum.value());
    }
}

#[test]
fn i2_matches_incomplete_gamma() {
    let q = QuadratureSpec::default();
    for n in [2u32, 3] {
        let kappa: f64 = 0.7;
        let tr = MonomerTrajectory::constant(kappa, 2e4).unwrap();
        for m in [0u64, 1, 10, 100, 10_000] {
            for tau in [0.3 * m as f64 + 0.5, m as f64 + 1.0, 1.5 * m as f64 + 20.0] {
                let got = i2(m + n as u64, tau, n, &tr, &q).unwrap();
                let want = kappa.powi(n as i32 - 1) * gamma_lr(m as f64 + 1.0, tau);
                if want > 1e-250 {
                    assert_relative_eq!(got, want, max_relative = 1e-8);
                }
            }
        }
    }
}

#[test]
fn c_tilde_at_time_zero_is_initial_data() {
    let params = ModelParams::new(3, 1.0).unwrap();
    let data = InitialData::explicit(&params, &[(3, 0.25), (7, 0.5)]).unwrap();
    let tr = MonomerTrajectory::constant(0.4, 1.0).unwrap();
    let q = QuadratureSpec::default();
    for j in 3..10 {
        assert_eq!(c_tilde(j, 0.0, &data, &tr, &q).unwrap(), data.c0(j));
    }
}

#[test]
fn c_tilde_solves_the_hierarchy() {
    let params = ModelParams::new(2, 1.0).unwrap();
    let data = InitialData::explicit(&params, &[(2, 0.2), (6, 0.1)]).unwrap();
    let tr = solve_monomer_bulk(&params, &data, 80.0, 1e-11).unwrap();
    let q = QuadratureSpec::new(1e-12, 1e-300, 4000).unwrap();
    let h = 1e-3;
    for (j, tau) in [(3u64, 2.0), (8, 5.5), (20, 18.0), (40, 41.0), (60, 70.0)] {
        let c = |j, t| c_tilde(j, t, &data, &tr, &q).unwrap();
        let deriv = (c(j, tau + h) - c(j, tau - h)) / (2.0 * h);
        let rhs = c(j - 1, tau) - c(j, tau);
        let scale = c(j, tau).abs().max(c(j - 1, tau).abs());
        assert!((deriv - rhs).abs() <= 1e-5 * scale, "j {j} tau {tau}: {deriv} vs {rhs}");
    }
    // c_n is driven by c1^{n-1} instead of a smaller cluster
    let tau = 3.0;
    let d = (c_tilde(2, tau + h, &data, &tr, &q).unwrap() - c_tilde(2, tau - h, &data, &tr, &q).unwrap()) / (2.0 * h);
    let c1 = coagscale::kinetics::c1_tilde(&tr, tau).unwrap();
    assert!((d - (c1 - c_tilde(2, tau, &data, &tr, &q).unwrap())).abs() < 1e-6);
}

#[test]
fn monomer_only_c_n_positive() {
    let params = ModelParams::new(2, 1.0).unwrap();
    let data = InitialData::monomer_only(&params);
    let tr = solve_monomer_bulk(&params, &data, 10.0, 1e-10).unwrap();
    let q = QuadratureSpec::default();
    for tau in [1e-3, 0.5, 3.0, 10.0] {
        assert!(c_tilde(2, tau, &data, &tr, &q).unwrap() > 0.0);
    }
}

#[test]
fn split_sum_scalings() {
    let params = ModelParams::new(2, 1.0).unwrap();
    let grid: Vec<u64> = (8..=14).map(|e| 1u64 << e).collect();
    let theta_half = 0.25;

    let data = make_power_law(1.0, 2.0, 1 << 14, &params).unwrap();
    let ratios: Vec<f64> = grid
        .iter()
        .map(|&j| s3(j, 0.0, &data, &params).unwrap() / (j as f64).powf(theta_half - 1.0))
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo < 2.0, "S3 ratio spread {ratios:?}");

    let s4_scaled: Vec<f64> = grid
        .iter()
        .map(|&j| s4(j, 0.0, &data, &params).unwrap() * (j as f64).powf(0.25))
        .collect();
    let (lo, hi) = s4_scaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo < 2.0, "S4 ratio spread {s4_scaled:?}");

    // mu = 1: growth like log j
    let data = make_power_law(1.0, 1.0, 1 << 14, &params).unwrap();
    let s4_log: Vec<f64> = grid
        .iter()
        .map(|&j| s4(j, 0.0, &data, &params).unwrap() * (j as f64).powf(0.25))
        .collect();
    assert!(s4_log.windows(2).all(|w| w[1] > w[0]), "{s4_log:?}");
    let per_log: Vec<f64> = grid.iter().zip(&s4_log).map(|(&j, v)| v / (j as f64).ln()).collect();
    let (lo, hi) = per_log
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo < 1.5, "{per_log:?}");
}

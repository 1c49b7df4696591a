//! The four experiments. Each returns its computed data together with the
//! quantitative verdicts, and `write` methods put the artifacts on disk.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coagscale::closedform::{c_tilde, ScalingPoint};
use coagscale::diagnostics::{
    check_lemma_rates, decomposition_check, final_constant_report, fit_rate_asymptotic, DecompositionCheck, FinalConstantReport,
    FnBackend, JContext, LemmaReport, RateFit, Verdict as LemmaVerdict, MIN_R_SQUARED,
};
use coagscale::kinetics::{solve_full_truncated, solve_monomer_bulk, solve_triangular_tau, MonomerTrajectory};
use coagscale::profiles::{phi2, phi2_at_zero, scaled_observable, xi_grid};
use coagscale::{InitialData, ModelParams, Tail};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::plot;

/// A named quantitative check.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.pass)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct TrajectoryRow<'a> {
    t: f64,
    tau: f64,
    x: f64,
    y: f64,
    config_hash: &'a str,
}

fn write_trajectory(path: &Path, traj: &MonomerTrajectory, hash: &str) -> Result<()> {
    let rows: Vec<_> = traj
        .nodes()
        .map(|n| TrajectoryRow {
            t: n.t,
            tau: n.tau,
            x: n.x,
            y: n.y,
            config_hash: hash,
        })
        .collect();
    write_csv(path, &rows)
}

// ---------------------------------------------------------------- profile

#[derive(Debug, Clone, Serialize)]
pub struct ProfileCsvRow {
    pub xi: f64,
    pub n: u32,
    pub phi2: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileRun {
    pub config_hash: String,
    pub n_values: Vec<u32>,
    pub xi: Vec<f64>,
    pub rows: Vec<ProfileCsvRow>,
    pub verdicts: Vec<Verdict>,
}

pub fn run_profile_table(cfg: &ExperimentConfig) -> Result<ProfileRun> {
    cfg.expect_kind(ExperimentKind::ProfileTable)?;
    let hash = cfg.hash();
    let q = cfg.quadrature()?;
    let ns = cfg.experiment.n_values.clone().unwrap_or_else(|| vec![2, 3, 6, 12]);
    let r = &cfg.experiment.xi_range;
    let xs = xi_grid(r.lo, r.hi, r.step)?;
    let items: Vec<(u32, f64)> = ns.iter().flat_map(|&n| xs.iter().map(move |&x| (n, x))).collect();
    let rows = items
        .par_iter()
        .map(|&(n, xi)| {
            Ok(ProfileCsvRow {
                xi,
                n,
                phi2: phi2(n, xi, &q)?,
                config_hash: hash.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut verdicts = Vec::new();
    for &n in &ns {
        let at_zero = phi2(n, 0.0, &q)?;
        let identity = phi2_at_zero(n);
        let err = (at_zero - identity).abs();
        verdicts.push(Verdict::new(
            format!("phi2 gamma identity n={n}"),
            err <= 1e-8,
            format!("|Phi(0) - identity| = {err:.3e}"),
        ));
        let positive = rows.iter().filter(|row| row.n == n).all(|row| row.phi2 > 0.0);
        verdicts.push(Verdict::new(
            format!("phi2 positive n={n}"),
            positive,
            format!("{} grid points", xs.len()),
        ));
        let at_four = phi2(n, 4.0, &q)?;
        let bound = (-8.0f64).exp() * identity;
        verdicts.push(Verdict::new(
            format!("phi2 decay at xi=4 n={n}"),
            at_four < bound,
            format!("Phi(4) = {at_four:.3e}, e^-8 Phi(0) = {bound:.3e}"),
        ));
    }
    Ok(ProfileRun {
        config_hash: hash,
        n_values: ns,
        xi: xs,
        rows,
        verdicts,
    })
}

impl ProfileRun {
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out)?;
        let long = out.join("profile.csv");
        write_csv(&long, &self.rows)?;

        let wide = out.join("profile_wide.csv");
        let mut w = csv::Writer::from_path(&wide)?;
        let mut header = vec!["xi".to_string()];
        header.extend(self.n_values.iter().map(|n| format!("phi2_n{n}")));
        header.push("config_hash".into());
        w.write_record(&header)?;
        for (i, xi) in self.xi.iter().enumerate() {
            let mut rec = vec![xi.to_string()];
            for k in 0..self.n_values.len() {
                rec.push(self.rows[k * self.xi.len() + i].phi2.to_string());
            }
            rec.push(self.config_hash.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;

        let summary = out.join("profile_summary.json");
        write_json(
            &summary,
            &serde_json::json!({ "config_hash": self.config_hash, "verdicts": self.verdicts }),
        )?;
        let script = out.join("plot_profile.py");
        write_text(&script, &plot::profile_script())?;
        Ok(vec![long, wide, summary, script])
    }
}

// ---------------------------------------------------------------- converge-xi

/// Expected decay of `|F - Phi_{2,n}|` along fixed `xi` for given data.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Prediction {
    pub exponent: f64,
    pub with_log: bool,
    pub tolerance: f64,
}

pub fn predicted_rate(params: &ModelParams, data: &InitialData) -> Option<Prediction> {
    let nf = params.nf();
    let base = -0.5 / nf;
    if data.is_monomer_only() {
        return Some(Prediction {
            exponent: -0.5,
            with_log: true,
            tolerance: 0.15,
        });
    }
    match data.tail {
        Tail::PowerLaw { mu, .. } if mu > 1.0 => Some(Prediction {
            exponent: base,
            with_log: false,
            tolerance: 0.1,
        }),
        Tail::PowerLaw { mu: 1.0, .. } => Some(Prediction {
            exponent: base,
            with_log: true,
            tolerance: 0.1,
        }),
        Tail::PowerLaw { mu, .. } if mu > 1.0 - 1.0 / nf => Some(Prediction {
            exponent: base + 0.5 * (1.0 - mu),
            with_log: false,
            tolerance: 0.1,
        }),
        Tail::PowerLaw { .. } => None,
        _ => Some(Prediction {
            exponent: base,
            with_log: false,
            tolerance: 0.1,
        }),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeRow {
    pub n: u32,
    pub alpha: f64,
    pub mu: Option<f64>,
    pub xi: f64,
    pub j: u64,
    pub tau: f64,
    pub c_tilde: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub phi2: f64,
    pub abs_err: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct XiFit {
    pub xi: f64,
    pub fit: Option<RateFit>,
    pub prediction: Option<Prediction>,
    pub pass: Option<bool>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeRun {
    pub config_hash: String,
    pub tau_horizon: f64,
    pub rows: Vec<ConvergeRow>,
    pub fits: Vec<XiFit>,
    pub verdicts: Vec<Verdict>,
    #[serde(skip)]
    pub trajectory: MonomerTrajectory,
}

pub fn run_converge_xi(cfg: &ExperimentConfig) -> Result<ConvergeRun> {
    cfg.expect_kind(ExperimentKind::ConvergeXi)?;
    let hash = cfg.hash();
    let params = cfg.params()?;
    let data = cfg.initial_data()?;
    let q = cfg.quadrature()?;
    let sizes = cfg.experiment.j_grid.sizes()?;
    let xis = &cfg.experiment.xi_values;
    if sizes.first().is_some_and(|&j| j < params.n as u64) {
        bail!("j_grid starts below the critical size n = {}", params.n);
    }
    let mut points = Vec::with_capacity(xis.len() * sizes.len());
    for &xi in xis {
        for &j in &sizes {
            points.push(ScalingPoint::new(j, xi, params.nf())?);
        }
    }
    let needed = points.iter().map(|p| p.tau).fold(0.0, f64::max);
    let j_max = *sizes.last().expect("nonempty grid") as f64;
    let horizon = (2.0 * j_max).max(1.05 * needed);
    let traj = solve_monomer_bulk(&params, &data, horizon, cfg.experiment.tolerances.trajectory_rel)?;
    let limits = xis
        .iter()
        .map(|&xi| Ok(phi2(params.n, xi, &q)?))
        .collect::<Result<Vec<f64>>>()?;
    let mu = match data.tail {
        Tail::PowerLaw { mu, .. } => Some(mu),
        _ => None,
    };
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let c = c_tilde(p.j, p.tau, &data, &traj, &q)?;
            let f = scaled_observable(&params, p.tau, c)?;
            let limit = limits[i / sizes.len()];
            Ok(ConvergeRow {
                n: params.n,
                alpha: params.alpha,
                mu,
                xi: p.xi,
                j: p.j,
                tau: p.tau,
                c_tilde: c,
                f,
                phi2: limit,
                abs_err: (f - limit).abs(),
                config_hash: hash.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let prediction = predicted_rate(&params, &data);
    let mut fits = Vec::new();
    let mut verdicts = Vec::new();
    for (k, &xi) in xis.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows[k * sizes.len()..(k + 1) * sizes.len()]
            .iter()
            .map(|r| (r.j as f64, r.abs_err))
            .collect();
        let with_log = prediction.is_some_and(|p| p.with_log);
        let (fit, note) = match fit_rate_asymptotic(&pts, with_log) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let pass = prediction
            .map(|p| fit.is_some_and(|f| f.r_squared > MIN_R_SQUARED && (f.exponent - p.exponent).abs() <= p.tolerance));
        if let Some(ok) = pass {
            let p = prediction.expect("pass implies prediction");
            let detail = match fit {
                Some(f) => format!(
                    "exponent {:.4} (r2 {:.4}) vs predicted {:.4} +/- {}",
                    f.exponent, f.r_squared, p.exponent, p.tolerance
                ),
                None => format!("no fit: {}", note.clone().unwrap_or_default()),
            };
            verdicts.push(Verdict::new(format!("convergence rate xi={xi}"), ok, detail));
        }
        fits.push(XiFit {
            xi,
            fit,
            prediction,
            pass,
            note,
        });
    }
    Ok(ConvergeRun {
        config_hash: hash,
        tau_horizon: horizon,
        rows,
        fits,
        verdicts,
        trajectory: traj,
    })
}

impl ConvergeRun {
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out)?;
        let table = out.join("converge.csv");
        write_csv(&table, &self.rows)?;
        let fits = out.join("converge_fits.json");
        write_json(&fits, self)?;
        let traj = out.join("trajectory.csv");
        write_trajectory(&traj, &self.trajectory, &self.config_hash)?;
        let script = out.join("plot_converge.py");
        write_text(&script, &plot::converge_script())?;
        Ok(vec![table, fits, traj, script])
    }
}

// ---------------------------------------------------------------- diagnostics

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRun {
    pub config_hash: String,
    pub n: u32,
    pub alpha: f64,
    pub nu0: f64,
    pub lemmas: Vec<LemmaReport>,
    pub decomposition: Vec<DecompositionCheck>,
    pub final_constant: Vec<FinalConstantReport>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Serialize)]
struct RateRow<'a> {
    xi: f64,
    quantity: &'a str,
    tau: f64,
    value: f64,
    config_hash: &'a str,
}

pub fn run_diagnostics(cfg: &ExperimentConfig) -> Result<DiagnosticsRun> {
    cfg.expect_kind(ExperimentKind::Diagnostics)?;
    let hash = cfg.hash();
    let params = cfg.params()?;
    let data = cfg.initial_data()?;
    let q = cfg.quadrature()?;
    let grid = &cfg.experiment.tau_grid;
    let tau_max = grid.iter().copied().fold(0.0, f64::max);
    if !(tau_max > 0.0) {
        bail!("diagnostics need a positive tau_grid");
    }
    let traj = solve_monomer_bulk(&params, &data, tau_max, cfg.experiment.tolerances.trajectory_rel)?;
    let ctx = JContext {
        params: &params,
        traj: &traj,
        backend: FnBackend::Trajectory,
        spec: &q,
    };
    let nu0 = coagscale::model::nu0(&data);
    let xis = &cfg.experiment.xi_values;

    let per_xi = xis
        .par_iter()
        .map(|&xi| {
            let lemma = check_lemma_rates(&ctx, &data, xi, grid)?;
            let mut decomp = Vec::new();
            for &tau in grid {
                if tau + xi * tau.sqrt() - params.nf() + 1.0 > 0.0 && tau > 0.0 {
                    decomp.push(decomposition_check(&ctx, xi, tau)?);
                }
            }
            let fin = final_constant_report(&params, &data, &traj, xi, grid, &q)?;
            Ok((lemma, decomp, fin))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut run = DiagnosticsRun {
        config_hash: hash,
        n: params.n,
        alpha: params.alpha,
        nu0,
        lemmas: Vec::new(),
        decomposition: Vec::new(),
        final_constant: Vec::new(),
        verdicts: Vec::new(),
    };
    let tol = cfg.experiment.tolerances.decomposition_rel;
    for (lemma, decomp, fin) in per_xi {
        for c in &lemma.checks {
            let detail = match (&c.fit, c.verdict) {
                (_, LemmaVerdict::BelowFloor) => "below quadrature floor".to_string(),
                (Some(f), _) => format!(
                    "exponent {:.4} (r2 {:.4}), expected in [{}, {}]",
                    f.exponent, f.r_squared, c.expected_min, c.expected_max
                ),
                (None, _) => format!("no fit: {}", c.note.clone().unwrap_or_default()),
            };
            run.verdicts.push(Verdict::new(
                format!("{} xi={}", c.quantity, lemma.xi),
                c.verdict != LemmaVerdict::Fail,
                detail,
            ));
        }
        let worst = decomp.iter().map(|d| d.rel_err).fold(0.0, f64::max);
        run.verdicts.push(Verdict::new(
            format!("decomposition identity xi={}", lemma.xi),
            worst <= tol,
            format!("max relative error {worst:.3e} over {} points", decomp.len()),
        ));
        if nu0 > 0.0 {
            let last = fin.rel_deviation.last().copied().unwrap_or(f64::INFINITY);
            run.verdicts.push(Verdict::new(
                format!("final constant xi={}", fin.xi),
                fin.monotone_toward_target && last <= 0.25,
                format!(
                    "target {:.5}, final deviation {:.1}%, monotone {}",
                    fin.target,
                    100.0 * last,
                    fin.monotone_toward_target
                ),
            ));
        }
        run.lemmas.push(lemma);
        run.decomposition.extend(decomp);
        run.final_constant.push(fin);
    }
    Ok(run)
}

impl DiagnosticsRun {
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out)?;
        let report = out.join("diagnostics.json");
        write_json(&report, self)?;
        let rates = out.join("diagnostics_rates.csv");
        let mut rows = Vec::new();
        for l in &self.lemmas {
            for c in &l.checks {
                for (&tau, &value) in c.grid.iter().zip(&c.values) {
                    rows.push(RateRow {
                        xi: l.xi,
                        quantity: &c.quantity,
                        tau,
                        value,
                        config_hash: &self.config_hash,
                    });
                }
            }
        }
        write_csv(&rates, &rows)?;
        let script = out.join("plot_diagnostics.py");
        write_text(&script, &plot::diagnostics_script())?;
        Ok(vec![report, rates, script])
    }
}

// ---------------------------------------------------------------- oracle

#[derive(Debug, Clone, Serialize)]
pub struct OracleCase {
    pub n: u32,
    pub taus: Vec<f64>,
    pub j_max: u64,
    pub truncation: u64,
    pub compared_values: usize,
    pub truncated_vs_triangular: f64,
    pub closed_form_vs_triangular: f64,
    pub truncated_vs_closed_form: f64,
    pub monomer_vs_truncated: f64,
    pub mass_residual: f64,
    pub tau0_roundtrip_exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRun {
    pub config_hash: String,
    pub cases: Vec<OracleCase>,
    pub verdicts: Vec<Verdict>,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / a.abs().max(b.abs())).abs()
    }
}

fn oracle_case(cfg: &ExperimentConfig, n: u32) -> Result<OracleCase> {
    let params = ModelParams::new(n, cfg.model.alpha)?;
    let data = cfg.initial_data_for(&params)?;
    let q = cfg.quadrature()?;
    let tol = &cfg.experiment.tolerances;
    let truncation = cfg.experiment.truncation;
    let j_max = cfg.experiment.j_grid.j_max.min(truncation / 2);
    if j_max < n as u64 {
        bail!("oracle comparison range below critical size");
    }
    let mut taus: Vec<f64> = cfg.experiment.tau_grid.iter().copied().filter(|&t| t > 0.0).collect();
    taus.sort_by(f64::total_cmp);
    let Some(&tau_top) = taus.last() else {
        bail!("oracle check needs positive tau values");
    };
    if tau_top > 100.0 {
        bail!("oracle check runs at validation scale (tau <= 100), got {tau_top}");
    }
    let traj = solve_monomer_bulk(&params, &data, 1.01 * tau_top, tol.trajectory_rel)?;
    let times = taus.iter().map(|&t| Ok(traj.state_at(t)?[0])).collect::<Result<Vec<_>>>()?;
    let sol = solve_full_truncated(&params, &data, truncation, &times, cfg.truncated_tolerance())?;
    let tri = solve_triangular_tau(&params, &data, &traj, j_max, &sol.tau)?;

    let mut case = OracleCase {
        n,
        taus: sol.tau.clone(),
        j_max,
        truncation,
        compared_values: 0,
        truncated_vs_triangular: 0.0,
        closed_form_vs_triangular: 0.0,
        truncated_vs_closed_form: 0.0,
        monomer_vs_truncated: 0.0,
        mass_residual: 0.0,
        tau0_roundtrip_exact: true,
    };
    let js: Vec<u64> = (n as u64..=j_max).collect();
    for (i, &tau) in sol.tau.iter().enumerate() {
        let closed = js
            .par_iter()
            .map(|&j| Ok(c_tilde(j, tau, &data, &traj, &q)?))
            .collect::<Result<Vec<f64>>>()?;
        let scale = js.iter().map(|&j| sol.c(j, i)).fold(0.0, f64::max);
        for (k, &j) in js.iter().enumerate() {
            let (a, b, c) = (sol.c(j, i), tri[i][k], closed[k]);
            if a.max(b).max(c) < 1e-10 * scale {
                continue;
            }
            case.compared_values += 1;
            case.truncated_vs_triangular = case.truncated_vs_triangular.max(rel(a, b));
            case.closed_form_vs_triangular = case.closed_form_vs_triangular.max(rel(c, b));
            case.truncated_vs_closed_form = case.truncated_vs_closed_form.max(rel(a, c));
        }
        let x = traj.state_at(tau.min(traj.tau_max()))?[2];
        case.monomer_vs_truncated = case.monomer_vs_truncated.max(rel(x, sol.c1[i]));
        case.mass_residual = case
            .mass_residual
            .max(sol.mass_residual(i).abs() / (params.alpha * sol.times[i]));
    }
    for &j in &js {
        if c_tilde(j, 0.0, &data, &traj, &q)? != data.c0(j) {
            case.tau0_roundtrip_exact = false;
        }
    }
    Ok(case)
}

pub fn run_oracle_check(cfg: &ExperimentConfig) -> Result<OracleRun> {
    cfg.expect_kind(ExperimentKind::OracleCheck)?;
    let ns = cfg.experiment.n_values.clone().unwrap_or_else(|| vec![cfg.model.n]);
    let cases = ns.par_iter().map(|&n| oracle_case(cfg, n)).collect::<Result<Vec<_>>>()?;
    let tol = &cfg.experiment.tolerances;
    let mut verdicts = Vec::new();
    for c in &cases {
        let worst = c
            .truncated_vs_triangular
            .max(c.closed_form_vs_triangular)
            .max(c.truncated_vs_closed_form);
        verdicts.push(Verdict::new(
            format!("three-way agreement n={}", c.n),
            worst <= tol.oracle_rel && c.compared_values > 0,
            format!("max relative discrepancy {worst:.3e} over {} values", c.compared_values),
        ));
        verdicts.push(Verdict::new(
            format!("mass balance n={}", c.n),
            c.mass_residual <= tol.mass_rel,
            format!("max residual / (alpha t) = {:.3e}", c.mass_residual),
        ));
        verdicts.push(Verdict::new(
            format!("tau=0 round trip n={}", c.n),
            c.tau0_roundtrip_exact,
            "c_tilde(j, 0) == c_j(0)",
        ));
    }
    Ok(OracleRun {
        config_hash: cfg.hash(),
        cases,
        verdicts,
    })
}

impl OracleRun {
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out)?;
        let report = out.join("oracle.json");
        write_json(&report, self)?;
        Ok(vec![report])
    }
}

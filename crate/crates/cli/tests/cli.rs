use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coagscale_cli::config::ExperimentConfig;
use proptest::prelude::*;
use serde_json::json;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coagscale"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn printed_hash(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout);
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("config "))
        .expect("hash line")
        .to_string()
}

#[test]
fn profile_rows_carry_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("profile.json");
    let out = run(&[
        "profile",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let hash = printed_hash(&out);
    let mut reader = csv::Reader::from_path(dir.path().join("profile.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["xi", "n", "phi2", "config_hash"]);
    let mut count = 0;
    for rec in reader.records() {
        assert_eq!(&rec.unwrap()[3], hash.as_str());
        count += 1;
    }
    assert_eq!(count, 4 * 201);
    assert!(dir.path().join("plot_profile.py").exists());
}

#[test]
fn converge_outputs_are_deterministic() {
    let cfg = configs().join("converge_monomer.json");
    let small = [
        "--override",
        "experiment.j_grid.j_min=16",
        "--override",
        "experiment.j_grid.j_max=2048",
        "--override",
        "experiment.xi_values=[-0.5,0.0]",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let mut args = vec![
            "converge-xi",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
        ];
        args.extend(small);
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    for name in ["converge.csv", "converge_fits.json", "trajectory.csv", "plot_converge.py"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let mut reader = csv::Reader::from_path(a.path().join("converge.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "n",
            "alpha",
            "mu",
            "xi",
            "j",
            "tau",
            "c_tilde",
            "F",
            "phi2",
            "abs_err",
            "config_hash"
        ]
    );
    let traj = fs::read_to_string(a.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,tau,x,y,config_hash\n"));
}

#[test]
fn failing_verdict_exits_one() {
    // the prefactor decays like 1/tau at xi = 0, outside the half-power window
    let cfg = configs().join("diagnostics.json");
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "diagnostics",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--override",
        "experiment.xi_values=[0.0]",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(report["config_hash"].as_str().unwrap(), printed_hash(&out));
}

#[test]
fn oracle_passes_and_writes_json() {
    let cfg = configs().join("oracle.json");
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "oracle",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert_eq!(report["cases"].as_array().unwrap().len(), 2);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let missing = run(&["profile", "--config", "/nonexistent/config.json", "--out", d]);
    assert_eq!(missing.status.code(), Some(2));

    let cfg = configs().join("profile.json");
    let mismatch = run(&["oracle", "--config", cfg.to_str().unwrap(), "--out", d]);
    assert_eq!(mismatch.status.code(), Some(2));

    let bad_key = run(&[
        "profile",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        d,
        "--override",
        "model.beta=1",
    ]);
    assert_eq!(bad_key.status.code(), Some(2));

    let oracle = configs().join("oracle.json");
    let too_late = run(&[
        "oracle",
        "--config",
        oracle.to_str().unwrap(),
        "--out",
        d,
        "--override",
        "experiment.tau_grid=[500.0]",
    ]);
    assert_eq!(too_late.status.code(), Some(2));
}

#[test]
fn override_changes_hash() {
    let cfg = configs().join("profile.json");
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let base = run(&[
        "profile",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        d,
        "--override",
        "experiment.n_values=[2]",
    ]);
    let other = run(&[
        "profile",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        d,
        "--override",
        "experiment.n_values=[3]",
    ]);
    assert_ne!(printed_hash(&base), printed_hash(&other));
}

proptest! {
    #[test]
    fn override_sets_value_and_hash_tracks_it(alpha in 0.01f64..100.0, n in 2u32..20) {
        let root = json!({"model": {"n": 2, "alpha": 1.0}});
        let cfg = ExperimentConfig::from_value(root.clone(), &[format!("model.alpha={alpha}"), format!("model.n={n}")]).unwrap();
        prop_assert_eq!(cfg.model.alpha, alpha);
        prop_assert_eq!(cfg.model.n, n);
        let direct = ExperimentConfig::from_value(json!({"model": {"n": n, "alpha": alpha}}), &[]).unwrap();
        prop_assert_eq!(cfg.hash(), direct.hash());
    }
}

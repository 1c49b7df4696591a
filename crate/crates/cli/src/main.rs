use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use coagscale_cli::config::{ExperimentConfig, ExperimentKind};
use coagscale_cli::runs::{self, Verdict};

#[derive(Parser)]
#[command(
    name = "coagscale",
    version,
    about = "Scaling experiments for nucleation-limited coagulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the inner similarity profile.
    Profile(Common),
    /// Convergence of the scaled observable along fixed xi.
    ConvergeXi(Common),
    /// Rates of the decomposition terms and the final constant.
    Diagnostics(Common),
    /// Cross-check the closed form against direct integration.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config entry, e.g. `model.alpha=2` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(command: Command) -> Result<Vec<Verdict>> {
    let (kind, common) = match command {
        Command::Profile(c) => (ExperimentKind::ProfileTable, c),
        Command::ConvergeXi(c) => (ExperimentKind::ConvergeXi, c),
        Command::Diagnostics(c) => (ExperimentKind::Diagnostics, c),
        Command::Oracle(c) => (ExperimentKind::OracleCheck, c),
    };
    let mut cfg = ExperimentConfig::load(&common.config, &common.overrides)?;
    cfg.experiment.kind.get_or_insert(kind);
    let out = &common.out;
    let (files, verdicts) = match kind {
        ExperimentKind::ProfileTable => {
            let run = runs::run_profile_table(&cfg)?;
            (run.write(out)?, run.verdicts)
        }
        ExperimentKind::ConvergeXi => {
            let run = runs::run_converge_xi(&cfg)?;
            (run.write(out)?, run.verdicts)
        }
        ExperimentKind::Diagnostics => {
            let run = runs::run_diagnostics(&cfg)?;
            (run.write(out)?, run.verdicts)
        }
        ExperimentKind::OracleCheck => {
            let run = runs::run_oracle_check(&cfg)?;
            (run.write(out)?, run.verdicts)
        }
    };
    println!("config {}", cfg.hash());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(verdicts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(verdicts) => {
            for v in &verdicts {
                println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            if runs::all_pass(&verdicts) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

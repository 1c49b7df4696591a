//! Experiment configuration: JSON document, dotted-path overrides, and the
//! hash stamped on every output row.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use coagscale::model::{make_power_law, nu0};
use coagscale::ode::Tolerance;
use coagscale::{InitialData, ModelParams, QuadratureSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: u32,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    #[default]
    MonomerOnly,
    PowerLaw,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub kind: InitialKind,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(rename = "K_cut", default)]
    pub k_cut: Option<u64>,
    #[serde(default)]
    pub explicit: Vec<(u64, f64)>,
    #[serde(default)]
    pub c1_0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ProfileTable,
    ConvergeXi,
    Diagnostics,
    OracleCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ProfileTable => "profile-table",
            Self::ConvergeXi => "converge-xi",
            Self::Diagnostics => "diagnostics",
            Self::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JGrid {
    pub j_min: u64,
    pub j_max: u64,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_factor() -> f64 {
    2.0
}

impl JGrid {
    /// Geometric sizes `j_min * factor^k` up to `j_max`, rounded and deduplicated.
    pub fn sizes(&self) -> Result<Vec<u64>> {
        if !(self.factor > 1.0) || self.j_min == 0 || self.j_max < self.j_min {
            bail!(
                "bad j_grid: j_min {}, j_max {}, factor {}",
                self.j_min,
                self.j_max,
                self.factor
            );
        }
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let j = (self.j_min as f64 * self.factor.powi(k)).round() as u64;
            if j > self.j_max {
                break;
            }
            if out.last() != Some(&j) {
                out.push(j);
            }
            k += 1;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub trajectory_rel: f64,
    pub truncated_rel: f64,
    pub quad_rel: f64,
    pub quad_abs: f64,
    pub max_subdivisions: usize,
    /// Largest relative disagreement accepted between independent solvers.
    pub oracle_rel: f64,
    /// Largest mass-balance residual relative to `alpha t`.
    pub mass_rel: f64,
    pub decomposition_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            trajectory_rel: 1e-10,
            truncated_rel: 1e-8,
            quad_rel: 1e-10,
            quad_abs: 1e-300,
            max_subdivisions: 2000,
            oracle_rel: 1e-6,
            mass_rel: 1e-7,
            decomposition_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    #[serde(default = "default_xi_values")]
    pub xi_values: Vec<f64>,
    #[serde(default = "default_j_grid")]
    pub j_grid: JGrid,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Critical sizes tabulated by the profile run (and checked by the oracle run).
    #[serde(default)]
    pub n_values: Option<Vec<u32>>,
    #[serde(default = "default_xi_range")]
    pub xi_range: XiRange,
    /// Truncation size of the full system in the oracle run.
    #[serde(default = "default_truncation")]
    pub truncation: u64,
}

fn default_xi_values() -> Vec<f64> {
    vec![-1.0, -0.5, 0.0, 0.5, 1.0]
}
fn default_j_grid() -> JGrid {
    JGrid {
        j_min: 128,
        j_max: 16384,
        factor: 2.0,
    }
}
fn default_tau_grid() -> Vec<f64> {
    vec![1e2, 1e3, 1e4, 1e5, 1e6]
}
fn default_xi_range() -> XiRange {
    XiRange {
        lo: -6.0,
        hi: 4.0,
        step: 0.05,
    }
}
fn default_truncation() -> u64 {
    200
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: None,
            xi_values: default_xi_values(),
            j_grid: default_j_grid(),
            tau_grid: default_tau_grid(),
            tolerances: Tolerances::default(),
            n_values: None,
            xi_range: default_xi_range(),
            truncation: default_truncation(),
        }
    }
}

/// Set `path` (dot separated) inside `root` to `raw`, parsed as JSON when possible.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override path `{path}` has an empty component");
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("override path `{path}` crosses a non-object"))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| anyhow!("override path `{path}` crosses a non-object"))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_value(mut root: Value, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: Self = serde_json::from_value(root).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let root: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Self::from_value(root, overrides)
    }

    fn validate(&self) -> Result<()> {
        self.params()?;
        let data = self.initial_data()?;
        if self.experiment.xi_values.iter().any(|x| !x.is_finite()) {
            bail!("xi_values must be finite");
        }
        if self.experiment.tau_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            bail!("tau_grid must hold finite nonnegative values");
        }
        if let (InitialKind::PowerLaw, Some(k)) = (self.initial.kind, data.max_size()) {
            if self.experiment.j_grid.j_max > k {
                bail!(
                    "j_grid reaches {} beyond the power-law cut-off K_cut = {k}",
                    self.experiment.j_grid.j_max
                );
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.model.n, self.model.alpha)?)
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        self.initial_data_for(&self.params()?)
    }

    /// The configured initial data built for another critical size.
    pub fn initial_data_for(&self, params: &ModelParams) -> Result<InitialData> {
        let params = *params;
        let init = &self.initial;
        let data = match init.kind {
            InitialKind::MonomerOnly => InitialData::monomer_only(&params),
            InitialKind::PowerLaw => {
                let rho = init.rho.ok_or_else(|| anyhow!("power-law data needs initial.rho"))?;
                let mu = init.mu.ok_or_else(|| anyhow!("power-law data needs initial.mu"))?;
                let k = init.k_cut.ok_or_else(|| anyhow!("power-law data needs initial.K_cut"))?;
                make_power_law(rho, mu, k, &params)?
            }
            InitialKind::Explicit => InitialData::explicit(&params, &init.explicit)?,
        };
        Ok(data.with_c1(init.c1_0)?)
    }

    pub fn nu0(&self) -> Result<f64> {
        Ok(nu0(&self.initial_data()?))
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec> {
        let t = &self.experiment.tolerances;
        Ok(QuadratureSpec::new(t.quad_rel, t.quad_abs, t.max_subdivisions)?)
    }

    pub fn truncated_tolerance(&self) -> Tolerance {
        let rel = self.experiment.tolerances.truncated_rel;
        Tolerance { rel, abs: rel * 1e-10 }
    }

    /// Check that the configured kind (if any) matches the subcommand.
    pub fn expect_kind(&self, kind: ExperimentKind) -> Result<()> {
        match self.experiment.kind {
            Some(k) if k != kind => bail!("config is for `{}` but `{}` was requested", k.name(), kind.name()),
            _ => Ok(()),
        }
    }

    /// First 16 hex digits of the SHA-256 of the normalized configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

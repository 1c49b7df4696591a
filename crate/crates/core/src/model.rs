//! Model parameters and finite descriptions of the initial cluster distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::CompensatedSum;

/// Critical cluster size `n` and monomer deposition rate `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u32,
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(n: u32, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!("critical size n must be >= 2, got {n}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Validation(format!(
                "deposition rate alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self { n, alpha })
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Exponent `(n-1)/n` that recurs throughout the scaling laws.
    pub fn theta(&self) -> f64 {
        (self.nf() - 1.0) / self.nf()
    }
}

/// Initial concentrations of the clusters of size `j >= n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Tail {
    MonomerOnly,
    /// `c_j(0) = rho j^{-mu}` for `n <= j <= k_cut`, zero beyond.
    PowerLaw {
        rho: f64,
        mu: f64,
        k_cut: u64,
    },
    /// Sorted `(j, c_j(0))` pairs, `j >= n`, each size at most once.
    Explicit(Vec<(u64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    n: u32,
    pub c1_0: f64,
    pub tail: Tail,
}

impl InitialData {
    /// Bare facet: no clusters, no monomers.
    pub fn monomer_only(params: &ModelParams) -> Self {
        Self {
            n: params.n,
            c1_0: 0.0,
            tail: Tail::MonomerOnly,
        }
    }

    pub fn explicit(params: &ModelParams, entries: &[(u64, f64)]) -> Result<Self> {
        let mut sorted: Vec<(u64, f64)> = Vec::with_capacity(entries.len());
        for &(j, c) in entries {
            if j < params.n as u64 {
                return Err(Error::Validation(format!(
                    "explicit entry j = {j} below critical size {}",
                    params.n
                )));
            }
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Validation(format!(
                    "concentration c_{j}(0) = {c} must be finite and >= 0"
                )));
            }
            sorted.push((j, c));
        }
        sorted.sort_by_key(|e| e.0);
        // merge repeated sizes by summing
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(sorted.len());
        for (j, c) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += c,
                _ => merged.push((j, c)),
            }
        }
        Ok(Self {
            n: params.n,
            c1_0: 0.0,
            tail: Tail::Explicit(merged),
        })
    }

    pub fn with_c1(mut self, c1_0: f64) -> Result<Self> {
        if !(c1_0 >= 0.0 && c1_0.is_finite()) {
            return Err(Error::Validation(format!("c1(0) = {c1_0} must be finite and >= 0")));
        }
        self.c1_0 = c1_0;
        Ok(self)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn is_monomer_only(&self) -> bool {
        match &self.tail {
            Tail::MonomerOnly => true,
            Tail::Explicit(e) => e.iter().all(|&(_, c)| c == 0.0),
            Tail::PowerLaw { .. } => false,
        }
    }

    /// `c_j(0)` for `j >= n`.
    pub fn c0(&self, j: u64) -> f64 {
        match &self.tail {
            Tail::MonomerOnly => 0.0,
            Tail::PowerLaw { rho, mu, k_cut } => {
                if j >= self.n as u64 && j <= *k_cut {
                    rho * (j as f64).powf(-mu)
                } else {
                    0.0
                }
            }
            Tail::Explicit(e) => e.binary_search_by_key(&j, |p| p.0).map(|i| e[i].1).unwrap_or(0.0),
        }
    }

    /// Largest size carrying a nonzero concentration, if any.
    pub fn max_size(&self) -> Option<u64> {
        match &self.tail {
            Tail::MonomerOnly => None,
            Tail::PowerLaw { k_cut, .. } => Some(*k_cut),
            Tail::Explicit(e) => e.iter().rev().find(|p| p.1 > 0.0).map(|p| p.0),
        }
    }

    /// Nonzero `(k, c_k(0))` with `lo <= k <= hi`, increasing in `k`.
    pub fn entries_between(&self, lo: u64, hi: u64) -> Vec<(u64, f64)> {
        let lo = lo.max(self.n as u64);
        match &self.tail {
            Tail::MonomerOnly => Vec::new(),
            Tail::PowerLaw { rho, mu, k_cut } => (lo..=hi.min(*k_cut)).map(|k| (k, rho * (k as f64).powf(-mu))).collect(),
            Tail::Explicit(e) => e.iter().copied().filter(|&(k, c)| k >= lo && k <= hi && c > 0.0).collect(),
        }
    }

    /// Finite list form of the tail.
    pub fn to_explicit(&self) -> Vec<(u64, f64)> {
        match self.max_size() {
            Some(top) => self.entries_between(self.n as u64, top),
            None => Vec::new(),
        }
    }

    /// `a * first + second` as explicit data (monomer values combine the same way).
    pub fn linear_combination(a: f64, first: &InitialData, second: &InitialData) -> Result<InitialData> {
        if first.n != second.n {
            return Err(Error::Validation("cannot combine data for different critical sizes".into()));
        }
        let mut entries: Vec<(u64, f64)> = first.to_explicit().into_iter().map(|(k, c)| (k, a * c)).collect();
        entries.extend(second.to_explicit());
        let params = ModelParams { n: first.n, alpha: 1.0 };
        InitialData::explicit(&params, &entries)?.with_c1(a * first.c1_0 + second.c1_0)
    }
}

/// Truncated power-law tail `c_j(0) = rho j^{-mu}`, `n <= j <= k_cut`, with `c1(0) = 0`.
pub fn make_power_law(rho: f64, mu: f64, k_cut: u64, params: &ModelParams) -> Result<InitialData> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Validation(format!(
            "power-law amplitude rho must be positive, got {rho}"
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Validation(format!("power-law exponent mu must be positive, got {mu}")));
    }
    if k_cut < params.n as u64 {
        return Err(Error::Validation(format!(
            "cut-off K = {k_cut} below critical size {}",
            params.n
        )));
    }
    Ok(InitialData {
        n: params.n,
        c1_0: 0.0,
        tail: Tail::PowerLaw { rho, mu, k_cut },
    })
}

/// Total initial cluster count `nu0 = sum_{k>=n} c_k(0)`.
pub fn nu0(data: &InitialData) -> f64 {
    match &data.tail {
        Tail::MonomerOnly => 0.0,
        Tail::PowerLaw { rho, mu, k_cut } => {
            // smallest terms first
            let s: CompensatedSum = (data.n as u64..=*k_cut).rev().map(|k| (k as f64).powf(-mu)).collect();
            rho * s.value()
        }
        Tail::Explicit(e) => e.iter().map(|p| p.1).collect::<CompensatedSum>().value(),
    }
}

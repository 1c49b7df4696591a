//! Mean-field submonolayer deposition with a critical cluster size `n`.
//!
//! The model is the coagulation system
//!
//! ```text
//! c1' = alpha - n c1^n - c1 * sum_{j>=n} c_j
//! cn' = c1^n - c1 cn
//! cj' = c1 c_{j-1} - c1 c_j,   j > n
//! ```
//!
//! In the intrinsic clock `tau(t) = int_0^t c1` the cluster hierarchy becomes a
//! linear lower-triangular system whose solution is `c_j = I1 + I2`. This crate
//! integrates the monomer/bulk pair, evaluates the exact representation in
//! log-space, the similarity profiles, and the quantities that control the
//! rate at which solutions approach the profile along `xi = (j - tau)/sqrt(tau)`.

pub mod closedform;
pub mod diagnostics;
mod error;
pub mod kinetics;
pub mod model;
pub mod ode;
pub mod profiles;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use model::{InitialData, ModelParams, Tail};
pub use quadrature::QuadratureSpec;

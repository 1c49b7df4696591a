//! Experiment driver for the coagscale library: configuration, the four runs
//! and their on-disk artifacts.

pub mod config;
pub mod plot;
pub mod runs;

pub use config::ExperimentConfig;
pub use runs::Verdict;

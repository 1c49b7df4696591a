use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Validation(String),

    #[error("trajectory stopped at tau = {reached} before reaching {target} ({steps} steps)")]
    Horizon { target: f64, reached: f64, steps: usize },

    #[error("integration became unstable at {at}: {what}")]
    Instability { at: f64, what: String },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate scaling geometry: {0}")]
    DegenerateGeometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: value {value:e}, error estimate {err_est:e} after {subdivisions} subdivisions")]
    Accuracy { value: f64, err_est: f64, subdivisions: usize },

    #[error("negative concentration {value:e} in component {index} at t = {t}")]
    Negativity { index: usize, value: f64, t: f64 },

    #[error("not applicable: {0}")]
    Applicability(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

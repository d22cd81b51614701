use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite integrand value at {location}")]
    Integration { location: String },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("signal is identically zero and noise is zero; the system has no unique positive solution")]
    PerfectRecovery,

    #[error("contraction needs min(c, c~) < 1, got c = {c}, c~ = {c_tilde}")]
    ContractionUnavailable { c: f64, c_tilde: f64 },

    #[error("c*delta = {c_delta} sits on the interpolation threshold")]
    InterpolationThreshold { c_delta: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("residual degrees of freedom {tr_v:.3e} vanish for a subsample of size {k}")]
    DegenerateCorrection { tr_v: f64, k: usize },

    #[error("linear algebra: {0}")]
    LinAlg(String),

    #[error("component fits failed: {0:?}")]
    ComponentFailures(Vec<(usize, String)>),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

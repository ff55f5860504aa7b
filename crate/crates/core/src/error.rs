use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integrand is not finite at jump time {time} (value {value})")]
    NonFiniteIntegrand { time: f64, value: f64 },

    #[error("event at time {time} with an empty risk set")]
    EmptyRiskSet { time: f64 },

    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),

    #[error("censored sample is empty (n = 0)")]
    EmptySample,

    #[error("observation {index} has invalid time {time}")]
    InvalidObservation { index: usize, time: f64 },

    #[error("length mismatch: {lifetimes} lifetimes vs {censors} censoring times")]
    LengthMismatch { lifetimes: usize, censors: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "circulant embedding has eigenvalue {value:e} below -1e-8 at index {index}; \
         the covariance is not embeddable at this length (use a valid slowly varying \
         factor such as `shifted`, or a shorter series)"
    )]
    NegativeEigenvalue { index: usize, value: f64 },

    #[error("quadrature did not converge: successive resolutions differ by {diff:e}")]
    QuadratureNonConvergence { diff: f64 },

    #[error("Hermite rank undetectable: all coefficients up to order {k_max} are below {tol:e}")]
    RankUndetectable { k_max: usize, tol: f64 },

    #[error("grid point t = {t} has H(t) = {h} > 0.95")]
    GridOutOfRange { t: f64, h: f64 },

    #[error("sample of size {size} is too small (need at least {min})")]
    SampleTooSmall { size: usize, min: usize },

    #[error("replication {replication} (seed {seed}) failed: {source}")]
    Replication {
        replication: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: field `{field}`: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        field: String,
        message: String,
    },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature did not converge on [{lower}, {upper}] (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        error: f64,
    },

    #[error("scaling infeasible: log N must be at least {required_log_n:.3e}")]
    ScalingInfeasible { required_log_n: f64 },

    #[error("requested {requested} particles per species exceeds the configured limit of {limit}")]
    ResourceLimit { requested: u64, limit: u64 },

    #[error("non-finite position for species {species}, particle {particle} at t = {time}")]
    NonFinite {
        species: usize,
        particle: usize,
        time: f64,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("time step {dt:e} violates the stability bound; admissible dt <= {admissible:e}")]
    Stability { dt: f64, admissible: f64 },

    #[error("kernel under-resolved: eta = {eta} needs dx <= {max_dx} (got {dx})")]
    UnderResolved { eta: f64, dx: f64, max_dx: f64 },

    #[error("density reached the truncated boundary (species {species}, value {value:e} at t = {time})")]
    BoundaryLeak { species: usize, value: f64, time: f64 },

    #[error("negative density {value:e} for species {species} at t = {time}")]
    Negativity { species: usize, value: f64, time: f64 },

    #[error("sample sizes differ: {left} vs {right}")]
    SampleMismatch { left: usize, right: usize },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("missing outputs: {0:?}")]
    MissingOutputs(Vec<PathBuf>),

    #[error("run `{experiment}` failed in pipeline `{pipeline}`: {source}")]
    Pipeline {
        experiment: String,
        pipeline: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Quadrature { .. } => "quadrature",
            Error::ScalingInfeasible { .. } => "scaling-infeasible",
            Error::ResourceLimit { .. } => "resource-limit",
            Error::NonFinite { .. } => "non-finite",
            Error::Contract(_) => "contract",
            Error::Stability { .. } => "stability",
            Error::UnderResolved { .. } => "under-resolved",
            Error::BoundaryLeak { .. } => "boundary-leak",
            Error::Negativity { .. } => "negativity",
            Error::SampleMismatch { .. } => "sample-mismatch",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::MissingOutputs(_) => "missing-outputs",
            Error::Pipeline { .. } => "pipeline",
            Error::Io { .. } => "io",
            Error::Serialization(_) => "serialization",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("logarithm undefined: eigenangle {angle:.9} is within 1e-6 of pi")]
    LogDomain { angle: f64 },

    #[error("matrix is too far from the group to project (defect {defect:.3e})")]
    NotNearGroup { defect: f64 },

    #[error("not a closed path: {0}")]
    OpenPath(String),

    #[error("loop reduces to the empty word")]
    EmptyLoop,

    #[error("series of length {len} is too short (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },

    #[error("{what} requires an admissible coupling: |beta| = {beta} but the threshold is {threshold}")]
    Inadmissible {
        what: &'static str,
        beta: f64,
        threshold: f64,
    },

    #[error("unsupported group for single-edge quadrature: {0}")]
    UnsupportedGroup(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("site {site} out of range for a chain of {n} spins")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("Bloch vector norm {0} exceeds 1")]
    BlochNorm(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("trajectory {id} has {len} points, at least 2 are required")]
    TrajectoryTooShort { id: usize, len: usize },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("shape mismatch: {expected} parameters expected, {found} given")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("rollout diverged at step {step}")]
    Divergence { step: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("{path}: unsupported schema version {found} (expected {expected})")]
    SchemaVersion {
        path: PathBuf,
        found: String,
        expected: u32,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the command-line driver.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::SiteOutOfRange { .. } => "site_out_of_range",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotHermitian(_) => "not_hermitian",
            Error::InvalidState(_) => "invalid_state",
            Error::BlochNorm(_) => "bloch_norm",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Empty(_) => "empty_input",
            Error::TrajectoryTooShort { .. } => "trajectory_too_short",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::Divergence { .. } => "divergence",
            Error::Eigen(_) => "eigen",
            Error::SchemaVersion { .. } => "schema_version",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }
}

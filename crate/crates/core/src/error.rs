use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("hypervector dimension must be at least 1")]
    ZeroDimension,

    /// Cosine similarity is undefined when either operand has zero norm.
    #[error("zero-norm operand in cosine similarity")]
    ZeroNorm,

    #[error("gamma must lie in (0, 1], got {0}")]
    InvalidGamma(f64),

    #[error("state index {index} out of range for {num_states} states")]
    StateOutOfRange { index: usize, num_states: usize },

    #[error("device index {index} out of range for {num_devices} devices")]
    DeviceOutOfRange { index: usize, num_devices: usize },

    #[error(
        "could not draw a codebook with pairwise cosine below {threshold} at dim {dim} \
         after {retries} retries"
    )]
    CodebookExhausted {
        dim: usize,
        threshold: f64,
        retries: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown experiment preset `{0}`")]
    UnknownPreset(String),

    #[error("cannot aggregate an empty set of traces")]
    EmptyAggregate,

    #[error("trace shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable identifier used in the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroDimension => "zero_dimension",
            Error::ZeroNorm => "zero_norm",
            Error::InvalidGamma(_) => "invalid_gamma",
            Error::StateOutOfRange { .. } => "state_out_of_range",
            Error::DeviceOutOfRange { .. } => "device_out_of_range",
            Error::CodebookExhausted { .. } => "codebook_exhausted",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::EmptyAggregate => "empty_aggregate",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

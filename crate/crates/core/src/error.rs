use thiserror::Error;

/// Errors raised by the fnar library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode index {0}; expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} `{name}`")]
    UnknownLabel { kind: &'static str, name: String },

    #[error("negative flow value {value} for {reporter}->{partner} (layer {layer}, period {period})")]
    NegativeFlow {
        period: String,
        layer: String,
        reporter: String,
        partner: String,
        value: f64,
    },

    #[error("requested rank {requested} exceeds numerical rank {available} of the layer Gram matrix")]
    RankExceeded { requested: usize, available: usize },

    #[error("design matrix is rank deficient; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("matrix is singular or too ill-conditioned: {0}")]
    Singular(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unstable process: {0}")]
    Unstable(String),

    #[error("bootstrap failed in {failed} of {total} iterations (last error: {last})")]
    BootstrapFailures {
        failed: usize,
        total: usize,
        last: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

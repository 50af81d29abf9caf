use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
///
/// The CLI maps these onto exit codes: configuration problems exit 1, I/O and
/// format problems exit 2, and divergence is tracked per run.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training diverged at round {round}, epoch {epoch}")]
    Divergence { round: usize, epoch: usize },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("depth exhausted: ciphertext at level {level} cannot be rescaled")]
    Depth { level: usize },

    #[error("ciphertext alignment error: {0}")]
    Alignment(String),

    #[error("value out of fixed-point range at coordinate {index}: {value}")]
    Range { index: usize, value: f64 },

    #[error("insufficient shares: need {needed}, got {got}")]
    InsufficientShares { needed: usize, got: usize },

    #[error("authenticity check failed: {0}")]
    Authenticity(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("pipeline order error: {0}")]
    PipelineOrder(String),

    #[error("degenerate round: sum of aggregation weights is zero")]
    DegenerateRound,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{operation} is not supported by the {backend} backend")]
    UnsupportedBackend {
        operation: &'static str,
        backend: &'static str,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("non-finite loss at epoch {epoch} ({detail})")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

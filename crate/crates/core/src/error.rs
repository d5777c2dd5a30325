use thiserror::Error;

/// Errors produced by the simulation, environment and training layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("register size {0} out of range (1..=20)")]
    RegisterSize(usize),

    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("action {action} out of range for {n_customers} customers")]
    ActionOutOfRange { action: usize, n_customers: usize },

    #[error("city {0} has already been visited")]
    AlreadyVisited(usize),

    #[error("episode is already finished")]
    EpisodeDone,

    #[error("invalid routes: {0}")]
    InvalidRoutes(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("layer count mismatch: {p} QAOA layers vs {n_layers} policy layers")]
    LayerMismatch { p: usize, n_layers: usize },

    #[error("all actions are masked")]
    AllMasked,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("instance too large for exhaustive search: {0} customers (max {1})")]
    TooLarge(usize, usize),

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

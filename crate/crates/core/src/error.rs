use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimacs line {line}: {msg}")]
    Dimacs { line: usize, msg: String },

    #[error("invalid formula: {0}")]
    InvalidFormula(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("brute-force search limited to {max} variables, got {n}")]
    TooManyVariables { n: usize, max: usize },

    #[error("quantum engine cap exceeded: {n} qubits > cap {cap}")]
    QuantumCapExceeded { n: usize, cap: usize },

    #[error("step-size failure at t = {t}: norm drift {drift:e} exceeds tolerance {tolerance:e}")]
    StepFailure { t: f64, drift: f64, tolerance: f64 },

    #[error("propagation failure: norm deviation {0:e}")]
    PropagationFailure(f64),

    #[error("inconsistent control snapshot: {0}")]
    InconsistentControls(String),

    #[error("chart left its domain at site {site} (|2p| = {value})")]
    ChartDomain { site: usize, value: f64 },

    #[error("trace too coarse: sample spacing {spacing} exceeds check interval {check}")]
    TraceTooCoarse { spacing: f64, check: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

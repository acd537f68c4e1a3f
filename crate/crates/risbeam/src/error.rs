use thiserror::Error;

/// Errors produced by scene construction, the solvers and the CLI front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),

    #[error("invalid desired pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not Hermitian: max asymmetry {asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("phase entry {index} has modulus {modulus} (must be 1 within {tolerance:.1e})")]
    NotUnitModulus {
        index: usize,
        modulus: f64,
        tolerance: f64,
    },

    #[error("signal power {found:.6e} exceeds the budget {budget:.6e}")]
    PowerBudget { found: f64, budget: f64 },

    #[error("beampattern grid is identically zero; cannot normalize")]
    ZeroGrid,

    #[error("desired pattern has zero weighted energy")]
    ZeroPatternEnergy,

    #[error("config error: {0}")]
    Config(String),

    #[error("file format error in {path}: {message}")]
    FileFormat { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

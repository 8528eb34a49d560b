use thiserror::Error;

/// Errors produced by the detection, metrics and coding routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid modulation order {0}: must be a square QAM order 4^k with k >= 1")]
    InvalidModulation(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("symbol {value} at position {index} is not in the constellation alphabet")]
    InvalidSymbol { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("precision matrix is not positive definite (minimum eigenvalue estimate {min_eigenvalue})")]
    IndefinitePrecision { min_eigenvalue: f64 },

    #[error("degenerate moments at component {index}: variance {variance} is not positive")]
    DegenerateMoment { index: usize, variance: f64 },

    #[error("exhaustive enumeration of {size} hypotheses exceeds the budget of {budget}")]
    EnumerationTooLarge { size: f64, budget: u64 },

    #[error("channel has no observation; draw a transmission first")]
    MissingObservation,

    #[error("infeasible LDPC parameters: {0}")]
    InfeasibleCode(String),

    #[error("malformed code file at line {line}: {reason}")]
    CodeFormat { line: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

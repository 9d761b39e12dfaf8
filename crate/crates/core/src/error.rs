use thiserror::Error;

/// Errors reported by the model, optimizer and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field}[{index}] = {value} is not a probability in [0, 1]")]
    ProbabilityOutOfRange {
        field: &'static str,
        index: usize,
        value: f64,
    },

    #[error("group must contain at least one regular member")]
    EmptyGroup,

    #[error("dimension mismatch: {what} has {found} entries, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("nonzero diagonal: contagion[{index}][{index}] = {value}")]
    NonzeroDiagonal { index: usize, value: f64 },

    #[error(
        "early exceeds late: early_default[{index}] = {early} > member_default[{index}] = {late}"
    )]
    EarlyExceedsLate { index: usize, early: f64, late: f64 },

    #[error("early_default probabilities are required for delayed contagion")]
    MissingEarlyDefault,

    #[error("group size {n} exceeds the supported maximum of {cap} for this evaluator")]
    SizeCapExceeded { n: usize, cap: usize },

    #[error("contract violation: {0}")]
    Contract(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("search limit U = {limit} exceeds the guard of {guard}; try a larger delta")]
    SearchLimitOverflow { limit: f64, guard: u64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid contagion schedule: {0}")]
    InvalidSchedule(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

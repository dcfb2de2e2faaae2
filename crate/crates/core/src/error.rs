use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one CLI exit class.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("not a permutation of 1..={n}: {reason}")]
    InvalidPermutation { n: usize, reason: String },

    #[error("deck size {n} exceeds the exact-enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("circular cut pattern has no cuts")]
    NoCuts,

    #[error("position {k} outside 1..={n}")]
    PositionOutOfRange { k: usize, n: usize },

    #[error("lower bound lemma inapplicable: gamma = {gamma} is not in (0, 1/2)")]
    LemmaInapplicable { gamma: f64 },

    #[error("power iteration did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("target distance {delta} not reached within {t_max} steps")]
    NotAttained { delta: f64, t_max: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

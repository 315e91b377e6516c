use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// A computation would exceed its resource budget.
    #[error("budget exceeded: {what} is {got}, limit {limit}")]
    Budget {
        what: &'static str,
        got: u64,
        limit: u64,
    },

    #[error("invalid cover specification: {0}")]
    InvalidSpec(String),

    /// The requested formula only holds in a parameter regime that excludes the input.
    #[error("regime violation: {0}")]
    Regime(String),

    #[error("degenerate standardization: variance is zero")]
    DegenerateVariance,

    #[error("missing norm entry (j={j}, i={i}, kind={kind})")]
    MissingNorm { j: usize, i: usize, kind: &'static str },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Budget refusals are resource problems, everything else is a bad input.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors surfaced by the monitoring primitives.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument failed validation; names the offending field.
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput {
        field: &'static str,
        reason: String,
    },

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// The requested diagnostic is undefined because there is no shift signal.
    #[error("no signal: {0}")]
    NoSignal(String),

    /// Not enough observations for the requested computation.
    #[error("not enough data: need at least {needed}, have {have}")]
    NotEnoughData { needed: u64, have: u64 },

    /// Invalid generator or monitor configuration.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

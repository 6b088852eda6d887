use thiserror::Error;

/// Errors raised by every layer of the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FftError {
    #[error("invalid size {value}: {reason}")]
    InvalidSize { value: usize, reason: &'static str },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("plan misuse: plan is {plan}, operation requires {required}")]
    PlanMisuse {
        plan: &'static str,
        required: &'static str,
    },

    #[error("row interval {start}..{end} out of bounds for {len} rows")]
    Bounds { start: usize, end: usize, len: usize },

    #[error("cannot partition {rows} rows into {n_locs} equal parts")]
    Partition { rows: usize, n_locs: usize },

    #[error("communication with rank {peer} failed: {message}")]
    Communication { peer: usize, message: String },

    #[error("collective protocol violation: {0}")]
    Protocol(String),

    #[error("task registry: no entry point named `{0}`")]
    Registry(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("task failed: {0}")]
    Task(String),

    #[error("wrong spectrum: {0}")]
    Verification(String),

    #[error("output: {0}")]
    Output(String),
}

impl FftError {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        FftError::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn comm(peer: usize, message: impl ToString) -> Self {
        FftError::Communication {
            peer,
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = FftError> = std::result::Result<T, E>;

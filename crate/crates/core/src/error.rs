use thiserror::Error;

/// Errors raised by the laboratory. The CLI maps each kind onto an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NppError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("energy {energy} violates the margin rule: need energy + {margin} <= scale_bits ({scale_bits})")]
    MarginViolation {
        energy: u32,
        scale_bits: u32,
        margin: u32,
    },

    #[error("work cap exceeded: {0}")]
    CapExceeded(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid config field `{field}`: {reason}")]
    Schema { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("internal assertion failed: {0}")]
    Internal(String),
}

impl NppError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        NppError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        NppError::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Process exit codes used by the command-line front end.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const SCHEMA: i32 = 2;
    pub const CAP: i32 = 3;
    pub const INTERNAL: i32 = 4;
    pub const IO: i32 = 5;
}

impl NppError {
    /// Invalid input of any kind is a schema failure; caps, internal
    /// assertions and I/O each have their own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            NppError::CapExceeded(_) => exit::CAP,
            NppError::Internal(_) => exit::INTERNAL,
            NppError::Io(_) => exit::IO,
            _ => exit::SCHEMA,
        }
    }
}

impl From<std::io::Error> for NppError {
    fn from(e: std::io::Error) -> Self {
        NppError::Io(e.to_string())
    }
}

pub type Result<T, E = NppError> = std::result::Result<T, E>;

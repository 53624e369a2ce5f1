use thiserror::Error;

/// Errors produced by the model, the solvers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("energy causality violated for user {user} in slot {slot}: needs {energy:.6} uJ, has {battery:.6} uJ")]
    Causality {
        user: usize,
        slot: usize,
        energy: f64,
        battery: f64,
    },

    /// The instance admits no feasible point. `user`/`slot` name the first
    /// offending energy constraint when there is one.
    #[error("infeasible: {reason}")]
    Infeasible {
        reason: String,
        user: Option<usize>,
        slot: Option<usize>,
    },

    #[error("exhaustive enumeration needs 2^{bits} assignments, above the cap of 2^{cap_bits}; use the heuristic policy")]
    EnumerationCap { bits: u32, cap_bits: u32 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn infeasible(reason: impl Into<String>) -> Self {
        Error::Infeasible {
            reason: reason.into(),
            user: None,
            slot: None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. } | Error::Causality { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// A point or region lies outside the domain where an object is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter violates the operation's precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A numerical routine produced a singular or non-finite intermediate.
    #[error("numerical error: {message} (condition number {condition:.3e})")]
    Numerical { message: String, condition: f64 },

    /// The spike construction could not satisfy its constraints.
    #[error("construction error: {0}")]
    Construction(String),

    /// A mesh-level failure (disconnected graph, empty ball, ...).
    #[error("mesh error: {0}")]
    Mesh(String),

    /// An operation refused to run because a hypothesis flag is false.
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    /// Serialization or file-format failure.
    #[error("format error: {0}")]
    Format(String),
}

impl LabError {
    pub fn domain(msg: impl Into<String>) -> Self {
        LabError::Domain(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        LabError::Parameter(msg.into())
    }

    pub fn numerical(msg: impl Into<String>, condition: f64) -> Self {
        LabError::Numerical {
            message: msg.into(),
            condition,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

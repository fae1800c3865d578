//! Engine error type shared across all modules.

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Clone, Error)]
pub enum EngineError {
    /// Invalid configuration; `field` is the path of the offending entry.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// A closed-form operation was called outside its domain.
    #[error("domain error in {op}: {message}")]
    Domain { op: &'static str, message: String },

    /// Logarithm argument of the appendix collateral rule is not positive.
    #[error("log-domain violation in collateral rule: {term} = {value}")]
    LogDomain { term: &'static str, value: f64 },

    /// A simulated series produced a non-finite value.
    #[error("non-finite value in series `{series}` at path {path}, node {node}")]
    NonFinite {
        series: &'static str,
        path: u64,
        node: usize,
    },

    /// Too many paths needed exponent clamping for the estimate to be trusted.
    #[error("integrability breach: {clamped} of {total} paths required exponent clamping (limit {limit})")]
    IntegrabilityBreach {
        clamped: u64,
        total: u64,
        limit: f64,
    },

    /// Root/argmax search failed.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Operation not available for the requested mode or inputs.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl EngineError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        EngineError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;

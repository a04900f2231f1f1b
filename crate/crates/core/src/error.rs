use thiserror::Error;

/// Failure of a single forward execution. An attack discards the
/// offending worklist entry and keeps going.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("division by zero")]
    DivByZero,
    #[error("unbound attack variable x{0}")]
    UnboundVar(usize),
    #[error("non-finite value produced during execution")]
    NumericOverflow,
    #[error("shape error: {0}")]
    Shape(String),
}

impl ExecError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        ExecError::Shape(msg.into())
    }
}

/// Problems loading or validating model, input and score files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid input: {0}")]
    Input(String),
}

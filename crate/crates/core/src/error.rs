use std::io;

use thiserror::Error;

pub type Result<T, E = EverestError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EverestError {
    #[error("layer {layer} out of range (model has {count} layers)")]
    LayerOutOfRange { layer: u32, count: usize },

    #[error("index out of range: {what} = {value}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl EverestError {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        EverestError::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn out_of_range(what: &'static str, value: usize, limit: usize) -> Self {
        EverestError::IndexOutOfRange { what, value, limit }
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("{kind} index {index} out of range (size {len})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        len: usize,
    },

    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("no observation kernel available for arity {0}")]
    MissingArity(usize),

    #[error("enumeration infeasible: {states} states exceeds limit {limit}")]
    Infeasible { states: f64, limit: f64 },

    #[error("impossible world: observations have zero total probability")]
    ImpossibleWorld,

    #[error("zero normalizer at {0}")]
    ZeroNormalizer(String),

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("model is not soft: {0}")]
    NotSoft(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// Errors caused by bad user input rather than by a failing computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::IndexOutOfRange { .. }
                | Error::Validation(_)
                | Error::MissingArity(_)
                | Error::SizeMismatch(..)
                | Error::NotSoft(_)
                | Error::Parse { .. }
                | Error::Config { .. }
                | Error::Json(_)
        )
    }
}

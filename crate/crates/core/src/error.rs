use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Stable machine-readable error category, shared by the HTTP API and CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    ParseError,
    UnknownVariable,
    DomainError,
    FitNotConverged,
    Unsupported,
    NotFound,
    Internal,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorCode::ParseError => "parse_error",
            ErrorCode::UnknownVariable => "unknown_variable",
            ErrorCode::DomainError => "domain_error",
            ErrorCode::FitNotConverged => "fit_not_converged",
            ErrorCode::Unsupported => "unsupported",
            ErrorCode::NotFound => "not_found",
            ErrorCode::Internal => "internal",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("csv parse error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unsupported operator `{operator}` at position {position}")]
    UnsupportedOperator { operator: String, position: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("column `{column}`: {message}")]
    InvalidFilter { column: String, message: String },

    #[error("{transform} of `{column}` undefined at rows {rows:?}")]
    TransformDomain {
        column: String,
        transform: &'static str,
        rows: Vec<usize>,
    },

    #[error("pipeline step {step} failed: {source}")]
    Pipeline {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{family} likelihood undefined for outcome values at rows {rows:?}")]
    UndefinedLikelihood { family: String, rows: Vec<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("family has no scale parameter")]
    NoScaleParameter,

    #[error("no contrast possible for `{0}`: only one level present")]
    NoContrast(String),

    #[error("model did not converge")]
    NotConverged,

    #[error("duplicate model label `{0}`")]
    DuplicateLabel(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("{0}")]
    Mismatch(String),

    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::Csv { .. } | Error::Syntax { .. } | Error::DuplicateColumn(_) => {
                ErrorCode::ParseError
            }
            Error::UnknownVariable(_) => ErrorCode::UnknownVariable,
            Error::EmptyDataset
            | Error::InvalidFilter { .. }
            | Error::TransformDomain { .. }
            | Error::UndefinedLikelihood { .. }
            | Error::InvalidParameter(_)
            | Error::NoContrast(_)
            | Error::Mismatch(_) => ErrorCode::DomainError,
            Error::Pipeline { source, .. } => source.code(),
            Error::NotConverged => ErrorCode::FitNotConverged,
            Error::UnsupportedOperator { .. }
            | Error::NoScaleParameter
            | Error::DuplicateLabel(_)
            | Error::Unsupported(_) => ErrorCode::Unsupported,
            Error::NotFound { .. } => ErrorCode::NotFound,
            Error::Internal(_) => ErrorCode::Internal,
        }
    }

    /// Structured payload for API consumers (offending rows, character positions).
    pub fn detail(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            Error::Csv { row, .. } => json!({ "row": row }),
            Error::Syntax { position, .. } | Error::UnsupportedOperator { position, .. } => {
                json!({ "position": position })
            }
            Error::UnknownVariable(name) => json!({ "variable": name }),
            Error::TransformDomain { column, rows, .. } => {
                json!({ "column": column, "rows": rows })
            }
            Error::UndefinedLikelihood { family, rows } => {
                json!({ "family": family, "rows": rows })
            }
            Error::Pipeline { step, source } => json!({ "step": step, "cause": source.detail() }),
            Error::NoContrast(name) => json!({ "variable": name }),
            Error::NotFound { kind, id } => json!({ "kind": kind, "id": id }),
            _ => serde_json::Value::Null,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use fwda_core::{FwdaError, Label};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors from file handling, evaluation and the CLI. Core errors pass
/// through unchanged.
#[derive(Debug, Error)]
pub enum Error {
    #[error("CsvShapeError: line {line}: expected {expected} fields, found {found}")]
    CsvShapeError {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("CsvValueError: line {line}, column {column}: cannot parse {value:?} as a number")]
    CsvValueError {
        line: u64,
        column: usize,
        value: String,
    },

    #[error("LabelError: line {line}: label {value:?} is not one of -1, 0, +1")]
    LabelError { line: u64, value: String },

    #[error("ColumnError: {0}")]
    ColumnError(String),

    #[error("IoError: {path}: {source}")]
    IoError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ModelFormatError: field \"{field}\": {reason}")]
    ModelFormatError { field: String, reason: String },

    #[error("InsufficientSamples: class {class} has {have} samples, {need} needed")]
    InsufficientSamples {
        class: Label,
        have: usize,
        need: usize,
    },

    #[error("EmptyInput: {0}")]
    EmptyInput(&'static str),

    #[error("ShapeError: {what}: expected {expected}, found {found}")]
    ShapeError {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Core(#[from] FwdaError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoError {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn model_format(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ModelFormatError {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Wraps the error with a description of what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

use alloc::string::String;

use crate::dataset::Label;

pub type Result<T> = core::result::Result<T, FwdaError>;

/// Errors raised by the numerical core.
///
/// Every message starts with the variant name so that front ends can surface
/// it verbatim.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FwdaError {
    #[error("InsufficientSamples: need at least {need} samples, have {have}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("ShapeError: {what}: expected {expected}, found {found}")]
    ShapeError {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("DegenerateCovariance: diagonal entry {index} is {value}")]
    DegenerateCovariance { index: usize, value: f64 },

    #[error("NotPositiveDefinite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("DomainError: {0}")]
    DomainError(String),

    #[error("InvalidParameter: {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("MissingClass: no training samples with label {0}")]
    MissingClass(Label),

    #[error("InvalidModel: {0}")]
    InvalidModel(String),

    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(FwdaError::ShapeError {
            what,
            expected,
            found,
        })
    }
}

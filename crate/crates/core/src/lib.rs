//! Numerical core for Fast Wishart Discriminant Analysis.
//!
//! Estimates a regularized precision matrix from labeled training data,
//! treats it as the scale of a Wishart distribution over precision matrices,
//! and classifies by a likelihood-weighted vote of the LDA rules induced by an
//! ensemble of Wishart draws.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod classifier;
pub mod covariance;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod wishart;

pub use classifier::{
    discrete_fwda_score, fit, fit_with_report, fwda_score, gaussian_log_weight, lda_discriminant,
    plain_lda_predict, CovarianceMode, Ensemble, FitConfig, FitReport, FwdaModel, MemberVote,
    ModelParts, Prediction, Variant,
};
pub use covariance::{GlassoOptions, PrecisionEstimate};
pub use dataset::{Label, LabeledDataset};
pub use error::{FwdaError, Result};
pub use linalg::{CholeskyFactor, SymmetricMatrix};
pub use wishart::{PrecisionSample, WishartModel};

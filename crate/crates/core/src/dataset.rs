use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::error::{check_len, FwdaError, Result};

/// Binary class label. `Positive` is the +1 class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// Sign convention: non-negative values map to `Positive`.
    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_i8())
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("+1"),
            Label::Negative => f.write_str("-1"),
        }
    }
}

/// `n` feature vectors of dimension `p` with binary labels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
    feature_names: Option<Vec<String>>,
}

impl LabeledDataset {
    /// Builds a dataset from a row-major feature buffer.
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if dim == 0 {
            return Err(FwdaError::ShapeError {
                what: "feature dimension",
                expected: 1,
                found: 0,
            });
        }
        check_len("feature buffer length", labels.len() * dim, features.len())?;
        Ok(Self {
            dim,
            features,
            labels,
            feature_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        check_len("label count", rows.len(), labels.len())?;
        let dim = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            check_len("row length", dim, row.len())?;
            features.extend_from_slice(row);
        }
        Self::new(dim, features, labels)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        check_len("feature name count", self.dim, names.len())?;
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Indices of the samples carrying `label`, in storage order.
    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] == label)
            .collect()
    }

    /// New dataset made of the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            dim: self.dim,
            features,
            labels,
            feature_names: self.feature_names.clone(),
        }
    }

    /// The features as an `n x p` matrix.
    pub fn feature_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.features)
    }
}

//! Embedding sets and anchor banks.

use crate::error::{Error, Result};
use crate::labels::LabelTable;
use crate::matrix::{normalize_columns, Matrix, ZERO_NORM};

/// Column norm tolerance for a bank flagged as normalized.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Sample embeddings (one per row) with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    features: Matrix,
    labels: LabelTable,
}

impl EmbeddingSet {
    pub fn new(features: Matrix, labels: LabelTable) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::LengthMismatch {
                expected: features.rows(),
                actual: labels.len(),
            });
        }
        if let Some(i) = features.row_norms().iter().position(|&n| n <= ZERO_NORM) {
            return Err(Error::ZeroRow(i));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// A `d × C` matrix whose columns are anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorBank {
    weights: Matrix,
    normalized: bool,
}

impl AnchorBank {
    /// Wraps raw classifier weights without touching them.
    pub fn raw(weights: Matrix) -> Self {
        Self {
            weights,
            normalized: false,
        }
    }

    /// Column-normalizes the weights.
    pub fn normalized(weights: &Matrix) -> Result<Self> {
        Ok(Self {
            weights: normalize_columns(weights)?,
            normalized: true,
        })
    }

    /// Wraps weights that are already unit-norm per column, checking it.
    pub fn from_unit_columns(weights: Matrix) -> Result<Self> {
        let norms = weights.column_norms();
        if let Some(j) = norms.iter().position(|&n| n <= ZERO_NORM) {
            return Err(Error::ZeroColumn(j));
        }
        let normalized = norms.iter().all(|n| (n - 1.0).abs() <= UNIT_NORM_TOL);
        Ok(Self {
            weights,
            normalized,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Embedding dimension `d`.
    pub fn dim(&self) -> usize {
        self.weights.rows()
    }

    /// Number of anchors `C`.
    pub fn len(&self) -> usize {
        self.weights.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.cols() == 0
    }

    pub fn checksum(&self) -> u64 {
        self.weights.checksum()
    }

    /// This bank if already normalized, otherwise a normalized copy.
    pub fn to_normalized(&self) -> Result<AnchorBank> {
        if self.normalized {
            Ok(self.clone())
        } else {
            AnchorBank::normalized(&self.weights)
        }
    }

    pub(crate) fn from_parts(weights: Matrix, normalized: bool) -> Self {
        Self {
            weights,
            normalized,
        }
    }
}

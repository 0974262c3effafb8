//! Relation descriptors: cosine profiles of embeddings against an anchor
//! bank, and the Euclidean distances used to compare them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, euclidean, Dtype, Matrix, ZERO_NORM};
use crate::model::{AnchorBank, EmbeddingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DescriptorKind {
    /// Cosine similarity against every anchor; entries lie in [-1, 1].
    FullCosine,
    /// Projection onto spectrally reduced anchors; entries are unbounded.
    SvdReduced,
}

impl DescriptorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DescriptorKind::FullCosine => "full_cosine",
            DescriptorKind::SvdReduced => "svd_reduced",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full_cosine" => Some(DescriptorKind::FullCosine),
            "svd_reduced" => Some(DescriptorKind::SvdReduced),
            _ => None,
        }
    }
}

/// Descriptors of a sample set, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationDescriptorSet {
    values: Matrix,
    kind: DescriptorKind,
    anchor_digest: u64,
}

/// A single descriptor borrowed from a set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptor<'a> {
    pub values: &'a [f64],
    pub anchor_digest: u64,
}

impl RelationDescriptorSet {
    /// Reassembles a set from stored parts, e.g. a matrix file and its
    /// sidecar metadata.
    pub fn from_parts(values: Matrix, kind: DescriptorKind, anchor_digest: u64) -> Self {
        Self {
            values,
            kind,
            anchor_digest,
        }
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn anchor_digest(&self) -> u64 {
        self.anchor_digest
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Descriptor dimension (anchor count or reduced `k`).
    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, i: usize) -> Descriptor<'_> {
        Descriptor {
            values: self.values.row(i),
            anchor_digest: self.anchor_digest,
        }
    }
}

/// Unit-normalized copy of embedding row `i`.
pub(crate) fn unit_row(features: &Matrix, i: usize) -> Result<Vec<f64>> {
    let row = features.row(i);
    let n = libm::sqrt(dot(row, row));
    if n <= ZERO_NORM {
        return Err(Error::ZeroRow(i));
    }
    Ok(row.iter().map(|v| v / n).collect())
}

/// Projects each unit embedding onto the columns of `anchors`.
/// Returns the raw `n × m` values in F64.
pub(crate) fn project_rows(anchors: &Matrix, emb: &EmbeddingSet) -> Result<Vec<f64>> {
    let d = anchors.rows();
    if emb.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: emb.dim(),
        });
    }
    let m = anchors.cols();
    let columns = anchors.columns();
    let mut out = Vec::with_capacity(emb.len() * m);
    for i in 0..emb.len() {
        let z = unit_row(emb.features(), i)?;
        out.extend(columns.iter().map(|c| dot(c, &z)));
    }
    Ok(out)
}

/// Cosine similarity of every embedding against every anchor.
///
/// An unnormalized bank is column-normalized first. The resulting set
/// carries the checksum of `bank` as passed in.
pub fn compute_rd(bank: &AnchorBank, emb: &EmbeddingSet) -> Result<RelationDescriptorSet> {
    let normalized = bank.to_normalized()?;
    let raw = project_rows(normalized.weights(), emb)?;
    let dtype = bank.weights().dtype().widest(emb.features().dtype());
    let values = Matrix::new(emb.len(), bank.len(), dtype, raw)?;
    Ok(RelationDescriptorSet {
        values,
        kind: DescriptorKind::FullCosine,
        anchor_digest: bank.checksum(),
    })
}

/// Euclidean distance between two embeddings.
pub fn embedding_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(euclidean(a, b))
}

/// Euclidean distance between two descriptors from the same bank.
pub fn rd_distance(a: Descriptor<'_>, b: Descriptor<'_>) -> Result<f64> {
    if a.anchor_digest != b.anchor_digest {
        return Err(Error::AnchorMismatch {
            expected: a.anchor_digest,
            actual: b.anchor_digest,
        });
    }
    embedding_distance(a.values, b.values)
}

/// Same bank, same kind, same width.
pub fn check_compatible(
    probe: &RelationDescriptorSet,
    gallery: &RelationDescriptorSet,
) -> Result<()> {
    if probe.anchor_digest != gallery.anchor_digest {
        return Err(Error::AnchorMismatch {
            expected: probe.anchor_digest,
            actual: gallery.anchor_digest,
        });
    }
    if probe.kind != gallery.kind {
        return Err(Error::KindMismatch);
    }
    if probe.dim() != gallery.dim() {
        return Err(Error::DimensionMismatch {
            expected: probe.dim(),
            actual: gallery.dim(),
        });
    }
    Ok(())
}

/// Distances from descriptor `i` of `probe` to every gallery descriptor.
pub fn rd_distance_row(
    probe: &RelationDescriptorSet,
    i: usize,
    gallery: &RelationDescriptorSet,
) -> Result<Vec<f64>> {
    check_compatible(probe, gallery)?;
    Ok(distance_row(probe.values(), i, gallery.values()))
}

/// Row `i` of the pairwise Euclidean distance matrix between the rows of
/// `probe` and `gallery`. Dimensions must already agree.
pub fn distance_row(probe: &Matrix, i: usize, gallery: &Matrix) -> Vec<f64> {
    let p = probe.row(i);
    (0..gallery.rows())
        .map(|j| euclidean(p, gallery.row(j)))
        .collect()
}

/// All probe-to-gallery descriptor distances, `probe.len() × gallery.len()`.
pub fn rd_distance_matrix(
    probe: &RelationDescriptorSet,
    gallery: &RelationDescriptorSet,
) -> Result<Matrix> {
    check_compatible(probe, gallery)?;
    pairwise_distances(probe.values(), gallery.values())
}

/// All probe-to-gallery embedding distances.
pub fn embedding_distance_matrix(probe: &Matrix, gallery: &Matrix) -> Result<Matrix> {
    if probe.cols() != gallery.cols() {
        return Err(Error::DimensionMismatch {
            expected: probe.cols(),
            actual: gallery.cols(),
        });
    }
    pairwise_distances(probe, gallery)
}

fn pairwise_distances(probe: &Matrix, gallery: &Matrix) -> Result<Matrix> {
    let mut data = Vec::with_capacity(probe.rows() * gallery.rows());
    for i in 0..probe.rows() {
        data.extend(distance_row(probe, i, gallery));
    }
    Matrix::new(probe.rows(), gallery.rows(), Dtype::F64, data)
}

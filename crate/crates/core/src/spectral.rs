//! Singular value decomposition of an anchor bank and top-k reduction.
//!
//! The SVD is a one-sided (Hestenes) Jacobi iteration applied to whichever
//! orientation of the input has fewer columns, with a fixed cyclic sweep
//! order and a fixed sign convention, so factors are bit-reproducible.
//!
//! Reducing to `U[:, :k] Σ[:k, :k]` keeps descriptor distances intact when
//! `k` reaches the numerical rank: the full descriptor difference is
//! `V Σᵀ Uᵀ Δz` and `V` is orthogonal.

use alloc::vec;
use alloc::vec::Vec;

use crate::descriptor::{project_rows, DescriptorKind, RelationDescriptorSet};
use crate::error::{Error, Result};
use crate::matrix::{dot, euclidean, Dtype, Matrix};
use crate::model::{AnchorBank, EmbeddingSet};

/// Cap on cyclic Jacobi sweeps.
pub const MAX_SWEEPS: usize = 80;
/// Singular values below this fraction of the largest count as zero when
/// determining numerical rank.
pub const RANK_TOL: f64 = 1e-8;

/// `input = U Σ Vᵀ` with `U` (d×d) and `V` (N×N) orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: Matrix,
    /// Descending, `min(d, N)` entries.
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    /// Number of singular values above `RANK_TOL · σ₁`.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }

    /// `U Σ Vᵀ` reassembled in F64.
    pub fn reconstruct(&self) -> Matrix {
        let d = self.u.rows();
        let n = self.v.rows();
        let r = self.singular_values.len();
        let mut out = Matrix::zeros(d, n, Dtype::F64).into_vec();
        for i in 0..d {
            for j in 0..n {
                let mut acc = 0.0;
                for (t, s) in self.singular_values.iter().enumerate().take(r) {
                    acc += self.u.get(i, t) * s * self.v.get(j, t);
                }
                out[i * n + j] = acc;
            }
        }
        Matrix::new(d, n, Dtype::F64, out).expect("finite factors")
    }
}

pub fn numerical_rank(singular_values: &[f64]) -> usize {
    let top = singular_values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .take_while(|&&s| s >= RANK_TOL * top)
        .count()
}

/// Fraction of squared Frobenius energy held by the leading `k` values.
pub fn energy_fraction(singular_values: &[f64], k: usize) -> f64 {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    singular_values.iter().take(k).map(|s| s * s).sum::<f64>() / total
}

/// Columns with norm at or below this are numerically zero.
fn negligible_norm(cols: &[Vec<f64>]) -> f64 {
    let p = cols.len();
    let len = cols.first().map_or(0, Vec::len);
    let frob = libm::sqrt(cols.iter().map(|c| dot(c, c)).sum::<f64>());
    frob * f64::EPSILON * (len.max(p) as f64)
}

/// Orthogonalizes `cols` in place by cyclic Jacobi rotations and returns the
/// accumulated rotation, as columns of a `p × p` orthogonal matrix.
/// Numerically zero columns are left out of the rotations.
fn hestenes(cols: &mut [Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let p = cols.len();
    let len = cols.first().map_or(0, Vec::len);
    let tol = (len.max(p) as f64) * f64::EPSILON;
    let tiny = negligible_norm(cols);
    let tiny_sq = tiny * tiny;
    let mut rot: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            let mut e = vec![0.0; p];
            e[i] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for a in 0..p {
            for b in a + 1..p {
                let alpha = dot(&cols[a], &cols[a]);
                let beta = dot(&cols[b], &cols[b]);
                let gamma = dot(&cols[a], &cols[b]);
                if alpha <= tiny_sq
                    || beta <= tiny_sq
                    || gamma.abs() <= tol * libm::sqrt(alpha * beta)
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(cols, a, b, c, s);
                rotate(&mut rot, a, b, c, s);
            }
        }
        if !rotated {
            return Ok(rot);
        }
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS })
}

fn rotate(cols: &mut [Vec<f64>], a: usize, b: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(b);
    for (x, y) in left[a].iter_mut().zip(right[0].iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}

/// Extends orthonormal `basis` (vectors of length `len`) to a full basis by
/// Gram–Schmidt over the canonical vectors, in index order.
fn complete_basis(basis: &mut Vec<Vec<f64>>, len: usize) {
    let mut e = 0;
    while basis.len() < len && e < len {
        let mut v = vec![0.0; len];
        v[e] = 1.0;
        e += 1;
        // Two passes keep the result orthogonal to working precision.
        for _ in 0..2 {
            for b in basis.iter() {
                let proj = dot(&v, b);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let n = libm::sqrt(dot(&v, &v));
        if n > 1e-6 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
}

fn columns_to_matrix(cols: &[Vec<f64>]) -> Result<Matrix> {
    Matrix::from_columns(cols, Dtype::F64)
}

/// Full SVD of a `d × N` matrix.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    let (d, n) = (m.rows(), m.cols());
    if d == 0 || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    // Orthogonalize the orientation with fewer columns: rows of `m` when
    // N >= d (giving U from the rotation), columns otherwise (giving V).
    let wide = n >= d;
    let mut work: Vec<Vec<f64>> = if wide {
        (0..d).map(|i| m.row(i).to_vec()).collect()
    } else {
        m.columns()
    };
    let tiny = negligible_norm(&work);
    let rot = hestenes(&mut work)?;
    let r = work.len();
    let len = if wide { n } else { d };

    let norms: Vec<f64> = work
        .iter()
        .map(|c| {
            let n = libm::sqrt(dot(c, c));
            if n <= tiny {
                0.0
            } else {
                n
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let singular_values: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let mut small: Vec<Vec<f64>> = order.iter().map(|&i| rot[i].clone()).collect();
    let mut tall: Vec<Vec<f64>> = Vec::with_capacity(len);
    for &i in &order {
        if norms[i] == 0.0 {
            break;
        }
        tall.push(work[i].iter().map(|x| x / norms[i]).collect());
    }
    complete_basis(&mut tall, len);

    let (u_cols, v_cols) = if wide {
        (&mut small, &mut tall)
    } else {
        (&mut tall, &mut small)
    };
    // Largest-magnitude entry of each U column is nonnegative; the paired V
    // column flips with it.
    for t in 0..u_cols.len() {
        let col = &u_cols[t];
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            u_cols[t].iter_mut().for_each(|x| *x = -*x);
            if t < r {
                v_cols[t].iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    Ok(SvdFactors {
        u: columns_to_matrix(u_cols)?,
        singular_values,
        v: columns_to_matrix(v_cols)?,
    })
}

/// How to treat requested directions beyond the numerical rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Keep all `k` columns; those past the rank carry near-zero scale.
    #[default]
    Keep,
    /// Drop columns past the numerical rank, so the result has
    /// `min(k, rank)` columns.
    Truncate,
}

/// Leading left singular vectors scaled by their singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedAnchors {
    weights: Matrix,
    source_digest: u64,
    singular_values: Vec<f64>,
}

impl ReducedAnchors {
    /// Reassembles reduced anchors from stored parts.
    pub fn from_parts(weights: Matrix, source_digest: u64, singular_values: Vec<f64>) -> Self {
        Self {
            weights,
            source_digest,
            singular_values,
        }
    }

    /// `d × k` reduced anchor matrix.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.weights.cols()
    }

    /// Checksum of the bank that was reduced.
    pub fn source_digest(&self) -> u64 {
        self.source_digest
    }

    /// Full spectrum of the normalized source bank.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn numerical_rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }

    /// True when some kept direction lies past the numerical rank.
    pub fn exceeds_rank(&self) -> bool {
        self.k() > self.numerical_rank()
    }

    pub fn checksum(&self) -> u64 {
        self.weights.checksum()
    }
}

/// Reduces a selected bank to `k` spectral anchors, keeping every requested
/// direction.
pub fn reduce_anchors(selected: &AnchorBank, k: usize) -> Result<ReducedAnchors> {
    reduce_anchors_with(selected, k, RankPolicy::Keep)
}

pub fn reduce_anchors_with(
    selected: &AnchorBank,
    k: usize,
    policy: RankPolicy,
) -> Result<ReducedAnchors> {
    let d = selected.dim();
    if k == 0 || k > d {
        return Err(Error::KOutOfRange { k, max: d });
    }
    let unit = selected.to_normalized()?;
    let f = svd(unit.weights())?;
    let keep = match policy {
        RankPolicy::Keep => k,
        RankPolicy::Truncate => k.min(f.numerical_rank()).max(1),
    };
    let sigma = |t: usize| f.singular_values.get(t).copied().unwrap_or(0.0);
    let weights = Matrix::from_fn(d, keep, selected.weights().dtype(), |i, t| {
        f.u.get(i, t) * sigma(t)
    })?;
    Ok(ReducedAnchors {
        weights,
        source_digest: selected.checksum(),
        singular_values: f.singular_values,
    })
}

/// Descriptors against reduced anchors: `reducedᵀ · (z / ‖z‖)` per sample.
pub fn reduced_rd(reduced: &ReducedAnchors, emb: &EmbeddingSet) -> Result<RelationDescriptorSet> {
    let raw = project_rows(reduced.weights(), emb)?;
    let dtype = reduced.weights().dtype().widest(emb.features().dtype());
    let values = Matrix::new(emb.len(), reduced.k(), dtype, raw)?;
    Ok(RelationDescriptorSet::from_parts(
        values,
        DescriptorKind::SvdReduced,
        reduced.checksum(),
    ))
}

/// Pairwise-distance agreement between full and reduced descriptors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryReport {
    pub max_relative_error: f64,
    pub mean_relative_error: f64,
    pub max_absolute_error: f64,
    /// Pairs contributing to the relative statistics.
    pub pairs: usize,
    /// Pairs whose full-descriptor distance is zero.
    pub skipped_pairs: usize,
}

/// Full distances at or below this are skipped in relative statistics.
const DEGENERATE_DISTANCE: f64 = 1e-12;

/// Compares all pairwise descriptor distances of `emb` under the selected
/// bank (cosine descriptors) and its reduction, computed in F64.
pub fn isometry_report(
    selected: &AnchorBank,
    reduced: &ReducedAnchors,
    emb: &EmbeddingSet,
) -> Result<IsometryReport> {
    if reduced.source_digest() != selected.checksum() {
        return Err(Error::AnchorMismatch {
            expected: selected.checksum(),
            actual: reduced.source_digest(),
        });
    }
    let unit = selected.to_normalized()?;
    let full = project_rows(unit.weights(), emb)?;
    let red = project_rows(reduced.weights(), emb)?;
    let (m, k) = (selected.len(), reduced.k());
    let n = emb.len();

    let mut report = IsometryReport {
        max_relative_error: 0.0,
        mean_relative_error: 0.0,
        max_absolute_error: 0.0,
        pairs: 0,
        skipped_pairs: 0,
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let df = euclidean(&full[i * m..(i + 1) * m], &full[j * m..(j + 1) * m]);
            let dr = euclidean(&red[i * k..(i + 1) * k], &red[j * k..(j + 1) * k]);
            let abs = (dr - df).abs();
            report.max_absolute_error = report.max_absolute_error.max(abs);
            if df <= DEGENERATE_DISTANCE {
                report.skipped_pairs += 1;
                continue;
            }
            let rel = abs / df;
            report.max_relative_error = report.max_relative_error.max(rel);
            total += rel;
            report.pairs += 1;
        }
    }
    if report.pairs > 0 {
        report.mean_relative_error = total / report.pairs as f64;
    }
    Ok(report)
}

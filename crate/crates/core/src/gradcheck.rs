//! Central finite differences for checking analytic gradients.

use alloc::vec::Vec;

use crate::error::Result;
use crate::labels::{LabelEntry, LabelTable};
use crate::matrix::{Dtype, Matrix};
use crate::model::EmbeddingSet;
use crate::rng::GaussianStream;
use crate::training::{ce_cosine_grad, ce_cosine_loss, orl_grad, orl_loss};

/// Step used by the gradient checks.
pub const FD_STEP: f64 = 1e-4;
/// ORL entries closer than this to their target sit on an L1 kink.
pub const KINK_MARGIN: f64 = 1e-3;
/// Denominator floor for per-entry relative error.
pub const REL_FLOOR: f64 = 1e-6;

/// `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h` for every entry of `x`.
pub fn central_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a − n| / max(|a|, |n|, REL_FLOOR)` over paired entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Smallest distance of any `WᵀW − I` entry from zero.
pub fn orl_kink_distance(w: &Matrix) -> f64 {
    let cols = w.columns();
    let mut best = f64::INFINITY;
    for (a, ca) in cols.iter().enumerate() {
        for (b, cb) in cols.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            best = best.min((crate::matrix::dot(ca, cb) - target).abs());
        }
    }
    best
}

fn with_data(like: &Matrix, data: &[f64]) -> Matrix {
    Matrix::new(like.rows(), like.cols(), Dtype::F64, data.to_vec()).expect("finite probe")
}

/// Max relative error of [`orl_grad`] against central differences at `w`.
pub fn check_orl(w: &Matrix, h: f64) -> Result<f64> {
    let analytic = orl_grad(w)?;
    let numeric = central_difference(w.as_slice(), h, |x| orl_loss(&with_data(w, x)));
    Ok(max_relative_error(analytic.as_slice(), &numeric))
}

/// Max relative error of [`ce_cosine_grad`] against central differences.
pub fn check_ce(w: &Matrix, emb: &EmbeddingSet, temperature: f64, h: f64) -> Result<f64> {
    let analytic = ce_cosine_grad(w, emb, temperature)?;
    let mut failure = None;
    let numeric = central_difference(w.as_slice(), h, |x| {
        ce_cosine_loss(&with_data(w, x), emb, temperature).unwrap_or_else(|e| {
            failure = Some(e);
            0.0
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(max_relative_error(analytic.as_slice(), &numeric))
}

/// A seeded F64 weight matrix with no ORL entry within [`KINK_MARGIN`] of
/// a kink. Candidates are drawn from one stream until one qualifies.
pub fn seeded_orl_point(seed: u64, d: usize, c: usize) -> Matrix {
    let mut g = GaussianStream::new(seed);
    loop {
        let scale = 0.5;
        let w = Matrix::from_fn(d, c, Dtype::F64, |_, _| scale * g.next_gaussian())
            .expect("finite gaussians");
        if orl_kink_distance(&w) > KINK_MARGIN {
            return w;
        }
    }
}

/// A seeded `(W, embeddings)` pair for the cross-entropy check. Column
/// norms of `W` vary in roughly [0.5, 2].
pub fn seeded_ce_point(seed: u64, d: usize, c: usize, n: usize) -> (Matrix, EmbeddingSet) {
    let mut g = GaussianStream::new(seed);
    let mut data: Vec<f64> = g.take_vec(d * c);
    for j in 0..c {
        let scale = 0.5 + 1.5 * (j as f64) / (c.max(2) - 1) as f64;
        for i in 0..d {
            data[i * c + j] *= scale / libm::sqrt(d as f64);
        }
    }
    let w = Matrix::new(d, c, Dtype::F64, data).expect("finite gaussians");
    let feats = Matrix::new(n, d, Dtype::F64, g.take_vec(n * d)).expect("finite gaussians");
    let labels = LabelTable::new(
        (0..n)
            .map(|i| LabelEntry::new(alloc::format!("g{i}"), (i % c) as u32))
            .collect(),
    )
    .expect("unique ids");
    (
        w,
        EmbeddingSet::new(feats, labels).expect("gaussian rows are nonzero"),
    )
}

//! Probe-parallel distance matrices. Each entry is computed by the same
//! scalar routine regardless of how rows are split, so results are
//! bit-identical for every thread count.

use std::num::NonZeroUsize;
use std::thread;

use reldesc_core::descriptor::{check_compatible, distance_row};
use reldesc_core::eval::evaluate_distances;
use reldesc_core::{Dtype, Error, EvalReport, Features, LabelTable, Matrix, Protocol};

/// Fills `rows` distance rows with `row(i)`, splitting contiguous probe
/// ranges over at most `threads` workers.
fn fill_rows<F>(rows: usize, cols: usize, threads: NonZeroUsize, row: F) -> Vec<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    let mut out = vec![0.0; rows * cols];
    if rows == 0 || cols == 0 {
        return out;
    }
    let per = rows.div_ceil(threads.get().min(rows));
    thread::scope(|s| {
        for (chunk, block) in out.chunks_mut(per * cols).enumerate() {
            let row = &row;
            s.spawn(move || {
                for (r, dst) in block.chunks_mut(cols).enumerate() {
                    dst.copy_from_slice(&row(chunk * per + r));
                }
            });
        }
    });
    out
}

/// Probe-by-gallery Euclidean distances for either feature kind.
pub fn distance_matrix(
    probe: Features<'_>,
    gallery: Features<'_>,
    threads: NonZeroUsize,
) -> reldesc_core::Result<Matrix> {
    let data = match (probe, gallery) {
        (Features::Embeddings(p), Features::Embeddings(g)) => {
            if p.cols() != g.cols() {
                return Err(Error::DimensionMismatch {
                    expected: p.cols(),
                    actual: g.cols(),
                });
            }
            let data = fill_rows(p.rows(), g.rows(), threads, |i| distance_row(p, i, g));
            (p.rows(), g.rows(), data)
        }
        (Features::Descriptors(p), Features::Descriptors(g)) => {
            check_compatible(p, g)?;
            let data = fill_rows(p.len(), g.len(), threads, |i| {
                distance_row(p.values(), i, g.values())
            });
            (p.len(), g.len(), data)
        }
        _ => return Err(Error::KindMismatch),
    };
    Matrix::new(data.0, data.1, Dtype::F64, data.2)
}

/// [`reldesc_core::evaluate`] with the distance stage spread over threads.
pub fn evaluate(
    probe: Features<'_>,
    gallery: Features<'_>,
    probe_labels: &LabelTable,
    gallery_labels: &LabelTable,
    protocol: &Protocol,
    threads: NonZeroUsize,
) -> reldesc_core::Result<EvalReport> {
    let dist = distance_matrix(probe, gallery, threads)?;
    if dist.cols() != gallery_labels.len() {
        return Err(Error::LengthMismatch {
            expected: gallery_labels.len(),
            actual: dist.cols(),
        });
    }
    evaluate_distances(&dist, probe_labels, gallery_labels, protocol)
}

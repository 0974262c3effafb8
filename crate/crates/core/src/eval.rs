//! Probe/gallery retrieval metrics: CMC rank-k accuracy, mAP and mINP.

use alloc::vec::Vec;
use core::fmt;

use crate::descriptor::{embedding_distance_matrix, rd_distance_matrix, RelationDescriptorSet};
use crate::error::{Error, Result};
use crate::labels::{LabelEntry, LabelTable};
use crate::matrix::Matrix;

/// Which gallery entries a probe may be matched against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Protocol {
    /// Drop gallery entries with the probe's own sample id.
    pub exclude_same_sample: bool,
    /// Drop gallery entries sharing the probe's (present) view tag.
    pub exclude_same_view: bool,
    ks: Vec<usize>,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            exclude_same_sample: true,
            exclude_same_view: false,
            ks: alloc::vec![1, 5, 10, 20],
        }
    }
}

impl Protocol {
    pub fn new(exclude_same_sample: bool, exclude_same_view: bool, ks: Vec<usize>) -> Result<Self> {
        if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::ConfigInvalid(
                "ranks must be strictly ascending and >= 1".into(),
            ));
        }
        Ok(Self {
            exclude_same_sample,
            exclude_same_view,
            ks,
        })
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    fn excludes(&self, probe: &LabelEntry, candidate: &LabelEntry) -> bool {
        (self.exclude_same_sample && probe.sample_id == candidate.sample_id)
            || (self.exclude_same_view && probe.view.is_some() && probe.view == candidate.view)
    }
}

/// Valid gallery indices sorted by ascending distance, ties by index.
pub fn rank_gallery(
    dist_row: &[f64],
    gallery: &LabelTable,
    probe: &LabelEntry,
    protocol: &Protocol,
) -> Result<Vec<usize>> {
    if dist_row.len() != gallery.len() {
        return Err(Error::LengthMismatch {
            expected: gallery.len(),
            actual: dist_row.len(),
        });
    }
    let mut order: Vec<usize> = (0..gallery.len())
        .filter(|&g| !protocol.excludes(probe, gallery.get(g)))
        .collect();
    order.sort_by(|&a, &b| dist_row[a].total_cmp(&dist_row[b]));
    Ok(order)
}

/// 1-based positions in `ranking` holding a positive.
fn hit_positions(ranking: &[usize], positives: &[bool]) -> Vec<usize> {
    ranking
        .iter()
        .enumerate()
        .filter(|(_, &g)| positives[g])
        .map(|(pos, _)| pos + 1)
        .collect()
}

fn scored(rankings: &[Vec<usize>], positives: &[Vec<bool>]) -> Vec<Vec<usize>> {
    rankings
        .iter()
        .zip(positives)
        .map(|(r, p)| hit_positions(r, p))
        .filter(|hits| !hits.is_empty())
        .collect()
}

/// Rank-k accuracy (percent) for each `k`, over probes with at least one
/// positive in their ranking. `positives[p][g]` marks gallery `g` as a
/// match for probe `p`.
pub fn cmc(rankings: &[Vec<usize>], positives: &[Vec<bool>], ks: &[usize]) -> Vec<(usize, f64)> {
    let hits = scored(rankings, positives);
    ks.iter()
        .map(|&k| {
            let ok = hits.iter().filter(|h| h[0] <= k).count();
            (k, percent(ok as f64, hits.len()))
        })
        .collect()
}

/// Mean average precision, percent.
pub fn mean_ap(rankings: &[Vec<usize>], positives: &[Vec<bool>]) -> f64 {
    let hits = scored(rankings, positives);
    let total = hits.iter().fold(0.0, |acc, h| {
        let ap = h
            .iter()
            .enumerate()
            .fold(0.0, |s, (i, &pos)| s + (i + 1) as f64 / pos as f64)
            / h.len() as f64;
        acc + ap
    });
    percent(total, hits.len())
}

/// Mean inverse negative penalty, percent: positives count over the
/// position of the last-retrieved positive.
pub fn mean_inp(rankings: &[Vec<usize>], positives: &[Vec<bool>]) -> f64 {
    let hits = scored(rankings, positives);
    let total = hits.iter().fold(0.0, |acc, h| {
        acc + h.len() as f64 / *h.last().expect("nonempty") as f64
    });
    percent(total, hits.len())
}

fn percent(sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        100.0 * sum / count as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `(k, percent)` in ascending `k`.
    pub rank_accuracies: Vec<(usize, f64)>,
    pub map_value: f64,
    pub minp_value: f64,
    pub evaluated_probes: usize,
    /// Probes left with no valid positive after exclusions.
    pub skipped_probes: usize,
}

impl EvalReport {
    pub fn rank(&self, k: usize) -> Option<f64> {
        self.rank_accuracies
            .iter()
            .find(|(kk, _)| *kk == k)
            .map(|(_, v)| *v)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.rank_accuracies {
            writeln!(f, "{:<10} {:>7.2}", alloc::format!("Rank-{k}"), v)?;
        }
        writeln!(f, "{:<10} {:>7.2}", "mAP", self.map_value)?;
        writeln!(f, "{:<10} {:>7.2}", "mINP", self.minp_value)?;
        write!(
            f,
            "probes     {} evaluated, {} skipped",
            self.evaluated_probes, self.skipped_probes
        )
    }
}

/// Scores a precomputed `probe × gallery` distance matrix.
pub fn evaluate_distances(
    dist: &Matrix,
    probe_labels: &LabelTable,
    gallery_labels: &LabelTable,
    protocol: &Protocol,
) -> Result<EvalReport> {
    if gallery_labels.is_empty() {
        return Err(Error::EmptyGallery);
    }
    if dist.rows() != probe_labels.len() {
        return Err(Error::LengthMismatch {
            expected: probe_labels.len(),
            actual: dist.rows(),
        });
    }
    let mut rankings = Vec::with_capacity(dist.rows());
    let mut positives = Vec::with_capacity(dist.rows());
    for (p, probe) in probe_labels.entries().iter().enumerate() {
        rankings.push(rank_gallery(dist.row(p), gallery_labels, probe, protocol)?);
        positives.push(gallery_labels.labels().map(|l| l == probe.label).collect());
    }
    let evaluated = scored(&rankings, &positives).len();
    Ok(EvalReport {
        rank_accuracies: cmc(&rankings, &positives, protocol.ks()),
        map_value: mean_ap(&rankings, &positives),
        minp_value: mean_inp(&rankings, &positives),
        evaluated_probes: evaluated,
        skipped_probes: rankings.len() - evaluated,
    })
}

/// Features compared by Euclidean distance during evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Features<'a> {
    Embeddings(&'a Matrix),
    Descriptors(&'a RelationDescriptorSet),
}

/// Distance matrix, ranking and metrics in one pass.
pub fn evaluate(
    probe: Features<'_>,
    gallery: Features<'_>,
    probe_labels: &LabelTable,
    gallery_labels: &LabelTable,
    protocol: &Protocol,
) -> Result<EvalReport> {
    let dist = match (probe, gallery) {
        (Features::Embeddings(p), Features::Embeddings(g)) => embedding_distance_matrix(p, g)?,
        (Features::Descriptors(p), Features::Descriptors(g)) => rd_distance_matrix(p, g)?,
        _ => return Err(Error::KindMismatch),
    };
    if dist.cols() != gallery_labels.len() {
        return Err(Error::LengthMismatch {
            expected: gallery_labels.len(),
            actual: dist.cols(),
        });
    }
    evaluate_distances(&dist, probe_labels, gallery_labels, protocol)
}

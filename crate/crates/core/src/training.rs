//! Orthogonal regulation loss, cosine-classifier cross-entropy, their
//! analytic gradients, and a full-batch momentum trainer for anchor banks
//! over fixed embeddings.

use alloc::vec;
use alloc::vec::Vec;

use crate::descriptor::unit_row;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix, ZERO_NORM};
use crate::model::{AnchorBank, EmbeddingSet};
use crate::rng::GaussianStream;

/// Logit scale of the cosine classifier.
pub const DEFAULT_TEMPERATURE: f64 = 16.0;
/// Weight of the orthogonality penalty.
pub const DEFAULT_ORL_COEFFICIENT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub orl_coefficient: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.05,
            momentum: 0.9,
            orl_coefficient: DEFAULT_ORL_COEFFICIENT,
            temperature: DEFAULT_TEMPERATURE,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ConfigInvalid(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be > 0");
        }
        if !(self.orl_coefficient >= 0.0 && self.orl_coefficient.is_finite()) {
            return bad("orl_coefficient must be >= 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        Ok(())
    }
}

/// Losses and anchor coherence after a given number of epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub ce: f64,
    pub orl: f64,
    pub mean_offdiag_cos: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// State at initialization (epoch 0).
    pub initial: EpochRecord,
    /// One record per completed epoch, measured after its update.
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> &EpochRecord {
        self.epochs.last().unwrap_or(&self.initial)
    }
}

fn to_columns(w: &Matrix) -> Vec<Vec<f64>> {
    w.columns()
}

fn gram(cols: &[Vec<f64>]) -> Vec<f64> {
    let c = cols.len();
    let mut g = vec![0.0; c * c];
    for a in 0..c {
        for b in 0..c {
            g[a * c + b] = dot(&cols[a], &cols[b]);
        }
    }
    g
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn orl_loss_cols(cols: &[Vec<f64>]) -> f64 {
    let c = cols.len();
    let g = gram(cols);
    let mut total = 0.0;
    for a in 0..c {
        for b in 0..c {
            let target = if a == b { 1.0 } else { 0.0 };
            total += (g[a * c + b] - target).abs();
        }
    }
    total
}

/// Gradient columns of the orthogonality loss: `W (S + Sᵀ)` with
/// `S = sign(WᵀW − I)` and `sign(0) = 0`.
fn orl_grad_cols(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let c = cols.len();
    let d = cols.first().map_or(0, Vec::len);
    let g = gram(cols);
    let s = |a: usize, b: usize| sign(g[a * c + b] - if a == b { 1.0 } else { 0.0 });
    let mut out = vec![vec![0.0; d]; c];
    for (j, out_j) in out.iter_mut().enumerate() {
        for (t, col) in cols.iter().enumerate() {
            let coef = s(t, j) + s(j, t);
            if coef != 0.0 {
                for (o, w) in out_j.iter_mut().zip(col) {
                    *o += coef * w;
                }
            }
        }
    }
    out
}

/// Entrywise L1 norm of `WᵀW − I`, on the raw (unnormalized) weights.
pub fn orl_loss(w: &Matrix) -> f64 {
    orl_loss_cols(&to_columns(w))
}

/// Subgradient of [`orl_loss`] with respect to `W`.
pub fn orl_grad(w: &Matrix) -> Result<Matrix> {
    Matrix::from_columns(&orl_grad_cols(&to_columns(w)), w.dtype())
}

/// Mean of `|cos|` over all ordered pairs of distinct columns.
pub fn mean_offdiag_abs_cosine(w: &Matrix) -> Result<f64> {
    mean_offdiag_cols(&to_columns(w))
}

fn column_norms(cols: &[Vec<f64>]) -> Result<Vec<f64>> {
    cols.iter()
        .enumerate()
        .map(|(j, c)| {
            let n = libm::sqrt(dot(c, c));
            if n <= ZERO_NORM {
                Err(Error::ZeroColumn(j))
            } else {
                Ok(n)
            }
        })
        .collect()
}

fn mean_offdiag_cols(cols: &[Vec<f64>]) -> Result<f64> {
    let c = cols.len();
    if c < 2 {
        return Ok(0.0);
    }
    let norms = column_norms(cols)?;
    let mut total = 0.0;
    for a in 0..c {
        for b in 0..c {
            if a != b {
                total += (dot(&cols[a], &cols[b]) / (norms[a] * norms[b])).abs();
            }
        }
    }
    Ok(total / (c * (c - 1)) as f64)
}

/// Unit embeddings and labels prepared for the classifier.
struct Batch {
    units: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl Batch {
    fn new(emb: &EmbeddingSet, classes: usize, dim: usize) -> Result<Self> {
        if emb.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: emb.dim(),
            });
        }
        let mut labels = Vec::with_capacity(emb.len());
        for l in emb.labels().labels() {
            if l as usize >= classes {
                return Err(Error::LabelOutOfRange { label: l, classes });
            }
            labels.push(l as usize);
        }
        let units = (0..emb.len())
            .map(|i| unit_row(emb.features(), i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { units, labels })
    }
}

/// Mean cross-entropy of the cosine classifier, optionally with its
/// gradient columns.
fn ce_cols(
    cols: &[Vec<f64>],
    batch: &Batch,
    temperature: f64,
    want_grad: bool,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let c = cols.len();
    let d = cols.first().map_or(0, Vec::len);
    let norms = column_norms(cols)?;
    let units: Vec<Vec<f64>> = cols
        .iter()
        .zip(&norms)
        .map(|(col, n)| col.iter().map(|v| v / n).collect())
        .collect();

    let n = batch.units.len();
    let mut loss = 0.0;
    // Per column: Σ coef·ẑ and Σ coef·cos, so grad_j = (g_j − s_j ŵ_j) / (n‖W_j‖).
    let mut acc = if want_grad {
        vec![vec![0.0; d]; c]
    } else {
        Vec::new()
    };
    let mut acc_cos = vec![0.0; if want_grad { c } else { 0 }];
    let mut cos = vec![0.0; c];
    for (z, &y) in batch.units.iter().zip(&batch.labels) {
        for (cj, wj) in cos.iter_mut().zip(&units) {
            *cj = dot(wj, z);
        }
        let max = cos.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) * temperature;
        let sum_exp: f64 = cos.iter().map(|&v| libm::exp(temperature * v - max)).sum();
        let log_z = max + libm::log(sum_exp);
        loss += log_z - temperature * cos[y];
        if want_grad {
            for j in 0..c {
                let p = libm::exp(temperature * cos[j] - log_z);
                let coef = temperature * (p - if j == y { 1.0 } else { 0.0 });
                for (a, zk) in acc[j].iter_mut().zip(z) {
                    *a += coef * zk;
                }
                acc_cos[j] += coef * cos[j];
            }
        }
    }
    let inv_n = 1.0 / n.max(1) as f64;
    let grad = if want_grad {
        (0..c)
            .map(|j| {
                let scale = inv_n / norms[j];
                acc[j]
                    .iter()
                    .zip(&units[j])
                    .map(|(g, w)| (g - acc_cos[j] * w) * scale)
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok((loss * inv_n, grad))
}

/// Mean over samples of `−log softmax(t · cos(z_i, W))[y_i]`.
pub fn ce_cosine_loss(w: &Matrix, emb: &EmbeddingSet, temperature: f64) -> Result<f64> {
    let batch = Batch::new(emb, w.cols(), w.rows())?;
    Ok(ce_cols(&to_columns(w), &batch, temperature, false)?.0)
}

/// Gradient of [`ce_cosine_loss`] with respect to the raw weights, through
/// both normalizations.
pub fn ce_cosine_grad(w: &Matrix, emb: &EmbeddingSet, temperature: f64) -> Result<Matrix> {
    let batch = Batch::new(emb, w.cols(), w.rows())?;
    let (_, grad) = ce_cols(&to_columns(w), &batch, temperature, true)?;
    Matrix::from_columns(&grad, w.dtype().widest(emb.features().dtype()))
}

fn record(epoch: usize, cols: &[Vec<f64>], ce: f64, orl: f64, coef: f64) -> Result<EpochRecord> {
    Ok(EpochRecord {
        epoch,
        total: ce + coef * orl,
        ce,
        orl,
        mean_offdiag_cos: mean_offdiag_cols(cols)?,
    })
}

/// Trains a `d × classes` anchor bank on fixed embeddings.
///
/// Weights start as pinned Gaussians (filled row-major from `cfg.seed`)
/// with columns normalized once, then follow full-batch gradient descent
/// with momentum (`v ← μv + g`, `W ← W − ηv`) on
/// `CE + orl_coefficient · ORL`. The returned bank is column-normalized.
pub fn train_anchor_bank(
    emb: &EmbeddingSet,
    classes: usize,
    cfg: &TrainConfig,
) -> Result<(AnchorBank, TrainHistory)> {
    cfg.validate()?;
    if classes == 0 {
        return Err(Error::ConfigInvalid("classes must be >= 1".into()));
    }
    let d = emb.dim();
    let batch = Batch::new(emb, classes, d)?;
    let mut covered = vec![false; classes];
    batch.labels.iter().for_each(|&l| covered[l] = true);
    if let Some(j) = covered.iter().position(|c| !c) {
        return Err(Error::UncoveredClass(j));
    }

    let mut rng = GaussianStream::new(cfg.seed);
    let init = rng.take_vec(d * classes);
    let mut cols: Vec<Vec<f64>> = (0..classes)
        .map(|j| (0..d).map(|i| init[i * classes + j]).collect())
        .collect();
    for (j, n) in column_norms(&cols)?.into_iter().enumerate() {
        cols[j].iter_mut().for_each(|v| *v /= n);
    }

    let coef = cfg.orl_coefficient;
    let evaluate = |cols: &[Vec<f64>]| -> Result<(f64, f64, Vec<Vec<f64>>)> {
        let (ce, mut grad) = ce_cols(cols, &batch, cfg.temperature, true)?;
        let orl = orl_loss_cols(cols);
        if coef != 0.0 {
            for (g, o) in grad.iter_mut().zip(orl_grad_cols(cols)) {
                for (a, b) in g.iter_mut().zip(o) {
                    *a += coef * b;
                }
            }
        }
        Ok((ce, orl, grad))
    };

    let (mut ce, mut orl, mut grad) = evaluate(&cols)?;
    let initial = record(0, &cols, ce, orl, coef)?;
    let mut velocity = vec![vec![0.0; d]; classes];
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        for ((w, v), g) in cols.iter_mut().zip(&mut velocity).zip(&grad) {
            for ((wi, vi), gi) in w.iter_mut().zip(v.iter_mut()).zip(g) {
                *vi = cfg.momentum * *vi + gi;
                *wi -= cfg.learning_rate * *vi;
            }
        }
        if cols.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        (ce, orl, grad) = evaluate(&cols).map_err(|_| Error::Diverged { epoch })?;
        if !(ce.is_finite() && orl.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        epochs.push(record(epoch, &cols, ce, orl, coef).map_err(|_| Error::Diverged { epoch })?);
    }

    for (j, n) in column_norms(&cols)?.into_iter().enumerate() {
        cols[j].iter_mut().for_each(|v| *v /= n);
    }
    let raw = Matrix::from_columns(&cols, emb.features().dtype())?;
    let bank = AnchorBank::normalized(&raw)?;
    Ok((bank, TrainHistory { initial, epochs }))
}

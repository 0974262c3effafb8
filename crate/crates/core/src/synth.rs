//! Deterministic synthetic identities with view offsets, per-sample noise
//! and test-only covariate shift.
//!
//! Every sample lives in `dim + noise_dims` coordinates. The first `dim`
//! hold `prototype + γ·view_offset + σ·noise`; the trailing `noise_dims`
//! hold near-zero noise for training samples and `shift_strength`-scaled
//! noise for test samples. Rows are unit-normalized.
//!
//! Draw order from the single Gaussian stream is part of the contract:
//! train prototypes, test prototypes, view offsets, then train samples and
//! test samples in (identity, sample, coordinate) order.

use alloc::format;
use alloc::vec::Vec;

use crate::digest::Fnv1a64;
use crate::error::{Error, Result};
use crate::labels::{LabelEntry, LabelTable};
use crate::matrix::{norm, Dtype, Matrix};
use crate::model::EmbeddingSet;
use crate::rng::GaussianStream;

/// Trailing-coordinate noise of training samples, relative to `σ`.
pub const TRAIN_TRAILING_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub dim: usize,
    pub noise_dims: usize,
    pub n_train_ids: usize,
    pub n_test_ids: usize,
    pub samples_per_id: usize,
    pub views: usize,
    pub view_strength: f64,
    pub noise_sigma: f64,
    pub shift_strength: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 11,
            dim: 64,
            noise_dims: 16,
            n_train_ids: 128,
            n_test_ids: 32,
            samples_per_id: 8,
            views: 4,
            view_strength: 0.3,
            noise_sigma: 0.2,
            shift_strength: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ConfigInvalid(msg.into()));
        if self.dim < 2 {
            return bad("dim must be >= 2");
        }
        if self.n_train_ids == 0
            || self.n_test_ids == 0
            || self.samples_per_id == 0
            || self.views == 0
        {
            return bad("counts must be >= 1");
        }
        for (name, v) in [
            ("view_strength", self.view_strength),
            ("noise_sigma", self.noise_sigma),
            ("shift_strength", self.shift_strength),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::ConfigInvalid(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        if u32::try_from(self.n_train_ids + self.n_test_ids).is_err() {
            return bad("too many identities");
        }
        Ok(())
    }

    /// Total embedding width.
    pub fn width(&self) -> usize {
        self.dim + self.noise_dims
    }
}

/// Training identities plus the gallery/probe split of the test identities.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: EmbeddingSet,
    pub gallery: EmbeddingSet,
    pub probe: EmbeddingSet,
}

impl SynthDataset {
    pub fn digest(&self) -> u64 {
        dataset_digest(&[&self.train, &self.gallery, &self.probe])
    }
}

fn unit_gaussian(g: &mut GaussianStream, n: usize) -> Vec<f64> {
    let mut v = g.take_vec(n);
    let len = norm(&v);
    v.iter_mut().for_each(|x| *x /= len);
    v
}

struct Sample {
    values: Vec<f64>,
    entry: LabelEntry,
}

fn into_set(samples: Vec<Sample>, width: usize) -> Result<EmbeddingSet> {
    let rows = samples.len();
    let mut data = Vec::with_capacity(rows * width);
    let mut entries = Vec::with_capacity(rows);
    for s in samples {
        data.extend(s.values);
        entries.push(s.entry);
    }
    EmbeddingSet::new(
        Matrix::new(rows, width, Dtype::F32, data)?,
        LabelTable::new(entries)?,
    )
}

pub fn generate_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut g = GaussianStream::new(cfg.seed);
    let train_protos: Vec<Vec<f64>> = (0..cfg.n_train_ids)
        .map(|_| unit_gaussian(&mut g, cfg.dim))
        .collect();
    let test_protos: Vec<Vec<f64>> = (0..cfg.n_test_ids)
        .map(|_| unit_gaussian(&mut g, cfg.dim))
        .collect();
    let offsets: Vec<Vec<f64>> = (0..cfg.views)
        .map(|_| unit_gaussian(&mut g, cfg.dim))
        .collect();

    let mut sample = |proto: &[f64], s: usize, trailing: f64| -> Vec<f64> {
        let view = &offsets[s % cfg.views];
        let mut v: Vec<f64> = proto
            .iter()
            .zip(view)
            .map(|(p, o)| p + cfg.view_strength * o + cfg.noise_sigma * g.next_gaussian())
            .collect();
        v.extend((0..cfg.noise_dims).map(|_| trailing * g.next_gaussian()));
        let len = norm(&v);
        v.iter_mut().for_each(|x| *x /= len);
        v
    };

    let mut train = Vec::with_capacity(cfg.n_train_ids * cfg.samples_per_id);
    let train_trailing = TRAIN_TRAILING_SCALE * cfg.noise_sigma;
    for (id, proto) in train_protos.iter().enumerate() {
        for s in 0..cfg.samples_per_id {
            train.push(Sample {
                values: sample(proto, s, train_trailing),
                entry: LabelEntry::new(format!("train-{id}-{s}"), id as u32)
                    .with_view((s % cfg.views) as i32),
            });
        }
    }

    let gallery_per_id = cfg.samples_per_id.div_ceil(2);
    let mut gallery = Vec::new();
    let mut probe = Vec::new();
    for (t, proto) in test_protos.iter().enumerate() {
        let label = (cfg.n_train_ids + t) as u32;
        for s in 0..cfg.samples_per_id {
            let entry = LabelEntry::new(format!("test-{t}-{s}"), label)
                .with_view((s % cfg.views) as i32)
                .with_covariate("shifted");
            let values = sample(proto, s, cfg.shift_strength);
            let target = if s < gallery_per_id {
                &mut gallery
            } else {
                &mut probe
            };
            target.push(Sample { values, entry });
        }
    }

    let width = cfg.width();
    Ok(SynthDataset {
        train: into_set(train, width)?,
        gallery: into_set(gallery, width)?,
        probe: into_set(probe, width)?,
    })
}

/// FNV-1a over each set's `RDM1` matrix bytes then its label text, in the
/// order given.
pub fn dataset_digest(sets: &[&EmbeddingSet]) -> u64 {
    let mut h = Fnv1a64::new();
    for s in sets {
        s.features().feed(&mut h);
        h.update(s.labels().render().as_bytes());
    }
    h.finish()
}

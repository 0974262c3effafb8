//! Relation descriptors: re-describing embeddings by their cosine
//! similarity to a bank of anchors taken from a trained classifier.
//!
//! The crate is `no_std` (with `alloc`) and purely algorithmic:
//!
//! - [`matrix`]: dense matrices, the `RDM1` byte codec, normalization
//! - [`descriptor`]: descriptors and embedding/descriptor distances
//! - [`selection`]: farthest-from-barycenter anchor selection
//! - [`spectral`]: Jacobi SVD and lossless top-k anchor reduction
//! - [`training`]: orthogonality loss, cosine cross-entropy, trainer
//! - [`eval`]: CMC, mAP and mINP with exclusion protocols
//! - [`synth`]: seeded synthetic identities with covariate shift
//!
//! File IO, the command-line tool and parallel stages live in the
//! `reldesc` crate.

#![no_std]

extern crate alloc;

pub mod descriptor;
pub mod digest;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod labels;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod selection;
pub mod spectral;
pub mod synth;
pub mod training;

pub use descriptor::{
    compute_rd, embedding_distance, rd_distance, rd_distance_matrix, Descriptor, DescriptorKind,
    RelationDescriptorSet,
};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport, Features, Protocol};
pub use labels::{LabelEntry, LabelTable};
pub use matrix::{normalize_columns, normalize_rows, Dtype, Matrix};
pub use model::{AnchorBank, EmbeddingSet};
pub use selection::{
    divergence_score, fas_select, gather, random_select, Selection, SelectionMethod,
};
pub use spectral::{isometry_report, reduce_anchors, reduced_rd, svd, ReducedAnchors, SvdFactors};
pub use synth::{generate_dataset, SynthConfig, SynthDataset};
pub use training::{train_anchor_bank, TrainConfig, TrainHistory};

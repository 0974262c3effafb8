#![allow(dead_code)]

use reldesc_core::rng::GaussianStream;
use reldesc_core::{AnchorBank, Dtype, EmbeddingSet, LabelEntry, LabelTable, Matrix};

pub fn gaussian_matrix(seed: u64, rows: usize, cols: usize, dtype: Dtype) -> Matrix {
    let mut g = GaussianStream::new(seed);
    Matrix::from_fn(rows, cols, dtype, |_, _| g.next_gaussian()).unwrap()
}

pub fn bank(seed: u64, d: usize, c: usize) -> AnchorBank {
    AnchorBank::raw(gaussian_matrix(seed, d, c, Dtype::F64))
}

/// `n` Gaussian rows labelled `i % classes`, viewed `i % 3`.
pub fn embeddings(seed: u64, n: usize, d: usize, classes: u32, dtype: Dtype) -> EmbeddingSet {
    let labels = LabelTable::new(
        (0..n)
            .map(|i| LabelEntry::new(format!("s{i}"), i as u32 % classes).with_view((i % 3) as i32))
            .collect(),
    )
    .unwrap();
    EmbeddingSet::new(gaussian_matrix(seed, n, d, dtype), labels).unwrap()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

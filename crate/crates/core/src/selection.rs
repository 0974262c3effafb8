//! Anchor subset selection.
//!
//! Farthest selection is a greedy dispersion heuristic: seed with the anchor
//! whose summed distance to all others is largest, then repeatedly add the
//! unselected anchor farthest from the barycenter of the ones picked so far.
//! All geometry is on column-normalized anchors. Ties go to the smallest
//! column index.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};
use crate::model::AnchorBank;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionMethod {
    Fas,
    Random,
}

impl SelectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Fas => "fas",
            SelectionMethod::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fas" => Some(SelectionMethod::Fas),
            "random" => Some(SelectionMethod::Random),
            _ => None,
        }
    }
}

/// Ordered anchor indices plus the mean pairwise distance among them.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub method: SelectionMethod,
    pub seed: Option<u64>,
    /// Mean pairwise distance of the selected unit anchors; 0 when fewer
    /// than two are selected.
    pub divergence: f64,
}

impl Selection {
    /// Checks the indices against a bank with `columns` anchors.
    pub fn validate(&self, columns: usize) -> Result<()> {
        let mut seen = vec![false; columns];
        for &i in &self.indices {
            if i >= columns {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: columns,
                });
            }
            if seen[i] {
                return Err(Error::DuplicateIndex(i));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

fn check_n(n: usize, available: usize) -> Result<()> {
    if n == 0 || n > available {
        return Err(Error::NOutOfRange { n, available });
    }
    Ok(())
}

/// Index of the first maximum.
fn first_argmax(values: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Greedy farthest-from-barycenter selection of `n` anchors.
pub fn fas_select(bank: &AnchorBank, n: usize) -> Result<Selection> {
    check_n(n, bank.len())?;
    let unit = bank.to_normalized()?;
    let columns = unit.weights().columns();
    let c = columns.len();
    let d = unit.dim();

    let sums: Vec<f64> = columns
        .iter()
        .map(|a| columns.iter().fold(0.0, |acc, b| acc + euclidean(a, b)))
        .collect();
    let first = first_argmax(sums.iter().copied().enumerate()).expect("n >= 1 implies C >= 1");

    let mut selected = vec![false; c];
    let mut indices = Vec::with_capacity(n);
    // Running sum of selected columns in selection order; dividing by the
    // count gives the same bits as re-summing every iteration.
    let mut sum = vec![0.0f64; d];
    let mut next = first;
    loop {
        selected[next] = true;
        indices.push(next);
        for (s, v) in sum.iter_mut().zip(&columns[next]) {
            *s += v;
        }
        if indices.len() == n {
            break;
        }
        let count = indices.len() as f64;
        let center: Vec<f64> = sum.iter().map(|s| s / count).collect();
        next = first_argmax(
            columns
                .iter()
                .enumerate()
                .filter(|(j, _)| !selected[*j])
                .map(|(j, col)| (j, euclidean(col, &center))),
        )
        .expect("n <= C leaves a candidate");
    }

    let divergence = mean_pairwise(&columns, &indices);
    Ok(Selection {
        indices,
        method: SelectionMethod::Fas,
        seed: None,
        divergence,
    })
}

/// Uniform sample of `n` anchors without replacement.
///
/// Partial Fisher–Yates over `0..C` driven by SplitMix64: for position `i`,
/// swap with `i + next_u64() % (C - i)`.
pub fn random_select(bank: &AnchorBank, n: usize, seed: u64) -> Result<Selection> {
    check_n(n, bank.len())?;
    let c = bank.len();
    let mut rng = SplitMix64::new(seed);
    let mut pool: Vec<usize> = (0..c).collect();
    for i in 0..n {
        let j = i + rng.next_below((c - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(n);
    let unit = bank.to_normalized()?;
    let divergence = mean_pairwise(&unit.weights().columns(), &pool);
    Ok(Selection {
        indices: pool,
        method: SelectionMethod::Random,
        seed: Some(seed),
        divergence,
    })
}

fn mean_pairwise(columns: &[Vec<f64>], indices: &[usize]) -> f64 {
    if indices.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            total += euclidean(&columns[i], &columns[j]);
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Mean Euclidean distance over all unordered pairs of the given
/// (column-normalized) anchors.
pub fn divergence_score(bank: &AnchorBank, indices: &[usize]) -> Result<f64> {
    if indices.len() < 2 {
        return Err(Error::TooFewIndices(indices.len()));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= bank.len()) {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: bank.len(),
        });
    }
    let unit = bank.to_normalized()?;
    Ok(mean_pairwise(&unit.weights().columns(), indices))
}

/// Extracts the selected columns, in selection order.
pub fn gather(bank: &AnchorBank, sel: &Selection) -> Result<AnchorBank> {
    sel.validate(bank.len())?;
    let w = bank.weights();
    let m = Matrix::from_fn(w.rows(), sel.indices.len(), w.dtype(), |i, j| {
        w.get(i, sel.indices[j])
    })?;
    Ok(AnchorBank::from_parts(m, bank.is_normalized()))
}

//! Dense row-major matrices, the `RDM1` byte codec, and normalization.
//!
//! Values are held as `f64` in memory. A matrix tagged [`Dtype::F32`] only
//! ever holds values that are exactly representable as `f32`, so encoding
//! to the storage payload and decoding it back is bit-exact for both dtypes.

use alloc::vec;
use alloc::vec::Vec;

use crate::digest::Fnv1a64;
use crate::error::{Error, Result};

/// Magic bytes opening every `RDM1` file.
pub const RDM1_MAGIC: [u8; 4] = *b"RDM1";
/// Magic, two `u32` dimensions and the dtype byte.
pub const RDM1_HEADER_LEN: usize = 13;

/// Norms at or below this are treated as zero by the normalizers.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => Err(Error::BadDtype(other)),
        }
    }

    /// Bytes per scalar in the payload.
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    /// F64 if either side is F64.
    pub fn widest(self, other: Dtype) -> Dtype {
        if self == Dtype::F64 || other == Dtype::F64 {
            Dtype::F64
        } else {
            Dtype::F32
        }
    }

    fn round(self, v: f64) -> f64 {
        match self {
            Dtype::F32 => v as f32 as f64,
            Dtype::F64 => v,
        }
    }
}

/// Dense row-major matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    dtype: Dtype,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix, rounding every value to `dtype` precision.
    pub fn new(rows: usize, cols: usize, dtype: Dtype, mut data: Vec<f64>) -> Result<Self> {
        let expected = rows.checked_mul(cols).ok_or(Error::ShapeMismatch {
            expected: usize::MAX,
            actual: data.len(),
        })?;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: data.len(),
            });
        }
        for (i, v) in data.iter_mut().enumerate() {
            *v = dtype.round(*v);
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry(i));
            }
        }
        Ok(Self {
            rows,
            cols,
            dtype,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize, dtype: Dtype) -> Self {
        Self {
            rows,
            cols,
            dtype,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize, dtype: Dtype) -> Self {
        let mut m = Self::zeros(n, n, dtype);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from a closure over `(row, col)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        dtype: Dtype,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, dtype, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>], dtype: Dtype) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    actual: c.len(),
                });
            }
        }
        Self::from_fn(rows, cols, dtype, |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    /// Same values re-tagged (and rounded) to another dtype.
    pub fn with_dtype(&self, dtype: Dtype) -> Result<Self> {
        Self::new(self.rows, self.cols, dtype, self.data.clone())
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            dtype: self.dtype,
            data,
        }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.cols];
        for i in 0..self.rows {
            for (a, v) in acc.iter_mut().zip(self.row(i)) {
                *a += v * v;
            }
        }
        acc.into_iter().map(libm::sqrt).collect()
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|i| norm(self.row(i))).collect()
    }

    /// The 13-byte `RDM1` header for this matrix.
    pub fn header_bytes(&self) -> [u8; RDM1_HEADER_LEN] {
        let mut h = [0u8; RDM1_HEADER_LEN];
        h[..4].copy_from_slice(&RDM1_MAGIC);
        h[4..8].copy_from_slice(&(self.rows as u32).to_le_bytes());
        h[8..12].copy_from_slice(&(self.cols as u32).to_le_bytes());
        h[12] = self.dtype.code();
        h
    }

    /// Little-endian payload in storage precision.
    pub fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * self.dtype.size());
        match self.dtype {
            Dtype::F32 => self
                .data
                .iter()
                .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
            Dtype::F64 => self
                .data
                .iter()
                .for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
        }
        out
    }

    /// Full `RDM1` encoding: header then payload.
    pub fn to_rdm1_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RDM1_HEADER_LEN + self.data.len() * self.dtype.size());
        out.extend_from_slice(&self.header_bytes());
        out.extend_from_slice(&self.payload_bytes());
        out
    }

    pub fn from_rdm1_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || bytes[..4] != RDM1_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < RDM1_HEADER_LEN {
            return Err(Error::ShapeMismatch {
                expected: RDM1_HEADER_LEN,
                actual: bytes.len(),
            });
        }
        let rows = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
        let cols = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
        let dtype = Dtype::from_code(bytes[12])?;
        let payload = &bytes[RDM1_HEADER_LEN..];
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(dtype.size()))
            .unwrap_or(usize::MAX);
        if payload.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: payload.len(),
            });
        }
        let data: Vec<f64> = match dtype {
            Dtype::F32 => payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
            Dtype::F64 => payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
                .collect(),
        };
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry(i));
        }
        Ok(Self {
            rows,
            cols,
            dtype,
            data,
        })
    }

    /// FNV-1a 64 over the `RDM1` header then the payload, i.e. the digest
    /// of the stored file.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv1a64::new();
        self.feed(&mut h);
        h.finish()
    }

    pub(crate) fn feed(&self, h: &mut Fnv1a64) {
        h.update(&self.header_bytes());
        h.update(&self.payload_bytes());
    }
}

/// Scales every column to unit L2 norm.
pub fn normalize_columns(m: &Matrix) -> Result<Matrix> {
    let norms = m.column_norms();
    if let Some(j) = norms.iter().position(|&n| n <= ZERO_NORM) {
        return Err(Error::ZeroColumn(j));
    }
    Matrix::from_fn(m.rows, m.cols, m.dtype, |i, j| m.get(i, j) / norms[j])
}

/// Scales every row to unit L2 norm.
pub fn normalize_rows(m: &Matrix) -> Result<Matrix> {
    let norms = m.row_norms();
    if let Some(i) = norms.iter().position(|&n| n <= ZERO_NORM) {
        return Err(Error::ZeroRow(i));
    }
    Matrix::from_fn(m.rows, m.cols, m.dtype, |i, j| m.get(i, j) / norms[i])
}

/// Inner product accumulated in ascending index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Euclidean distance without dimension checks.
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let s = a.iter().zip(b).fold(0.0, |acc, (x, y)| {
        let d = x - y;
        acc + d * d
    });
    libm::sqrt(s)
}

use core::fmt;

use alloc::string::String;

/// Errors raised by the pure algorithmic layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Leading bytes are not the `RDM1` magic.
    BadMagic,
    /// Declared shape and payload length disagree.
    ShapeMismatch {
        expected: usize,
        actual: usize,
    },
    /// Unknown dtype byte in a matrix header.
    BadDtype(u8),
    /// A NaN or infinite value was found at the given flat index.
    NonFiniteEntry(usize),
    /// A column with (near) zero L2 norm.
    ZeroColumn(usize),
    /// A row with (near) zero L2 norm.
    ZeroRow(usize),
    DimensionMismatch {
        expected: usize,
        actual: usize,
    },
    /// Descriptors or anchors were produced by a different bank.
    AnchorMismatch {
        expected: u64,
        actual: u64,
    },
    /// Requested subset size outside `1..=available`.
    NOutOfRange {
        n: usize,
        available: usize,
    },
    /// Index outside the column range of a bank.
    IndexOutOfRange {
        index: usize,
        len: usize,
    },
    DuplicateIndex(usize),
    TooFewIndices(usize),
    /// Reduced dimension outside `1..=max`.
    KOutOfRange {
        k: usize,
        max: usize,
    },
    /// Jacobi sweeps did not converge within the cap.
    NoConvergence {
        sweeps: usize,
    },
    /// Class label not in `0..classes`.
    LabelOutOfRange {
        label: u32,
        classes: usize,
    },
    /// A class in `0..classes` has no training samples.
    UncoveredClass(usize),
    LengthMismatch {
        expected: usize,
        actual: usize,
    },
    DuplicateSampleId(String),
    /// Label text could not be parsed (line number is 1-based).
    LabelParse {
        line: usize,
        reason: String,
    },
    EmptyGallery,
    /// Probe and gallery features are of different kinds.
    KindMismatch,
    ConfigInvalid(String),
    /// Training produced a non-finite loss or weight at the given epoch.
    Diverged {
        epoch: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::BadMagic => write!(f, "bad magic: expected RDM1"),
            Error::ShapeMismatch { expected, actual } => {
                write!(
                    f,
                    "shape mismatch: expected {expected} payload bytes, found {actual}"
                )
            }
            Error::BadDtype(b) => write!(f, "unknown dtype byte {b}"),
            Error::NonFiniteEntry(i) => write!(f, "non-finite entry at flat index {i}"),
            Error::ZeroColumn(j) => write!(f, "column {j} has zero norm"),
            Error::ZeroRow(i) => write!(f, "row {i} has zero norm"),
            Error::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            Error::AnchorMismatch { expected, actual } => write!(
                f,
                "anchor mismatch: expected digest {expected:#018x}, got {actual:#018x}"
            ),
            Error::NOutOfRange { n, available } => {
                write!(f, "n = {n} out of range 1..={available}")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for {len} columns")
            }
            Error::DuplicateIndex(i) => write!(f, "duplicate index {i}"),
            Error::TooFewIndices(n) => write!(f, "need at least 2 indices, got {n}"),
            Error::KOutOfRange { k, max } => write!(f, "k = {k} out of range 1..={max}"),
            Error::NoConvergence { sweeps } => {
                write!(f, "svd did not converge after {sweeps} sweeps")
            }
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::UncoveredClass(c) => write!(f, "class {c} has no samples"),
            Error::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Error::DuplicateSampleId(id) => write!(f, "duplicate sample id {id:?}"),
            Error::LabelParse { line, reason } => write!(f, "label line {line}: {reason}"),
            Error::EmptyGallery => write!(f, "gallery is empty"),
            Error::KindMismatch => write!(f, "probe and gallery feature kinds differ"),
            Error::ConfigInvalid(msg) => write!(f, "invalid config: {msg}"),
            Error::Diverged { epoch } => write!(f, "training diverged at epoch {epoch}"),
        }
    }
}

impl core::error::Error for Error {}

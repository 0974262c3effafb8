//! On-disk forms: `RDM1` matrices, label tables, `.meta` sidecars for
//! descriptors and reduced anchors, training history CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use reldesc_core::training::EpochRecord;
use reldesc_core::{
    DescriptorKind, EmbeddingSet, LabelTable, Matrix, ReducedAnchors, RelationDescriptorSet,
    TrainHistory,
};

use crate::error::{CliError, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|_| CliError::malformed(path, "not valid UTF-8"))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    Matrix::from_rdm1_bytes(&read_bytes(path)?).map_err(|e| CliError::malformed(path, e))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_bytes(path, &m.to_rdm1_bytes())
}

pub fn read_labels(path: &Path) -> Result<LabelTable> {
    LabelTable::parse(&read_text(path)?).map_err(|e| CliError::malformed(path, e))
}

pub fn write_labels(path: &Path, labels: &LabelTable) -> Result<()> {
    write_bytes(path, labels.render().as_bytes())
}

pub fn read_embeddings(features: &Path, labels: &Path) -> Result<EmbeddingSet> {
    Ok(EmbeddingSet::new(
        read_matrix(features)?,
        read_labels(labels)?,
    )?)
}

/// `<path>.meta` next to a matrix file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn format_digest(d: u64) -> String {
    format!("{d:#018x}")
}

pub fn parse_digest(s: &str) -> Option<u64> {
    u64::from_str_radix(s.strip_prefix("0x")?, 16).ok()
}

/// `key=value` lines, rejecting blank keys and duplicates. Lines starting
/// with `#` and empty lines are ignored.
pub fn parse_key_values(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(format!("line {}: duplicate key {k}", n + 1));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

struct Meta {
    path: PathBuf,
    pairs: Vec<(String, String)>,
}

impl Meta {
    fn read(matrix: &Path) -> Result<Self> {
        let path = sidecar_path(matrix);
        let pairs =
            parse_key_values(&read_text(&path)?).map_err(|r| CliError::malformed(&path, r))?;
        Ok(Self { path, pairs })
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| CliError::malformed(&self.path, format!("missing key {key}")))
    }

    fn digest(&self, key: &str) -> Result<u64> {
        let v = self.get(key)?;
        parse_digest(v).ok_or_else(|| CliError::malformed(&self.path, format!("bad digest {v:?}")))
    }
}

pub fn write_descriptors(path: &Path, rd: &RelationDescriptorSet) -> Result<()> {
    write_matrix(path, rd.values())?;
    let meta = format!(
        "kind={}\nanchor_digest={}\n",
        rd.kind().as_str(),
        format_digest(rd.anchor_digest())
    );
    write_bytes(&sidecar_path(path), meta.as_bytes())
}

pub fn read_descriptors(path: &Path) -> Result<RelationDescriptorSet> {
    let values = read_matrix(path)?;
    let meta = Meta::read(path)?;
    let kind_text = meta.get("kind")?;
    let kind = DescriptorKind::parse(kind_text)
        .ok_or_else(|| CliError::malformed(&meta.path, format!("unknown kind {kind_text:?}")))?;
    Ok(RelationDescriptorSet::from_parts(
        values,
        kind,
        meta.digest("anchor_digest")?,
    ))
}

/// Whether a descriptor sidecar sits next to `path`.
pub fn has_sidecar(path: &Path) -> bool {
    sidecar_path(path).is_file()
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_reduced(path: &Path, reduced: &ReducedAnchors) -> Result<()> {
    write_matrix(path, reduced.weights())?;
    let meta = format!(
        "k={}\nsource_digest={}\nsingular_values={}\n",
        reduced.k(),
        format_digest(reduced.source_digest()),
        join_floats(reduced.singular_values())
    );
    write_bytes(&sidecar_path(path), meta.as_bytes())
}

pub fn read_reduced(path: &Path) -> Result<ReducedAnchors> {
    let weights = read_matrix(path)?;
    let meta = Meta::read(path)?;
    let k: usize = meta
        .get("k")?
        .parse()
        .map_err(|_| CliError::malformed(&meta.path, "bad k"))?;
    if k != weights.cols() {
        return Err(CliError::malformed(
            &meta.path,
            format!("k = {k} but matrix has {} columns", weights.cols()),
        ));
    }
    let sv_text = meta.get("singular_values")?;
    let singular_values = if sv_text.is_empty() {
        Vec::new()
    } else {
        sv_text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| CliError::malformed(&meta.path, "bad singular_values"))?
    };
    Ok(ReducedAnchors::from_parts(
        weights,
        meta.digest("source_digest")?,
        singular_values,
    ))
}

pub const HISTORY_HEADER: &str = "epoch,total,ce,orl,mean_offdiag_cos";

pub fn render_history(h: &TrainHistory) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in std::iter::once(&h.initial).chain(&h.epochs) {
        let EpochRecord {
            epoch,
            total,
            ce,
            orl,
            mean_offdiag_cos,
        } = r;
        writeln!(out, "{epoch},{total},{ce},{orl},{mean_offdiag_cos}").expect("string write");
    }
    out
}

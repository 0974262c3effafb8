//! Per-sample identity labels, view tags and covariate tags.
//!
//! Text form is one line per sample, `sample_id,label,view,covariate`,
//! where `view` and `covariate` may be empty.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEntry {
    pub sample_id: String,
    pub label: u32,
    pub view: Option<i32>,
    pub covariate: Option<String>,
}

impl LabelEntry {
    pub fn new(sample_id: impl Into<String>, label: u32) -> Self {
        Self {
            sample_id: sample_id.into(),
            label,
            view: None,
            covariate: None,
        }
    }

    pub fn with_view(mut self, view: i32) -> Self {
        self.view = Some(view);
        self
    }

    pub fn with_covariate(mut self, covariate: impl Into<String>) -> Self {
        self.covariate = Some(covariate.into());
        self
    }
}

/// Ordered label entries with unique sample ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelTable {
    entries: Vec<LabelEntry>,
}

impl LabelTable {
    pub fn new(entries: Vec<LabelEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.sample_id.is_empty() || e.sample_id.contains([',', '\n', '\r']) {
                return Err(Error::LabelParse {
                    line: 0,
                    reason: format!("invalid sample id {:?}", e.sample_id),
                });
            }
            if let Some(c) = &e.covariate {
                if c.contains(['\n', '\r']) {
                    return Err(Error::LabelParse {
                        line: 0,
                        reason: format!("invalid covariate {c:?}"),
                    });
                }
            }
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::DuplicateSampleId(e.sample_id.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &LabelEntry {
        &self.entries[i]
    }

    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.label)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let bad = |reason: String| Error::LabelParse {
                line: line_no,
                reason,
            };
            let fields: Vec<&str> = line.splitn(4, ',').collect();
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            }
            let label = fields[1]
                .trim()
                .parse::<u32>()
                .map_err(|e| bad(format!("label {:?}: {e}", fields[1])))?;
            let view = match fields[2].trim() {
                "" => None,
                v => Some(
                    v.parse::<i32>()
                        .map_err(|e| bad(format!("view {v:?}: {e}")))?,
                ),
            };
            let covariate = match fields[3] {
                "" => None,
                c => Some(c.to_string()),
            };
            entries.push(LabelEntry {
                sample_id: fields[0].to_string(),
                label,
                view,
                covariate,
            });
        }
        Self::new(entries).map_err(|e| match e {
            Error::LabelParse { reason, .. } => Error::LabelParse { line: 0, reason },
            other => other,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.sample_id);
            out.push(',');
            out.push_str(&e.label.to_string());
            out.push(',');
            if let Some(v) = e.view {
                out.push_str(&v.to_string());
            }
            out.push(',');
            if let Some(c) = &e.covariate {
                out.push_str(c);
            }
            out.push('\n');
        }
        out
    }
}

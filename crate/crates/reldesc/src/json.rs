//! JSON shapes for selections and evaluation reports.

use std::collections::BTreeMap;
use std::path::Path;

use reldesc_core::{EvalReport, Selection, SelectionMethod};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::files::{read_text, write_bytes};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionJson {
    pub method: String,
    pub n: usize,
    pub seed: Option<u64>,
    pub indices: Vec<usize>,
    pub divergence: f64,
}

impl From<&Selection> for SelectionJson {
    fn from(s: &Selection) -> Self {
        Self {
            method: s.method.as_str().to_string(),
            n: s.indices.len(),
            seed: s.seed,
            indices: s.indices.clone(),
            divergence: s.divergence,
        }
    }
}

impl SelectionJson {
    pub fn to_selection(&self) -> std::result::Result<Selection, String> {
        let method = SelectionMethod::parse(&self.method)
            .ok_or_else(|| format!("unknown method {:?}", self.method))?;
        if self.n != self.indices.len() {
            return Err(format!("n = {} but {} indices", self.n, self.indices.len()));
        }
        Ok(Selection {
            indices: self.indices.clone(),
            method,
            seed: self.seed,
            divergence: self.divergence,
        })
    }
}

pub fn write_selection(path: &Path, s: &Selection) -> Result<()> {
    let text = serde_json::to_string_pretty(&SelectionJson::from(s)).expect("serializable");
    write_bytes(path, format!("{text}\n").as_bytes())
}

pub fn read_selection(path: &Path) -> Result<Selection> {
    let text = read_text(path)?;
    let json: SelectionJson =
        serde_json::from_str(&text).map_err(|e| CliError::malformed(path, e))?;
    json.to_selection()
        .map_err(|r| CliError::malformed(path, r))
}

/// Rank to accuracy, written as a JSON object in ascending rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMap(pub Vec<(usize, f64)>);

impl Serialize for RankMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(&k.to_string(), v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for RankMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(d)?;
        let mut ranks = raw
            .into_iter()
            .map(|(k, v)| {
                k.parse::<usize>()
                    .map(|k| (k, v))
                    .map_err(|_| serde::de::Error::custom(format!("bad rank key {k:?}")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        ranks.sort_by_key(|r| r.0);
        Ok(RankMap(ranks))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReportJson {
    pub rank_accuracies: RankMap,
    pub map: f64,
    pub minp: f64,
    pub evaluated_probes: usize,
    pub skipped_probes: usize,
}

impl From<&EvalReport> for EvalReportJson {
    fn from(r: &EvalReport) -> Self {
        Self {
            rank_accuracies: RankMap(r.rank_accuracies.clone()),
            map: r.map_value,
            minp: r.minp_value,
            evaluated_probes: r.evaluated_probes,
            skipped_probes: r.skipped_probes,
        }
    }
}

impl EvalReportJson {
    pub fn to_report(&self) -> EvalReport {
        EvalReport {
            rank_accuracies: self.rank_accuracies.0.clone(),
            map_value: self.map,
            minp_value: self.minp,
            evaluated_probes: self.evaluated_probes,
            skipped_probes: self.skipped_probes,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json(value).as_bytes())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    format!(
        "{}\n",
        serde_json::to_string_pretty(value).expect("serializable")
    )
}

//! synth → train-anchors → select → reduce → describe → eval in one run.

use std::fmt;
use std::num::NonZeroUsize;
use std::path::Path;

use reldesc_core::digest::fnv1a64;
use reldesc_core::spectral::{energy_fraction, reduce_anchors_with};
use reldesc_core::training::EpochRecord;
use reldesc_core::{
    fas_select, gather, generate_dataset, random_select, reduced_rd, AnchorBank, EvalReport,
    Features, ReducedAnchors, RelationDescriptorSet, Selection, SelectionMethod, SynthConfig,
    SynthDataset, TrainHistory,
};
use serde::Serialize;

use crate::config::{render_synth, PipelineConfig};
use crate::error::Result;
use crate::files::{
    format_digest, render_history, write_bytes, write_descriptors, write_labels, write_matrix,
    write_reduced,
};
use crate::json::{to_json, write_selection, EvalReportJson, SelectionJson};
use crate::parallel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordJson {
    pub epoch: usize,
    pub total: f64,
    pub ce: f64,
    pub orl: f64,
    pub mean_offdiag_cos: f64,
}

impl From<&EpochRecord> for RecordJson {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            total: r.total,
            ce: r.ce,
            orl: r.orl,
            mean_offdiag_cos: r.mean_offdiag_cos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub classes: usize,
    pub bank_digest: String,
    pub history_digest: String,
    pub initial: RecordJson,
    #[serde(rename = "final")]
    pub last: RecordJson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReduceSummary {
    pub k: usize,
    pub numerical_rank: usize,
    pub exceeds_rank: bool,
    pub energy_fraction: f64,
    pub source_digest: String,
    pub digest: String,
}

/// Everything the run produced that a fixture can pin. Contains no
/// timings or thread counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub config: Vec<String>,
    pub dataset_digest: String,
    pub train: TrainSummary,
    pub selection: SelectionJson,
    pub reduce: ReduceSummary,
    pub embedding: EvalReportJson,
    pub descriptor: EvalReportJson,
}

/// Intermediate artifacts of a run, kept for writing to disk.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub config: PipelineConfig,
    pub dataset: SynthDataset,
    pub bank: AnchorBank,
    pub history: TrainHistory,
    pub selection: Selection,
    pub reduced: ReducedAnchors,
    pub probe_rd: RelationDescriptorSet,
    pub gallery_rd: RelationDescriptorSet,
    pub embedding: EvalReport,
    pub descriptor: EvalReport,
    pub report: PipelineReport,
}

impl PipelineRun {
    pub fn report_json(&self) -> String {
        to_json(&self.report)
    }

    /// FNV-1a of the report JSON bytes.
    pub fn digest(&self) -> u64 {
        fnv1a64(self.report_json().as_bytes())
    }

    /// Writes every intermediate artifact plus `report.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_dataset(dir, &self.config.synth, &self.dataset)?;
        write_matrix(&dir.join("anchors.rdm"), self.bank.weights())?;
        write_bytes(
            &dir.join("history.csv"),
            render_history(&self.history).as_bytes(),
        )?;
        write_selection(&dir.join("selection.json"), &self.selection)?;
        write_reduced(&dir.join("reduced.rdm"), &self.reduced)?;
        write_descriptors(&dir.join("probe_rd.rdm"), &self.probe_rd)?;
        write_descriptors(&dir.join("gallery_rd.rdm"), &self.gallery_rd)?;
        write_bytes(&dir.join("report.json"), self.report_json().as_bytes())
    }
}

/// Side-by-side embedding and descriptor metrics.
pub struct Comparison<'a>(pub &'a EvalReport, pub &'a EvalReport);

impl fmt::Display for Comparison<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:>10} {:>10} {:>8}",
            "metric", "embedding", "descriptor", "delta"
        )?;
        let mut row = |name: String, a: f64, b: f64| {
            writeln!(f, "{name:<8} {a:>10.2} {b:>10.2} {:>+8.2}", b - a)
        };
        for ((k, a), (_, b)) in self.0.rank_accuracies.iter().zip(&self.1.rank_accuracies) {
            row(format!("Rank-{k}"), *a, *b)?;
        }
        row("mAP".into(), self.0.map_value, self.1.map_value)?;
        row("mINP".into(), self.0.minp_value, self.1.minp_value)
    }
}

/// Writes `{train,gallery,probe}.{rdm,labels}` and `manifest.txt`.
pub fn write_dataset(dir: &Path, cfg: &SynthConfig, ds: &SynthDataset) -> Result<()> {
    for (name, set) in [
        ("train", &ds.train),
        ("gallery", &ds.gallery),
        ("probe", &ds.probe),
    ] {
        write_matrix(&dir.join(format!("{name}.rdm")), set.features())?;
        write_labels(&dir.join(format!("{name}.labels")), set.labels())?;
    }
    let manifest = format!(
        "{}dataset_digest = {}\n",
        render_synth(cfg),
        format_digest(ds.digest())
    );
    write_bytes(&dir.join("manifest.txt"), manifest.as_bytes())
}

pub fn run(config: &PipelineConfig, threads: NonZeroUsize) -> Result<PipelineRun> {
    config.validate().map_err(crate::error::CliError::Invalid)?;
    let dataset = generate_dataset(&config.synth)?;
    let classes = config.synth.n_train_ids;
    let (bank, history) = reldesc_core::train_anchor_bank(&dataset.train, classes, &config.train)?;
    let selection = match config.select_method {
        SelectionMethod::Fas => fas_select(&bank, config.select_n)?,
        SelectionMethod::Random => random_select(&bank, config.select_n, config.select_seed)?,
    };
    let selected = gather(&bank, &selection)?;
    let reduced = reduce_anchors_with(&selected, config.reduce_k, config.rank_policy)?;
    let probe_rd = reduced_rd(&reduced, &dataset.probe)?;
    let gallery_rd = reduced_rd(&reduced, &dataset.gallery)?;

    let (pl, gl) = (dataset.probe.labels(), dataset.gallery.labels());
    let embedding = parallel::evaluate(
        Features::Embeddings(dataset.probe.features()),
        Features::Embeddings(dataset.gallery.features()),
        pl,
        gl,
        &config.protocol,
        threads,
    )?;
    let descriptor = parallel::evaluate(
        Features::Descriptors(&probe_rd),
        Features::Descriptors(&gallery_rd),
        pl,
        gl,
        &config.protocol,
        threads,
    )?;

    let report = PipelineReport {
        config: config.render().lines().map(str::to_string).collect(),
        dataset_digest: format_digest(dataset.digest()),
        train: TrainSummary {
            classes,
            bank_digest: format_digest(bank.checksum()),
            history_digest: format_digest(fnv1a64(render_history(&history).as_bytes())),
            initial: (&history.initial).into(),
            last: history.last().into(),
        },
        selection: (&selection).into(),
        reduce: ReduceSummary {
            k: reduced.k(),
            numerical_rank: reduced.numerical_rank(),
            exceeds_rank: reduced.exceeds_rank(),
            energy_fraction: energy_fraction(reduced.singular_values(), reduced.k()),
            source_digest: format_digest(reduced.source_digest()),
            digest: format_digest(reduced.checksum()),
        },
        embedding: (&embedding).into(),
        descriptor: (&descriptor).into(),
    };
    Ok(PipelineRun {
        config: config.clone(),
        dataset,
        bank,
        history,
        selection,
        reduced,
        probe_rd,
        gallery_rd,
        embedding,
        descriptor,
        report,
    })
}

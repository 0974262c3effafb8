//! Command-line front end. Exit codes: 0 success, 1 validation error,
//! 2 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use reldesc_core::gradcheck::{check_ce, check_orl, seeded_ce_point, seeded_orl_point};
use reldesc_core::spectral::reduce_anchors_with;
use reldesc_core::training::{DEFAULT_ORL_COEFFICIENT, DEFAULT_TEMPERATURE};
use reldesc_core::{
    compute_rd, fas_select, gather, generate_dataset, random_select, reduced_rd, AnchorBank,
    Features, Protocol, SelectionMethod, SynthConfig, TrainConfig,
};

use crate::config::{parse_policy, parse_ranks, PipelineConfig};
use crate::error::{CliError, Result};
use crate::files::{
    format_digest, has_sidecar, read_descriptors, read_embeddings, read_matrix, read_reduced,
    read_text, render_history, write_bytes, write_descriptors, write_matrix, write_reduced,
};
use crate::json::{write_json, write_selection, EvalReportJson};
use crate::{json, parallel, pipeline};

#[derive(Parser, Debug)]
#[command(
    name = "reldesc",
    version,
    about = "Relation descriptors for retrieval embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic train/gallery/probe dataset.
    Synth(SynthArgs),
    /// Train a cosine-classifier anchor bank on labelled embeddings.
    TrainAnchors(TrainArgs),
    /// Choose a subset of anchors.
    Select(SelectArgs),
    /// Reduce (selected) anchors to their top-k spectral directions.
    Reduce(ReduceArgs),
    /// Compute relation descriptors for an embedding set.
    Describe(DescribeArgs),
    /// Score probe features against gallery features.
    Eval(EvalArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Run every stage from a config file and compare embeddings with descriptors.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Trailing distractor coordinates, active only for test samples.
    #[arg(long, default_value_t = 16)]
    noise_dims: usize,
    #[arg(long, default_value_t = 128)]
    train_ids: usize,
    #[arg(long, default_value_t = 32)]
    test_ids: usize,
    #[arg(long, default_value_t = 8)]
    samples_per_id: usize,
    #[arg(long, default_value_t = 4)]
    views: usize,
    #[arg(long, default_value_t = 0.3)]
    view_strength: f64,
    #[arg(long, default_value_t = 0.2)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    shift_strength: f64,
    /// Directory receiving the matrices, label files and manifest.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Number of classes; defaults to the largest label plus one.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    /// Weight of the orthogonality loss.
    #[arg(long, default_value_t = DEFAULT_ORL_COEFFICIENT)]
    orl: f64,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output anchor matrix (d × classes, unit columns).
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch loss CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    n: usize,
    /// `fas` or `random`.
    #[arg(long, default_value = "fas")]
    method: String,
    /// Seed for random selection.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Selection JSON applied to the weights before reducing.
    #[arg(long)]
    selection: Option<PathBuf>,
    #[arg(long)]
    k: usize,
    /// `keep` all k directions or `truncate` at the numerical rank.
    #[arg(long, default_value = "keep")]
    policy: String,
    /// Output matrix; a `.meta` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DescribeArgs {
    /// Full anchor bank (cosine descriptors).
    #[arg(long, conflicts_with = "reduced", required_unless_present = "reduced")]
    weights: Option<PathBuf>,
    /// Selection JSON applied to `--weights`.
    #[arg(long, requires = "weights")]
    selection: Option<PathBuf>,
    /// Reduced anchors written by `reduce`.
    #[arg(long)]
    reduced: Option<PathBuf>,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Output matrix; a `.meta` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Probe features: embeddings, or descriptors with a `.meta` sidecar.
    #[arg(long)]
    probe: PathBuf,
    #[arg(long)]
    probe_labels: PathBuf,
    #[arg(long)]
    gallery: PathBuf,
    #[arg(long)]
    gallery_labels: PathBuf,
    /// Keep gallery entries that share the probe's sample id.
    #[arg(long)]
    keep_same_sample: bool,
    /// Drop gallery entries that share the probe's view tag.
    #[arg(long)]
    exclude_same_view: bool,
    /// Comma-separated ascending ranks.
    #[arg(long, default_value = "1,5,10,20")]
    ranks: String,
    #[arg(long, default_value_t = NonZeroUsize::MIN)]
    threads: NonZeroUsize,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 12)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long, default_value_t = reldesc_core::gradcheck::FD_STEP)]
    step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// `key = value` config; absent keys use the benchmark defaults.
    #[arg(long)]
    config: PathBuf,
    /// Directory for intermediate artifacts and `report.json`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = NonZeroUsize::MIN)]
    threads: NonZeroUsize,
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Synth(a) => synth(a, out),
        Command::TrainAnchors(a) => train(a, out),
        Command::Select(a) => select(a, out),
        Command::Reduce(a) => reduce(a, out),
        Command::Describe(a) => describe(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::Pipeline(a) => run_pipeline(a, out),
    }
    .map(|passed| if passed { 0 } else { 1 })
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| CliError::io("<stdout>", e))
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<bool> {
    let cfg = SynthConfig {
        seed: a.seed,
        dim: a.dim,
        noise_dims: a.noise_dims,
        n_train_ids: a.train_ids,
        n_test_ids: a.test_ids,
        samples_per_id: a.samples_per_id,
        views: a.views,
        view_strength: a.view_strength,
        noise_sigma: a.noise_sigma,
        shift_strength: a.shift_strength,
    };
    let ds = generate_dataset(&cfg)?;
    pipeline::write_dataset(&a.out_dir, &cfg, &ds)?;
    say(
        out,
        format_args!("dataset_digest {}", format_digest(ds.digest())),
    )?;
    Ok(true)
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<bool> {
    let emb = read_embeddings(&a.features, &a.labels)?;
    let classes = match a.classes {
        Some(c) => c,
        None => emb.labels().labels().max().map_or(0, |m| m as usize + 1),
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        momentum: a.momentum,
        orl_coefficient: a.orl,
        temperature: a.temperature,
        seed: a.seed,
    };
    let (bank, history) = reldesc_core::train_anchor_bank(&emb, classes, &cfg)?;
    write_matrix(&a.out, bank.weights())?;
    if let Some(path) = &a.history {
        write_bytes(path, render_history(&history).as_bytes())?;
    }
    let (first, last) = (&history.initial, history.last());
    say(
        out,
        format_args!(
            "ce {:.6} -> {:.6}  orl {:.6} -> {:.6}  mean |cos| {:.6} -> {:.6}",
            first.ce, last.ce, first.orl, last.orl, first.mean_offdiag_cos, last.mean_offdiag_cos
        ),
    )?;
    say(
        out,
        format_args!("anchor_digest {}", format_digest(bank.checksum())),
    )?;
    Ok(true)
}

fn load_bank(path: &Path, selection: Option<&Path>) -> Result<AnchorBank> {
    let bank = AnchorBank::raw(read_matrix(path)?);
    match selection {
        Some(p) => Ok(gather(&bank, &json::read_selection(p)?)?),
        None => Ok(bank),
    }
}

fn select(a: SelectArgs, out: &mut dyn Write) -> Result<bool> {
    let bank = load_bank(&a.weights, None)?;
    let method = SelectionMethod::parse(&a.method)
        .ok_or_else(|| CliError::Invalid(format!("unknown method {:?}", a.method)))?;
    let sel = match method {
        SelectionMethod::Fas => fas_select(&bank, a.n)?,
        SelectionMethod::Random => random_select(&bank, a.n, a.seed)?,
    };
    write_selection(&a.out, &sel)?;
    say(
        out,
        format_args!(
            "selected {} of {} anchors, divergence {:.6}",
            a.n,
            bank.len(),
            sel.divergence
        ),
    )?;
    Ok(true)
}

fn reduce(a: ReduceArgs, out: &mut dyn Write) -> Result<bool> {
    let bank = load_bank(&a.weights, a.selection.as_deref())?;
    let policy = parse_policy(&a.policy)
        .ok_or_else(|| CliError::Invalid(format!("unknown policy {:?}", a.policy)))?;
    let reduced = reduce_anchors_with(&bank, a.k, policy)?;
    write_reduced(&a.out, &reduced)?;
    say(
        out,
        format_args!(
            "k {}  numerical rank {}  reduced_digest {}",
            reduced.k(),
            reduced.numerical_rank(),
            format_digest(reduced.checksum())
        ),
    )?;
    if reduced.exceeds_rank() {
        say(
            out,
            format_args!(
                "warning: k exceeds the numerical rank; trailing directions carry no information"
            ),
        )?;
    }
    Ok(true)
}

fn describe(a: DescribeArgs, out: &mut dyn Write) -> Result<bool> {
    let emb = read_embeddings(&a.features, &a.labels)?;
    let rd = match (&a.weights, &a.reduced) {
        (Some(w), _) => compute_rd(&load_bank(w, a.selection.as_deref())?, &emb)?,
        (None, Some(r)) => reduced_rd(&read_reduced(r)?, &emb)?,
        (None, None) => unreachable!("clap requires one of --weights / --reduced"),
    };
    write_descriptors(&a.out, &rd)?;
    say(
        out,
        format_args!(
            "{} descriptors of width {} ({}), anchor_digest {}",
            rd.len(),
            rd.dim(),
            rd.kind().as_str(),
            format_digest(rd.anchor_digest())
        ),
    )?;
    Ok(true)
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<bool> {
    let ks = parse_ranks(&a.ranks).map_err(CliError::Invalid)?;
    let protocol = Protocol::new(!a.keep_same_sample, a.exclude_same_view, ks)?;
    let pl = crate::files::read_labels(&a.probe_labels)?;
    let gl = crate::files::read_labels(&a.gallery_labels)?;
    let report = match (has_sidecar(&a.probe), has_sidecar(&a.gallery)) {
        (true, true) => {
            let (p, g) = (read_descriptors(&a.probe)?, read_descriptors(&a.gallery)?);
            parallel::evaluate(
                Features::Descriptors(&p),
                Features::Descriptors(&g),
                &pl,
                &gl,
                &protocol,
                a.threads,
            )?
        }
        (false, false) => {
            let (p, g) = (read_matrix(&a.probe)?, read_matrix(&a.gallery)?);
            parallel::evaluate(
                Features::Embeddings(&p),
                Features::Embeddings(&g),
                &pl,
                &gl,
                &protocol,
                a.threads,
            )?
        }
        _ => return Err(reldesc_core::Error::KindMismatch.into()),
    };
    writeln!(out, "{report}").map_err(|e| CliError::io("<stdout>", e))?;
    if let Some(path) = &a.json {
        write_json(path, &EvalReportJson::from(&report))?;
    }
    Ok(true)
}

fn gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<bool> {
    if a.dim == 0 || a.classes == 0 || a.samples == 0 {
        return Err(CliError::Invalid(
            "dim, classes and samples must be >= 1".into(),
        ));
    }
    if !(a.step > 0.0 && a.step.is_finite()) {
        return Err(CliError::Invalid("step must be > 0".into()));
    }
    let orl = check_orl(&seeded_orl_point(a.seed, a.dim, a.classes), a.step)?;
    let (w, emb) = seeded_ce_point(a.seed, a.dim, a.classes, a.samples);
    let ce = check_ce(&w, &emb, a.temperature, a.step)?;
    let verdict = |e: f64| if e <= a.tolerance { "ok" } else { "FAIL" };
    say(
        out,
        format_args!("orl max relative error {orl:.3e} {}", verdict(orl)),
    )?;
    say(
        out,
        format_args!("ce  max relative error {ce:.3e} {}", verdict(ce)),
    )?;
    Ok(orl <= a.tolerance && ce <= a.tolerance)
}

fn run_pipeline(a: PipelineArgs, out: &mut dyn Write) -> Result<bool> {
    let config = PipelineConfig::parse(&read_text(&a.config)?)
        .map_err(|r| CliError::malformed(&a.config, r))?;
    let stage = |out: &mut dyn Write, name: &str| say(out, format_args!("stage {name}"));
    stage(out, "synth, train-anchors, select, reduce, describe, eval")?;
    let run = pipeline::run(&config, a.threads)?;
    if let Some(dir) = &a.out_dir {
        run.write_to(dir)?;
        stage(out, "artifacts written")?;
    }
    let r = &run.report;
    say(out, format_args!("dataset_digest {}", r.dataset_digest))?;
    say(
        out,
        format_args!(
            "anchor_digest {}  reduced_digest {}",
            r.train.bank_digest, r.reduce.digest
        ),
    )?;
    write!(
        out,
        "{}",
        pipeline::Comparison(&run.embedding, &run.descriptor)
    )
    .map_err(|e| CliError::io("<stdout>", e))?;
    say(
        out,
        format_args!("report_digest {}", format_digest(run.digest())),
    )?;
    Ok(true)
}

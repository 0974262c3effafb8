//! Acceptance suite. Every criterion runs at its stated tolerance and
//! prints one PASS/FAIL line; the test fails if any criterion does.

use std::io::Write;
use std::num::NonZeroUsize;
use std::path::Path;
use std::time::{Duration, Instant};

use reldesc::files::render_history;
use reldesc::PipelineConfig;
use reldesc_core::digest::Fnv1a64;
use reldesc_core::gradcheck::{check_ce, check_orl, seeded_ce_point, seeded_orl_point, FD_STEP};
use reldesc_core::rng::{GaussianStream, SplitMix64};
use reldesc_core::{
    compute_rd, divergence_score, evaluate, fas_select, generate_dataset, isometry_report,
    random_select, rd_distance_matrix, reduce_anchors, svd, train_anchor_bank, AnchorBank, Dtype,
    EmbeddingSet, EvalReport, Features, LabelEntry, LabelTable, Matrix, Protocol, SynthConfig,
    TrainConfig, TrainHistory,
};

/// Digest of the pinned benchmark's report.json, frozen after the first
/// verified run.
const BENCH_REPORT_DIGEST: u64 = 0xc2d0787810365ee8;
/// Digest of the pinned benchmark dataset.
const BENCH_DATASET_DIGEST: u64 = 0x5c0790a59b343415;

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(
    id: &'static str,
    name: &'static str,
    limit: Option<Duration>,
    f: impl FnOnce() -> (bool, String),
) -> Outcome {
    let start = Instant::now();
    let (ok, mut detail) = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    if let Some(l) = limit {
        detail.push_str(&format!("; limit {:.0} s", l.as_secs_f64()));
    }
    Outcome {
        id,
        name,
        pass: ok && in_time,
        detail,
        elapsed,
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn gaussian(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut g = GaussianStream::new(seed);
    Matrix::from_fn(rows, cols, Dtype::F64, |_, _| g.next_gaussian()).unwrap()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

// ---------------------------------------------------------------- 1 and 2

/// Greedy farthest-from-barycenter written directly from its description.
fn naive_fas(w: &Matrix, n: usize) -> Vec<usize> {
    let cols: Vec<Vec<f64>> = (0..w.cols()).map(|j| unit(&w.column(j))).collect();
    let mut picked: Vec<usize> = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0);
    for (a, ca) in cols.iter().enumerate() {
        let s: f64 = cols.iter().map(|cb| dist(ca, cb)).sum();
        if s > best.0 {
            best = (s, a);
        }
    }
    picked.push(best.1);
    while picked.len() < n {
        let mut center = vec![0.0; w.rows()];
        for &p in &picked {
            for (c, v) in center.iter_mut().zip(&cols[p]) {
                *c += v;
            }
        }
        let count = picked.len() as f64;
        center.iter_mut().for_each(|c| *c /= count);
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (j, cj) in cols.iter().enumerate() {
            if !picked.contains(&j) {
                let d = dist(cj, &center);
                if d > best.0 {
                    best = (d, j);
                }
            }
        }
        picked.push(best.1);
    }
    picked
}

fn criterion_1() -> (bool, String) {
    let mut rng = SplitMix64::new(1);
    let mut mismatches = 0;
    for seed in 0..200u64 {
        let c = 1 + rng.next_below(64) as usize;
        let d = 1 + rng.next_below(16) as usize;
        let n = 1 + rng.next_below(c as u64) as usize;
        let bank = AnchorBank::raw(gaussian(seed, d, c));
        if fas_select(&bank, n).unwrap().indices != naive_fas(bank.weights(), n) {
            mismatches += 1;
        }
    }
    (
        mismatches == 0,
        format!("200 banks, {mismatches} mismatches"),
    )
}

fn criterion_2() -> (bool, String) {
    let mut worst_margin = f64::INFINITY;
    let mut failures = 0;
    for seed in 0..20u64 {
        let bank = AnchorBank::raw(gaussian(1000 + seed, 32, 128));
        let fas = fas_select(&bank, 32).unwrap();
        let fas_div = divergence_score(&bank, &fas.indices).unwrap();
        let random_mean = (0..100u64)
            .map(|s| random_select(&bank, 32, s).unwrap().divergence)
            .sum::<f64>()
            / 100.0;
        worst_margin = worst_margin.min(fas_div - random_mean);
        if fas_div <= random_mean {
            failures += 1;
        }
    }
    (
        failures == 0,
        format!(
            "20 banks, {failures} failures, smallest FAS-minus-random margin {worst_margin:.4}"
        ),
    )
}

// ---------------------------------------------------------------- 3 and 4

fn criterion_3() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let (d, n) = match seed {
            0 => (64, 256),
            1 => (1, 1),
            2 => (64, 1),
            3 => (1, 256),
            _ => (
                1 + (seed as usize * 13) % 64,
                1 + (seed as usize * 37) % 256,
            ),
        };
        let m = gaussian(2000 + seed, d, n);
        let f = svd(&m).unwrap();
        let r = f.reconstruct();
        let err =
            dist(m.as_slice(), r.as_slice()) / dist(m.as_slice(), &vec![0.0; m.as_slice().len()]);
        worst = worst.max(err);
    }
    (
        worst <= 1e-6,
        format!("50 banks, max relative Frobenius error {worst:.2e}"),
    )
}

fn criterion_4() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut ranks = Vec::new();
    for seed in 0..50u64 {
        let d = 4 + (seed as usize * 7) % 29;
        let c = 2 + (seed as usize * 11) % 60;
        let bank = AnchorBank::raw(gaussian(3000 + seed, d, c));
        let rank = svd(bank.to_normalized().unwrap().weights())
            .unwrap()
            .numerical_rank();
        ranks.push(rank);
        let reduced = reduce_anchors(&bank, rank).unwrap();
        let labels = LabelTable::new(
            (0..32)
                .map(|i| LabelEntry::new(format!("p{i}"), 0))
                .collect(),
        )
        .unwrap();
        let emb = EmbeddingSet::new(gaussian(4000 + seed, 32, d), labels).unwrap();
        let rep = isometry_report(&bank, &reduced, &emb).unwrap();
        worst = worst.max(rep.max_relative_error);
    }
    let (lo, hi) = (ranks.iter().min().unwrap(), ranks.iter().max().unwrap());
    (
        worst <= 1e-5,
        format!(
            "50 instances x 32 probes, ranks {lo}..={hi}, max relative distance error {worst:.2e}"
        ),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> (bool, String) {
    let (mut entries, mut worst_entry, mut worst_ratio) = (0usize, 0.0f64, 0.0f64);
    let mut ok = true;
    let mut check = |bank: &AnchorBank, emb: &EmbeddingSet| {
        let rd = compute_rd(bank, emb).unwrap();
        for &v in rd.values().as_slice() {
            entries += 1;
            worst_entry = worst_entry.max(v.abs());
            ok &= (-1.0 - 1e-6..=1.0 + 1e-6).contains(&v);
        }
        let bound = 2.0 * (bank.len() as f64).sqrt();
        let dm = rd_distance_matrix(&rd, &rd).unwrap();
        for &x in dm.as_slice() {
            worst_ratio = worst_ratio.max(x / bound);
            ok &= x <= bound + 1e-6;
        }
    };
    for seed in 0..40u64 {
        let d = 2 + seed as usize % 20;
        let c = 1 + (seed as usize * 17) % 90;
        let bank = AnchorBank::raw(gaussian(5000 + seed, d, c).with_dtype(Dtype::F32).unwrap());
        let labels = LabelTable::new(
            (0..24)
                .map(|i| LabelEntry::new(format!("s{i}"), 0))
                .collect(),
        )
        .unwrap();
        let mut feats = gaussian(6000 + seed, 24, d);
        if seed % 4 == 0 {
            // Antipodal pairs reach the distance bound.
            let mut v = feats.into_vec();
            for i in (0..24).step_by(2) {
                for j in 0..d {
                    v[(i + 1) * d + j] = -v[i * d + j];
                }
            }
            feats = Matrix::new(24, d, Dtype::F64, v).unwrap();
        }
        check(&bank, &EmbeddingSet::new(feats, labels).unwrap());
    }
    let ds = generate_dataset(&SynthConfig {
        n_train_ids: 32,
        ..SynthConfig::default()
    })
    .unwrap();
    let bank = AnchorBank::raw(gaussian(7000, 80, 40));
    for set in [&ds.train, &ds.gallery, &ds.probe] {
        check(&bank, set);
    }
    (
        ok,
        format!("{entries} entries, max |entry| {worst_entry:.9}, max distance / 2 sqrt(|AG|) {worst_ratio:.6}"),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> (bool, String) {
    let mut orl_worst: f64 = 0.0;
    let mut ce_errors = Vec::new();
    let mut ce_fine: f64 = 0.0;
    for seed in 0..20u64 {
        let w = seeded_orl_point(seed, 6 + seed as usize % 5, 3 + seed as usize % 6);
        orl_worst = orl_worst.max(check_orl(&w, FD_STEP).unwrap());
        let (w, emb) = seeded_ce_point(seed, 8, 5, 12);
        ce_errors.push(check_ce(&w, &emb, 16.0, FD_STEP).unwrap());
        ce_fine = ce_fine.max(check_ce(&w, &emb, 16.0, FD_STEP / 10.0).unwrap());
    }
    let ce_worst = ce_errors.iter().cloned().fold(0.0, f64::max);
    let ce_failing: Vec<usize> = (0..20).filter(|&i| ce_errors[i] > 1e-5).collect();
    (
        orl_worst <= 1e-5 && ce_worst <= 1e-5,
        format!(
            "h = 1e-4: ORL max rel err {orl_worst:.2e}, CE max rel err {ce_worst:.2e} (CE instances above 1e-5: {ce_failing:?}); context only, CE at h = 1e-5: {ce_fine:.2e}"
        ),
    )
}

// ---------------------------------------------------------------- 7

fn orl_data() -> EmbeddingSet {
    let cfg = SynthConfig {
        seed: 7,
        dim: 32,
        noise_dims: 0,
        n_train_ids: 16,
        n_test_ids: 1,
        samples_per_id: 50,
        ..SynthConfig::default()
    };
    generate_dataset(&cfg).unwrap().train
}

fn orl_config(learning_rate: f64) -> TrainConfig {
    TrainConfig {
        epochs: 200,
        learning_rate,
        momentum: 0.9,
        orl_coefficient: 1.0,
        seed: 7,
        ..TrainConfig::default()
    }
}

fn orl_runs() -> ((AnchorBank, TrainHistory), (AnchorBank, TrainHistory)) {
    let emb = orl_data();
    let cfg = orl_config(0.05);
    let with = train_anchor_bank(&emb, 16, &cfg).unwrap();
    let without = train_anchor_bank(
        &emb,
        16,
        &TrainConfig {
            orl_coefficient: 0.0,
            ..cfg
        },
    )
    .unwrap();
    (with, without)
}

fn artifact_digest(runs: &((AnchorBank, TrainHistory), (AnchorBank, TrainHistory))) -> u64 {
    let mut h = Fnv1a64::new();
    for (bank, hist) in [&runs.0, &runs.1] {
        h.update(&bank.weights().to_rdm1_bytes());
        h.update(render_history(hist).as_bytes());
    }
    h.finish()
}

// ---------------------------------------------------------------- 8

struct Split {
    probe: Matrix,
    gallery: Matrix,
    pl: LabelTable,
    gl: LabelTable,
}

fn split(seed: u64) -> Split {
    let mut r = SplitMix64::new(seed);
    let mut g = GaussianStream::new(seed);
    let gallery_n = 1 + r.next_below(20) as usize;
    let probe_n = 1 + r.next_below(12) as usize;
    let d = 1 + r.next_below(6) as usize;
    let ids = 1 + r.next_below(5);
    let quantized = seed.is_multiple_of(2);
    let mut value = |r: &mut SplitMix64| {
        if quantized {
            r.next_below(3) as f64 - 1.0
        } else {
            g.next_gaussian()
        }
    };
    let mut draw = |n: usize, r: &mut SplitMix64| {
        let data: Vec<f64> = (0..n * d).map(|_| value(r)).collect();
        Matrix::new(n, d, Dtype::F64, data).unwrap()
    };
    let gallery = draw(gallery_n, &mut r);
    let probe = draw(probe_n, &mut r);
    let entry = |r: &mut SplitMix64, id: String| {
        let e = LabelEntry::new(id, r.next_below(ids) as u32);
        match r.next_below(3) {
            0 => e,
            v => e.with_view(v as i32),
        }
    };
    let gl: Vec<LabelEntry> = (0..gallery_n)
        .map(|i| entry(&mut r, format!("g{i}")))
        .collect();
    let pl: Vec<LabelEntry> = (0..probe_n)
        .map(|i| {
            // A quarter of probes share an id with a gallery sample.
            let id = if r.next_below(4) == 0 {
                format!("g{i}")
            } else {
                format!("p{i}")
            };
            entry(&mut r, id)
        })
        .collect();
    Split {
        probe,
        gallery,
        pl: LabelTable::new(pl).unwrap(),
        gl: LabelTable::new(gl).unwrap(),
    }
}

/// Exhaustive scoring straight from the metric definitions.
fn oracle(s: &Split, protocol: &Protocol) -> EvalReport {
    let ks = protocol.ks();
    let mut hits = vec![0usize; ks.len()];
    let (mut ap_sum, mut inp_sum, mut evaluated, mut skipped) = (0.0, 0.0, 0usize, 0usize);
    for (pi, p) in s.pl.entries().iter().enumerate() {
        let mut cand: Vec<(f64, usize)> = Vec::new();
        for gi in 0..s.gl.len() {
            let g = s.gl.get(gi);
            let same_sample = protocol.exclude_same_sample && g.sample_id == p.sample_id;
            let same_view = protocol.exclude_same_view && p.view.is_some() && g.view == p.view;
            if !same_sample && !same_view {
                cand.push((dist(s.probe.row(pi), s.gallery.row(gi)), gi));
            }
        }
        // Selection sort on (distance, index).
        for a in 0..cand.len() {
            let mut m = a;
            for b in a + 1..cand.len() {
                if cand[b] < cand[m] {
                    m = b;
                }
            }
            cand.swap(a, m);
        }
        let positive: Vec<bool> = cand
            .iter()
            .map(|&(_, gi)| s.gl.get(gi).label == p.label)
            .collect();
        let total = positive.iter().filter(|&&x| x).count();
        if total == 0 {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        for (slot, &k) in ks.iter().enumerate() {
            if positive.iter().take(k).any(|&x| x) {
                hits[slot] += 1;
            }
        }
        let (mut seen, mut ap, mut last) = (0usize, 0.0, 0usize);
        for (i, &x) in positive.iter().enumerate() {
            if x {
                seen += 1;
                ap += seen as f64 / (i + 1) as f64;
                last = i + 1;
            }
        }
        ap_sum += ap / total as f64;
        inp_sum += total as f64 / last as f64;
    }
    let pct = |x: f64| {
        if evaluated == 0 {
            0.0
        } else {
            100.0 * x / evaluated as f64
        }
    };
    EvalReport {
        rank_accuracies: ks
            .iter()
            .zip(&hits)
            .map(|(&k, &h)| (k, pct(h as f64)))
            .collect(),
        map_value: pct(ap_sum),
        minp_value: pct(inp_sum),
        evaluated_probes: evaluated,
        skipped_probes: skipped,
    }
}

fn criterion_8() -> (bool, String) {
    let protocols = [
        Protocol::default(),
        Protocol::new(true, true, vec![1, 3, 5, 20]).unwrap(),
        Protocol::new(false, false, vec![1, 2]).unwrap(),
    ];
    let (mut mismatches, mut compared, mut skipped) = (0, 0, 0);
    for seed in 0..100u64 {
        let s = split(seed);
        for p in &protocols {
            let got = evaluate(
                Features::Embeddings(&s.probe),
                Features::Embeddings(&s.gallery),
                &s.pl,
                &s.gl,
                p,
            )
            .unwrap();
            let want = oracle(&s, p);
            skipped += want.skipped_probes;
            compared += 1;
            if got != want {
                mismatches += 1;
            }
        }
    }
    (
        mismatches == 0,
        format!("100 splits x 3 protocols, {mismatches}/{compared} reports differ ({skipped} probes skipped)"),
    )
}

// ---------------------------------------------------------------- 9 and 10

fn bench_config() -> PipelineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bench.cfg");
    PipelineConfig::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn threads(n: usize) -> NonZeroUsize {
    NonZeroUsize::new(n).unwrap()
}

#[test]
fn acceptance() {
    let mut results = vec![
        timed("1", "FAS oracle equality", secs(5), criterion_1),
        timed("2", "FAS quality vs random", secs(10), criterion_2),
        timed("3", "SVD reconstruction", None, criterion_3),
        timed("4", "isometry at numerical rank", None, criterion_4),
        timed("5", "descriptor bounds", None, criterion_5),
        timed("6", "gradient checks", secs(10), criterion_6),
    ];

    let start = Instant::now();
    let orl = orl_runs();
    let orl_elapsed = start.elapsed();
    let ((_, with), (_, without)) = &orl;
    let (init, fin) = (with.initial.mean_offdiag_cos, with.last().mean_offdiag_cos);
    let in_time = orl_elapsed < Duration::from_secs(15);
    let (_, slower) = train_anchor_bank(&orl_data(), 16, &orl_config(0.01)).unwrap();
    let slower_ratio = slower.last().mean_offdiag_cos / slower.initial.mean_offdiag_cos;
    results.push(Outcome {
        id: "7a",
        name: "ORL halves mean off-diagonal |cos|",
        pass: fin <= 0.5 * init && in_time,
        detail: format!("initial {init:.4}, final {fin:.4}, ratio {:.3} (need <= 0.5); limit 15 s; context only, ratio at lr 0.01: {slower_ratio:.3}", fin / init),
        elapsed: orl_elapsed,
    });
    results.push(Outcome {
        id: "7b",
        name: "ORL loss below coefficient-0 run",
        pass: with.last().orl < without.last().orl && in_time,
        detail: format!(
            "final ORL {:.4} with vs {:.4} without; limit 15 s",
            with.last().orl,
            without.last().orl
        ),
        elapsed: orl_elapsed,
    });

    results.push(timed("8", "metric oracle", None, criterion_8));

    let cfg = bench_config();
    let mut bench_digest = 0;
    results.push(timed("9", "end-to-end synthetic benchmark", secs(60), || {
        let run = reldesc::run_pipeline(&cfg, threads(1)).unwrap();
        bench_digest = run.digest();
        let (emb, rd) = (run.embedding.rank(1).unwrap(), run.descriptor.rank(1).unwrap());
        let dataset = run.dataset.digest();
        let minp_ok = [&run.embedding, &run.descriptor].iter().all(|r| r.minp_value <= r.map_value);
        (
            rd >= emb && bench_digest == BENCH_REPORT_DIGEST && dataset == BENCH_DATASET_DIGEST && minp_ok,
            format!(
                "Rank-1 embedding {emb:.2} vs descriptor {rd:.2}; mAP {:.2} vs {:.2}; mINP {:.2} vs {:.2}; report digest {bench_digest:#018x} (fixture {BENCH_REPORT_DIGEST:#018x}); dataset digest {dataset:#018x}",
                run.embedding.map_value, run.descriptor.map_value, run.embedding.minp_value, run.descriptor.minp_value
            ),
        )
    }));

    results.push(timed("10", "determinism across repeats and threads", None, || {
        let orl_digest = artifact_digest(&orl);
        let orl_again = artifact_digest(&orl_runs());
        let mut digests = vec![bench_digest];
        for t in [2, 5] {
            digests.push(reldesc::run_pipeline(&cfg, threads(t)).unwrap().digest());
        }
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("bench.cfg");
        std::fs::write(&cfg_path, cfg.render()).unwrap();
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_reldesc"))
            .args(["pipeline", "--config", cfg_path.to_str().unwrap(), "--threads", "8"])
            .output()
            .unwrap();
        let cli_line = String::from_utf8_lossy(&out.stdout)
            .lines()
            .last()
            .unwrap_or_default()
            .to_string();
        let cli_ok = out.status.success() && cli_line == format!("report_digest {bench_digest:#018x}");
        let same = digests.iter().all(|&d| d == bench_digest);
        (
            orl_digest == orl_again && same && cli_ok,
            format!(
                "ORL artifacts {orl_digest:#018x} / {orl_again:#018x}; benchmark digests at 1, 2, 5 threads {:?}; CLI at 8 threads {}",
                digests.iter().map(|d| format!("{d:#018x}")).collect::<Vec<_>>(),
                if cli_ok { "identical" } else { "differs" }
            ),
        )
    }));

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "\nacceptance criteria");
    for r in &results {
        let _ = writeln!(
            stdout,
            "[{}] {:>3} {:<40} {:>7.2} s  {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.elapsed.as_secs_f64(),
            r.detail
        );
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    let _ = writeln!(
        stdout,
        "{} of {} passed",
        results.len() - failed.len(),
        results.len()
    );
    let _ = stdout.flush();
    drop(stdout);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

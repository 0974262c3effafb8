use proptest::prelude::*;
use reldesc_core::eval::{cmc, evaluate_distances, mean_ap, mean_inp, rank_gallery};
use reldesc_core::rng::SplitMix64;
use reldesc_core::{Dtype, EvalReport, LabelEntry, LabelTable, Matrix, Protocol};

struct Case {
    dist: Matrix,
    probe: LabelTable,
    gallery: LabelTable,
}

/// Small probe/gallery split with quantized distances so ties occur.
fn case(seed: u64, gallery: usize, probes: usize) -> Case {
    let mut r = SplitMix64::new(seed);
    let ids = 1 + r.next_below(4) as u32;
    let entry = |r: &mut SplitMix64, name: String| {
        LabelEntry::new(name, r.next_below(ids as u64) as u32).with_view(r.next_below(3) as i32)
    };
    let g: Vec<LabelEntry> = (0..gallery)
        .map(|i| entry(&mut r, format!("s{i}")))
        .collect();
    let p: Vec<LabelEntry> = (0..probes)
        .map(|i| {
            // Some probes reuse a gallery sample id to exercise exclusion.
            let name = if r.next_below(4) == 0 {
                format!("s{}", r.next_below(gallery as u64))
            } else {
                format!("p{i}")
            };
            entry(&mut r, name)
        })
        .collect();
    let mut names = std::collections::HashSet::new();
    let p: Vec<LabelEntry> = p
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            if names.insert(e.sample_id.clone()) {
                e
            } else {
                LabelEntry {
                    sample_id: format!("p{i}"),
                    ..e
                }
            }
        })
        .collect();
    let dist = Matrix::from_fn(probes, gallery, Dtype::F64, |_, _| {
        r.next_below(6) as f64 * 0.25
    })
    .unwrap();
    Case {
        dist,
        probe: LabelTable::new(p).unwrap(),
        gallery: LabelTable::new(g).unwrap(),
    }
}

/// Direct scoring from the definitions, one probe at a time.
fn oracle(c: &Case, protocol: &Protocol) -> EvalReport {
    let mut rank_hits = vec![0usize; protocol.ks().len()];
    let (mut ap_sum, mut inp_sum, mut evaluated, mut skipped) = (0.0, 0.0, 0usize, 0usize);
    for (pi, p) in c.probe.entries().iter().enumerate() {
        let mut valid: Vec<usize> = Vec::new();
        for gi in 0..c.gallery.len() {
            let g = c.gallery.get(gi);
            if protocol.exclude_same_sample && g.sample_id == p.sample_id {
                continue;
            }
            if protocol.exclude_same_view && p.view.is_some() && g.view == p.view {
                continue;
            }
            valid.push(gi);
        }
        // Insertion sort on (distance, index).
        let mut order: Vec<usize> = Vec::new();
        for gi in valid {
            let key = (c.dist.get(pi, gi), gi);
            let pos = order
                .iter()
                .position(|&o| (c.dist.get(pi, o), o) > key)
                .unwrap_or(order.len());
            order.insert(pos, gi);
        }
        let is_pos: Vec<bool> = order
            .iter()
            .map(|&g| c.gallery.get(g).label == p.label)
            .collect();
        let total = is_pos.iter().filter(|&&b| b).count();
        if total == 0 {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        let first = is_pos.iter().position(|&b| b).unwrap() + 1;
        for (slot, &k) in protocol.ks().iter().enumerate() {
            if first <= k {
                rank_hits[slot] += 1;
            }
        }
        let mut seen = 0;
        let mut ap = 0.0;
        let mut last = 0;
        for (i, &b) in is_pos.iter().enumerate() {
            if b {
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
        rank_accuracies: protocol
            .ks()
            .iter()
            .zip(&rank_hits)
            .map(|(&k, &h)| (k, pct(h as f64)))
            .collect(),
        map_value: pct(ap_sum),
        minp_value: pct(inp_sum),
        evaluated_probes: evaluated,
        skipped_probes: skipped,
    }
}

fn protocols() -> Vec<Protocol> {
    vec![
        Protocol::default(),
        Protocol::new(true, true, vec![1, 2, 3, 20]).unwrap(),
        Protocol::new(false, false, vec![1, 4]).unwrap(),
    ]
}

#[test]
fn metrics_equal_definitional_oracle() {
    for seed in 0..60u64 {
        let c = case(seed, 1 + seed as usize % 20, 1 + seed as usize % 9);
        for p in protocols() {
            let got = evaluate_distances(&c.dist, &c.probe, &c.gallery, &p).unwrap();
            assert_eq!(got, oracle(&c, &p), "seed {seed}");
        }
    }
}

#[test]
fn worked_examples() {
    let rank = |pos: Vec<bool>| (vec![(0..pos.len()).collect::<Vec<_>>()], vec![pos]);
    let (r, p) = rank(vec![true, false, true]);
    assert!((mean_ap(&r, &p) - 100.0 * (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    let (r, p) = rank(vec![true, false, false, true]);
    assert_eq!(mean_inp(&r, &p), 50.0);
    let (r, p) = rank(vec![false, false, true, false, false]);
    assert_eq!(cmc(&r, &p, &[1, 5]), vec![(1, 0.0), (5, 100.0)]);
}

#[test]
fn inp_can_exceed_ap() {
    let r = vec![vec![0, 1, 2]];
    let p = vec![vec![false, true, true]];
    assert!(mean_inp(&r, &p) > mean_ap(&r, &p));
}

#[test]
fn ties_keep_gallery_order() {
    let g = LabelTable::new(vec![LabelEntry::new("a", 0), LabelEntry::new("b", 0)]).unwrap();
    let probe = LabelEntry::new("q", 0);
    assert_eq!(
        rank_gallery(&[0.3, 0.3], &g, &probe, &Protocol::default()).unwrap(),
        vec![0, 1]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_invariants(seed in any::<u64>(), g in 1usize..20, p in 1usize..10) {
        let c = case(seed, g, p);
        let proto = Protocol::new(true, false, (1..=g.max(1)).collect()).unwrap();
        let r = evaluate_distances(&c.dist, &c.probe, &c.gallery, &proto).unwrap();
        prop_assert!(r.rank_accuracies.windows(2).all(|w| w[0].1 <= w[1].1));
        if r.evaluated_probes > 0 {
            prop_assert_eq!(r.rank_accuracies.last().unwrap().1, 100.0);
        }
        for v in r.rank_accuracies.iter().map(|x| x.1).chain([r.map_value, r.minp_value]) {
            prop_assert!((0.0..=100.0).contains(&v));
        }
        prop_assert_eq!(r.evaluated_probes + r.skipped_probes, p);
    }

    #[test]
    fn monotone_transform_leaves_metrics_unchanged(seed in any::<u64>(), g in 1usize..20, p in 1usize..10) {
        let c = case(seed, g, p);
        let cubed = Matrix::from_fn(p, g, Dtype::F64, |i, j| c.dist.get(i, j).powi(3) + 1.0).unwrap();
        for proto in protocols() {
            let a = evaluate_distances(&c.dist, &c.probe, &c.gallery, &proto).unwrap();
            let b = evaluate_distances(&cubed, &c.probe, &c.gallery, &proto).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

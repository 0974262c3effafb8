use std::num::NonZeroUsize;

use proptest::prelude::*;
use reldesc::files::{
    read_descriptors, read_labels, read_matrix, sidecar_path, write_descriptors, write_labels,
    write_matrix,
};
use reldesc::parallel::distance_matrix;
use reldesc::{CliError, PipelineConfig};
use reldesc_core::rng::GaussianStream;
use reldesc_core::spectral::RankPolicy;
use reldesc_core::{
    compute_rd, rd_distance_matrix, AnchorBank, Dtype, EmbeddingSet, Features, LabelEntry,
    LabelTable, Matrix, Protocol, SelectionMethod,
};

fn gaussian(seed: u64, rows: usize, cols: usize, dtype: Dtype) -> Matrix {
    let mut g = GaussianStream::new(seed);
    Matrix::from_fn(rows, cols, dtype, |_, _| g.next_gaussian()).unwrap()
}

fn labels(n: usize) -> LabelTable {
    LabelTable::new(
        (0..n)
            .map(|i| {
                let e = LabelEntry::new(format!("id-{i}"), (i % 4) as u32);
                match i % 3 {
                    0 => e,
                    1 => e.with_view(i as i32 - 3),
                    _ => e.with_view(2).with_covariate("bag"),
                }
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn matrix_and_label_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (i, dtype) in [Dtype::F32, Dtype::F64].into_iter().enumerate() {
        let m = gaussian(i as u64, 7, 5, dtype);
        let p = dir.path().join(format!("m{i}.rdm"));
        write_matrix(&p, &m).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(reldesc_core::digest::fnv1a64(&bytes), m.checksum());
        assert_eq!(read_matrix(&p).unwrap(), m);
    }
    let l = labels(9);
    let p = dir.path().join("x.labels");
    write_labels(&p, &l).unwrap();
    assert_eq!(read_labels(&p).unwrap(), l);
}

#[test]
fn descriptor_files_carry_their_bank() {
    let dir = tempfile::tempdir().unwrap();
    let bank = AnchorBank::raw(gaussian(1, 6, 9, Dtype::F32));
    let emb = EmbeddingSet::new(gaussian(2, 5, 6, Dtype::F32), labels(5)).unwrap();
    let rd = compute_rd(&bank, &emb).unwrap();
    let p = dir.path().join("d.rdm");
    write_descriptors(&p, &rd).unwrap();
    let meta = std::fs::read_to_string(sidecar_path(&p)).unwrap();
    assert_eq!(
        meta,
        format!(
            "kind=full_cosine\nanchor_digest={:#018x}\n",
            bank.checksum()
        )
    );
    assert_eq!(read_descriptors(&p).unwrap(), rd);

    std::fs::write(sidecar_path(&p), "kind=elliptic\nanchor_digest=0x1\n").unwrap();
    assert!(matches!(
        read_descriptors(&p),
        Err(CliError::Malformed { .. })
    ));
    std::fs::remove_file(sidecar_path(&p)).unwrap();
    assert!(matches!(
        read_descriptors(&p),
        Err(CliError::MissingFile(_))
    ));
}

#[test]
fn exit_codes_by_error_class() {
    let io = CliError::io("x", std::io::Error::other("disk"));
    assert_eq!(io.exit_code(), 2);
    assert_eq!(
        CliError::io("x", std::io::ErrorKind::NotFound.into()).exit_code(),
        2
    );
    assert_eq!(
        CliError::from(reldesc_core::Error::EmptyGallery).exit_code(),
        1
    );
    assert_eq!(CliError::malformed("x", "bad").exit_code(), 1);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![0.0f64..10.0, 1e-9f64..1e-3, Just(0.1), Just(1.0 / 3.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_render_parse_round_trip(
        seed in any::<u64>(),
        dims in (2usize..100, 0usize..20),
        ids in (1usize..50, 1usize..20, 1usize..10, 1usize..5),
        strengths in (finite(), finite(), finite()),
        train in (0usize..500, 1e-6f64..1.0, 0.0f64..0.99, finite(), 0.5f64..64.0, any::<u64>()),
        random in any::<bool>(),
        policy in any::<bool>(),
        flags in (any::<bool>(), any::<bool>()),
        ranks in prop::collection::btree_set(1usize..100, 1..5),
    ) {
        let mut c = PipelineConfig::default();
        c.synth.seed = seed;
        (c.synth.dim, c.synth.noise_dims) = dims;
        (c.synth.n_train_ids, c.synth.n_test_ids, c.synth.samples_per_id, c.synth.views) = ids;
        (c.synth.view_strength, c.synth.noise_sigma, c.synth.shift_strength) = strengths;
        (c.train.epochs, c.train.learning_rate, c.train.momentum, c.train.orl_coefficient, c.train.temperature, c.train.seed) = train;
        c.select_method = if random { SelectionMethod::Random } else { SelectionMethod::Fas };
        c.select_n = 1 + seed as usize % c.synth.n_train_ids;
        c.select_seed = seed.rotate_left(7);
        c.reduce_k = 1 + seed as usize % c.synth.width();
        c.rank_policy = if policy { RankPolicy::Truncate } else { RankPolicy::Keep };
        c.protocol = Protocol::new(flags.0, flags.1, ranks.into_iter().collect()).unwrap();
        let text = c.render();
        prop_assert_eq!(PipelineConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn parallel_distances_match_serial_bitwise(seed in any::<u64>(), p in 0usize..23, g in 1usize..17, d in 1usize..9, threads in 1usize..12) {
        let t = NonZeroUsize::new(threads).unwrap();
        let probe = gaussian(seed, p, d, Dtype::F32);
        let gallery = gaussian(seed ^ 1, g, d, Dtype::F64);
        let serial = reldesc_core::descriptor::embedding_distance_matrix(&probe, &gallery).unwrap();
        let par = distance_matrix(Features::Embeddings(&probe), Features::Embeddings(&gallery), t).unwrap();
        prop_assert_eq!(par.as_slice(), serial.as_slice());

        let bank = AnchorBank::raw(gaussian(seed ^ 2, d, 5, Dtype::F64));
        let pl = labels(p);
        let gl = labels(g);
        if p > 0 {
            let pr = compute_rd(&bank, &EmbeddingSet::new(probe, pl).unwrap()).unwrap();
            let gr = compute_rd(&bank, &EmbeddingSet::new(gallery, gl).unwrap()).unwrap();
            let serial = rd_distance_matrix(&pr, &gr).unwrap();
            let par = distance_matrix(Features::Descriptors(&pr), Features::Descriptors(&gr), t).unwrap();
            prop_assert_eq!(par.as_slice(), serial.as_slice());
        }
    }
}

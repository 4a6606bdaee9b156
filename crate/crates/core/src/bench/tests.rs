use super::*;

fn tiny_config() -> BenchConfig {
    BenchConfig {
        batch: 1,
        d_model: 16,
        heads_or_classes: 4,
        seq_lengths: vec![8, 16, 32],
        replicas: 2,
        warmup: 0,
        masked: true,
        seed: 9,
        time_backward: false,
    }
}

fn synthetic_records(
    f: impl Fn(AttentionKind, usize) -> f64,
    lengths: &[usize],
) -> Vec<BenchRecord> {
    let mut out = Vec::new();
    for kind in [AttentionKind::Full, AttentionKind::Agglomerative] {
        for &t in lengths {
            for replica in 0..2 {
                out.push(BenchRecord {
                    kind,
                    masked: true,
                    seq_len: t,
                    replica,
                    seconds: f(kind, t),
                    max_alloc_elems: 0,
                });
            }
        }
    }
    out
}

#[test]
fn record_cardinality_is_kinds_by_lengths_by_replicas() {
    let run = run_bench::<f32>(&tiny_config()).unwrap();
    assert_eq!(run.records.len(), 2 * 3 * 2);
    assert!(run.skipped.is_empty());
    assert!(run.records.iter().all(|r| r.seconds > 0.0));
    assert_eq!(run.meta.dtype, "float32");
}

#[test]
fn inputs_are_identical_across_kinds_for_a_seed() {
    let config = tiny_config();
    let a = bench_input::<f32>(&config, 16, 1).to_vec();
    let b = bench_input::<f32>(&config, 16, 1).to_vec();
    assert_eq!(
        a, b,
        "the per-cell input does not depend on the attention kind"
    );
    let c = bench_input::<f32>(&config, 16, 0).to_vec();
    assert_ne!(a, c, "replicas draw fresh inputs");
}

#[test]
fn quadratic_law_fits_slope_two() {
    let records = synthetic_records(|_, t| 1e-7 * (t as f64) * (t as f64), &[64, 128, 256, 512]);
    let fits = fit_scaling(&records).unwrap();
    for fit in fits {
        assert!((fit.slope - 2.0).abs() < 1e-6, "{:?}", fit);
        assert!(fit.stderr < 1e-6);
    }
}

#[test]
fn linear_law_fits_slope_one() {
    let records = synthetic_records(|_, t| 3e-6 * t as f64, &[64, 128, 256, 512, 1024, 2048]);
    let fits = fit_scaling(&records).unwrap();
    for fit in fits {
        assert!((fit.slope - 1.0).abs() < 1e-6);
        // largest half of six lengths
        assert_eq!(fit.lengths_used, vec![512, 1024, 2048]);
    }
}

#[test]
fn affine_law_fits_slightly_below_one() {
    let c = 1e-6;
    let records = synthetic_records(|_, t| c * t as f64 + c * 64.0, &[512, 1024, 2048]);
    let fits = fit_scaling(&records).unwrap();
    for fit in fits {
        assert!(fit.slope > 0.8 && fit.slope < 1.0, "slope {}", fit.slope);
    }
}

#[test]
fn too_few_lengths_is_a_contract_error() {
    let records = synthetic_records(|_, t| t as f64, &[64, 128]);
    assert!(matches!(
        fit_scaling(&records),
        Err(crate::Error::Contract(_))
    ));
}

#[test]
fn crossover_finds_the_algebraic_intersection() {
    // agglo = n, full = n^2/256: curves meet exactly at 256
    let records = synthetic_records(
        |kind, t| match kind {
            AttentionKind::Agglomerative => t as f64,
            AttentionKind::Full => (t * t) as f64 / 256.0,
        },
        &[64, 128, 256, 512],
    );
    assert_eq!(crossover(&records).unwrap(), Some(256));
}

#[test]
fn crossover_reports_none_when_never_faster() {
    let records = synthetic_records(
        |kind, t| match kind {
            AttentionKind::Agglomerative => 10.0 * t as f64,
            AttentionKind::Full => t as f64,
        },
        &[64, 128, 256],
    );
    assert_eq!(crossover(&records).unwrap(), None);
}

#[test]
fn monotonicity_check_tolerates_small_noise() {
    let mut records = synthetic_records(|_, t| t as f64, &[64, 128, 256]);
    assert!(is_monotone_within(&records, AttentionKind::Full, 0.05));
    // a 3% inversion passes, a 30% one fails
    for r in records.iter_mut().filter(|r| r.seq_len == 256) {
        r.seconds = 128.0 * 0.97;
    }
    assert!(is_monotone_within(&records, AttentionKind::Full, 0.05));
    for r in records.iter_mut().filter(|r| r.seq_len == 256) {
        r.seconds = 128.0 * 0.70;
    }
    assert!(!is_monotone_within(&records, AttentionKind::Full, 0.05));
}

#[test]
fn allocation_hook_separates_linear_from_quadratic() {
    let config = BenchConfig {
        batch: 1,
        d_model: 16,
        heads_or_classes: 4,
        seq_lengths: vec![256, 512],
        replicas: 2,
        warmup: 0,
        masked: true,
        seed: 4,
        time_backward: false,
    };
    let run = run_bench::<f32>(&config).unwrap();
    let peak = |kind: AttentionKind, t: usize| -> u64 {
        run.records
            .iter()
            .filter(|r| r.kind == kind && r.seq_len == t)
            .map(|r| r.max_alloc_elems)
            .max()
            .unwrap()
    };
    let agglo_ratio = peak(AttentionKind::Agglomerative, 512) as f64
        / peak(AttentionKind::Agglomerative, 256) as f64;
    assert!(agglo_ratio < 2.5, "linear path grew by {agglo_ratio}");
    let full_ratio = peak(AttentionKind::Full, 512) as f64 / peak(AttentionKind::Full, 256) as f64;
    assert!(full_ratio > 3.0, "quadratic path grew by {full_ratio}");
    // the quadratic buffer is the logits square
    assert_eq!(peak(AttentionKind::Full, 512), 512 * 512);
}

#[test]
fn csv_and_meta_files_have_the_documented_shape() {
    let dir = std::env::temp_dir().join("agglo_bench_test");
    std::fs::create_dir_all(&dir).unwrap();
    let run = run_bench::<f32>(&tiny_config()).unwrap();
    let fits = fit_scaling(&run.records).unwrap();
    let cross = crossover(&run.records).unwrap();

    let csv_path = dir.join("bench.csv");
    write_csv(&run.records, &csv_path).unwrap();
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "kind,masked,seq_len,replica,seconds");
    assert_eq!(lines.len(), 1 + run.records.len());
    assert!(lines[1].starts_with("full,true,8,0,"));

    let meta_path = dir.join("bench_meta.txt");
    write_meta(&run, &fits, cross, &meta_path).unwrap();
    let meta = std::fs::read_to_string(&meta_path).unwrap();
    for key in [
        "machine=",
        "pinned=",
        "seed=9",
        "dtype=float32",
        "slope_full=",
        "slope_agglomerative=",
        "crossover=",
    ] {
        assert!(meta.contains(key), "missing {key} in {meta}");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_validation_catches_bad_grids() {
    let mut config = tiny_config();
    config.seq_lengths = vec![64, 64];
    assert!(config.validate().is_err());
    config.seq_lengths = vec![128, 64];
    assert!(config.validate().is_err());
    config.seq_lengths = vec![64, 128];
    config.replicas = 1;
    assert!(config.validate().is_err());
}

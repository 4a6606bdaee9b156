use super::*;
use crate::data::{split, synthetic_corpus, CharVocab};
use crate::model::{AttentionKind, EncodingKind};

fn micro_config(seq_len: usize, d_model: usize) -> ModelConfig {
    ModelConfig {
        attention_kind: AttentionKind::Agglomerative,
        encoding_kind: EncodingKind::Convolution,
        n_blocks: 2,
        seq_len,
        d_model,
        heads_or_classes: 4,
        vocab_size: 27,
        ffn_multiplier: 2,
        conv_width: 4,
    }
}

// ── adadelta ─────────────────────────────────────────────────────────

/// Direct evaluation of the update recurrence for one scalar.
fn scalar_oracle(grads: &[f64], rho: f64, eps: f64) -> Vec<f64> {
    let (mut eg2, mut ed2) = (0.0f64, 0.0f64);
    let mut deltas = Vec::new();
    for &g in grads {
        eg2 = rho * eg2 + (1.0 - rho) * g * g;
        let d = -((ed2 + eps).sqrt() / (eg2 + eps).sqrt()) * g;
        ed2 = rho * ed2 + (1.0 - rho) * d * d;
        deltas.push(d);
    }
    deltas
}

#[test]
fn first_step_magnitude_matches_direct_evaluation() {
    let oracle = scalar_oracle(&[1.0], 0.95, 1e-6);
    // frozen from the oracle: -sqrt(1e-6)/sqrt(0.05 + 1e-6)
    assert!((oracle[0] - (-0.004472091)).abs() < 1e-9);
    assert!((oracle[0] + 0.00447).abs() < 1e-5);

    let param = vec![(
        "w".to_string(),
        Tensor::<f64>::param(&[1], vec![2.0]).unwrap(),
    )];
    let mut opt = Adadelta::new(&param, 0.95, 1e-6, None);
    param[0].1.accumulate_grad(&[1.0]);
    opt.step(&param).unwrap();
    let updated = param[0].1.to_vec()[0];
    assert!((updated - (2.0 + oracle[0])).abs() < 1e-15);
}

#[test]
fn two_steps_track_the_scalar_recurrence() {
    let oracle = scalar_oracle(&[1.0, 1.0], 0.95, 1e-6);
    let param = vec![(
        "w".to_string(),
        Tensor::<f64>::param(&[1], vec![0.0]).unwrap(),
    )];
    let mut opt = Adadelta::new(&param, 0.95, 1e-6, None);
    param[0].1.accumulate_grad(&[1.0]);
    opt.step(&param).unwrap();
    param[0].1.accumulate_grad(&[1.0]);
    opt.step(&param).unwrap();
    let value = param[0].1.to_vec()[0];
    assert!((value - (oracle[0] + oracle[1])).abs() < 1e-15);
    // the grown gradient accumulator alone shrinks the step: with the
    // numerator held at sqrt(eps), the second step is smaller than the
    // first (1e-3/sqrt(0.0975+eps) vs 1e-3/sqrt(0.05+eps))
    let eg2_step2 = 0.95 * 0.05 + 0.05;
    let fixed_numerator_step2 = (1e-6f64).sqrt() / (eg2_step2 + 1e-6).sqrt();
    assert!(fixed_numerator_step2 < oracle[0].abs());
}

#[test]
fn zero_gradient_leaves_parameters_but_decays_accumulators() {
    let param = vec![(
        "w".to_string(),
        Tensor::<f64>::param(&[2], vec![1.0, -1.0]).unwrap(),
    )];
    let mut opt = Adadelta::new(&param, 0.95, 1e-6, None);
    // one real step to charge the accumulators
    param[0].1.accumulate_grad(&[0.5, 0.5]);
    opt.step(&param).unwrap();
    let charged = opt.accumulators(0).0.to_vec();
    let values_before = param[0].1.to_vec();

    // no backward happened: grads are absent, read as zero
    opt.step(&param).unwrap();
    assert_eq!(param[0].1.to_vec(), values_before);
    let decayed = opt.accumulators(0).0.to_vec();
    for (d, c) in decayed.iter().zip(&charged) {
        assert!((d - 0.95 * c).abs() < 1e-15);
    }
}

#[test]
fn non_finite_gradients_abort_naming_the_parameter() {
    let param = vec![
        (
            "fine".to_string(),
            Tensor::<f64>::param(&[1], vec![0.0]).unwrap(),
        ),
        (
            "broken".to_string(),
            Tensor::<f64>::param(&[1], vec![0.0]).unwrap(),
        ),
    ];
    let mut opt = Adadelta::new(&param, 0.95, 1e-6, None);
    param[0].1.accumulate_grad(&[1.0]);
    param[1].1.accumulate_grad(&[f64::NAN]);
    let err = opt.step(&param).unwrap_err().to_string();
    assert!(err.contains("broken"), "{err}");
}

#[test]
fn global_norm_clipping_rescales_gradients() {
    let step_with = |clip: Option<f64>| -> f64 {
        let param = vec![(
            "w".to_string(),
            Tensor::<f64>::param(&[1], vec![0.0]).unwrap(),
        )];
        let mut opt = Adadelta::new(&param, 0.95, 1e-6, clip);
        param[0].1.accumulate_grad(&[10.0]);
        opt.step(&param).unwrap();
        param[0].1.to_vec()[0]
    };
    let clipped = step_with(Some(5.0));
    let oracle = scalar_oracle(&[5.0], 0.95, 1e-6)[0];
    assert!((clipped - oracle).abs() < 1e-15);
    let unclipped = step_with(None);
    let oracle_unclipped = scalar_oracle(&[10.0], 0.95, 1e-6)[0];
    assert!((unclipped - oracle_unclipped).abs() < 1e-15);
}

// ── early stopping ───────────────────────────────────────────────────

#[test]
fn monotone_worsening_stops_at_patience_plus_one() {
    let mut stopper = EarlyStopper::new(10);
    assert!(!stopper.observe(1, 3.0));
    for epoch in 2..=10 {
        assert!(!stopper.observe(epoch, 3.0 + epoch as f64), "epoch {epoch}");
    }
    assert!(stopper.observe(11, 99.0), "patience exhausts at epoch 11");
    assert_eq!(stopper.best_epoch, 1);
}

#[test]
fn improvement_resets_patience() {
    let mut stopper = EarlyStopper::new(3);
    assert!(!stopper.observe(1, 5.0));
    assert!(!stopper.observe(2, 6.0));
    assert!(!stopper.observe(3, 6.0));
    assert!(!stopper.observe(4, 4.0)); // improvement
    assert!(!stopper.observe(5, 4.5));
    assert!(!stopper.observe(6, 4.5));
    assert!(stopper.observe(7, 4.5));
    assert_eq!(stopper.best_epoch, 4);
    assert_eq!(stopper.best, 4.0);
}

// ── evaluation ───────────────────────────────────────────────────────

#[test]
fn untrained_model_evaluates_at_the_uniform_baseline() {
    let config = micro_config(16, 16);
    let model = DecoderModel::<f32>::new(&config, 5).unwrap();
    let stream = CharVocab::encode(&synthetic_corpus(4000, 9));
    let bits = evaluate(&model, &stream, 16, 8).unwrap();
    assert!((bits - 27f64.log2()).abs() < 0.1, "got {bits}");
}

#[test]
fn evaluation_is_deterministic() {
    let config = micro_config(16, 16);
    let model = DecoderModel::<f32>::new(&config, 5).unwrap();
    let stream = CharVocab::encode(&synthetic_corpus(3000, 10));
    let a = evaluate(&model, &stream, 16, 8).unwrap();
    let b = evaluate(&model, &stream, 16, 8).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

// ── full loop ────────────────────────────────────────────────────────

#[test]
fn micro_run_loss_decreases_and_is_bitwise_deterministic() {
    // 200 KB corpus, d 16, t 32, 3 epochs: the smoke contract
    let text = synthetic_corpus(200_000, 77);
    let corpus = split(&CharVocab::encode(&text), (0.9, 0.05, 0.05)).unwrap();
    let config = micro_config(32, 16);
    let opts = TrainOptions {
        max_epochs: 3,
        batch_size: 32,
        seed: 7,
        ..TrainOptions::default()
    };
    let (run_a, _) = train::<f32>(&config, &corpus, &opts).unwrap();
    assert_eq!(run_a.epochs_run, 3);
    assert!(
        run_a.train_bits[1] < run_a.train_bits[0] && run_a.train_bits[2] < run_a.train_bits[1],
        "train loss must fall epoch over epoch: {:?}",
        run_a.train_bits
    );

    let (run_b, _) = train::<f32>(&config, &corpus, &opts).unwrap();
    for (a, b) in run_a.train_bits.iter().zip(&run_b.train_bits) {
        assert_eq!(
            a.to_bits(),
            b.to_bits(),
            "training must be bitwise deterministic"
        );
    }
    for (a, b) in run_a.valid_bits.iter().zip(&run_b.valid_bits) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn returned_model_carries_the_best_validation_weights() {
    let text = synthetic_corpus(60_000, 3);
    let corpus = split(&CharVocab::encode(&text), (0.8, 0.1, 0.1)).unwrap();
    let config = micro_config(16, 16);
    let opts = TrainOptions {
        max_epochs: 4,
        batch_size: 16,
        seed: 1,
        ..TrainOptions::default()
    };
    let (run, model) = train::<f32>(&config, &corpus, &opts).unwrap();
    let rescored = evaluate(&model, &corpus.valid, config.seq_len, opts.batch_size).unwrap();
    assert_eq!(rescored.to_bits(), run.best_valid_bits.to_bits());
    let min = run.valid_bits.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(run.best_valid_bits.to_bits(), min.to_bits());
}

#[test]
fn memorizing_a_deterministic_corpus_drives_bits_to_zero() {
    // alternating two-symbol stream: perfectly predictable from one
    // token of context
    let stream: Vec<u32> = (0..4000).map(|i| if i % 2 == 0 { 1 } else { 2 }).collect();
    let corpus = split(&stream, (0.8, 0.1, 0.1)).unwrap();
    let config = ModelConfig {
        seq_len: 8,
        n_blocks: 1,
        d_model: 16,
        heads_or_classes: 2,
        ..micro_config(8, 16)
    };
    let opts = TrainOptions {
        max_epochs: 80,
        batch_size: 16,
        seed: 5,
        target_valid_bits: Some(0.15),
        ..TrainOptions::default()
    };
    let (run, model) = train::<f32>(&config, &corpus, &opts).unwrap();
    assert!(
        run.best_valid_bits < 0.15,
        "expected near-zero bits, got {} after {} epochs",
        run.best_valid_bits,
        run.epochs_run
    );
    assert_eq!(run.stop, StopReason::TargetReached);
    let test_bits = evaluate(&model, &corpus.test, config.seq_len, 16).unwrap();
    assert!(test_bits < 0.2, "test bits {test_bits}");
}

#[test]
fn metrics_and_checkpoints_land_in_the_out_dir() {
    let dir = std::env::temp_dir().join("agglo_train_test");
    let _ = std::fs::remove_dir_all(&dir);
    let text = synthetic_corpus(40_000, 21);
    let corpus = split(&CharVocab::encode(&text), (0.8, 0.1, 0.1)).unwrap();
    let config = micro_config(16, 16);
    let opts = TrainOptions {
        max_epochs: 2,
        batch_size: 16,
        seed: 2,
        out_dir: Some(dir.clone()),
        ..TrainOptions::default()
    };
    let (run, model) = train::<f32>(&config, &corpus, &opts).unwrap();
    assert_eq!(run.epochs_run, 2);

    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(
        lines[0],
        "epoch,train_loss_bits,valid_loss_bits,epoch_seconds"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,"));

    let best = checkpoint::load::<f32>(&dir.join("best.ckpt")).unwrap();
    let rescored = evaluate(&best, &corpus.valid, config.seq_len, 16).unwrap();
    assert!((rescored - run.best_valid_bits).abs() < 1e-6);
    assert!(dir.join("last.ckpt").exists());

    // reloading the returned model's weights through the file round trip
    for ((_, a), (_, b)) in model.named_params().iter().zip(best.named_params()) {
        if run.best_epoch == run.epochs_run {
            assert_eq!(a.to_vec(), b.to_vec());
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint;
use super::presets::{preset, PRESET_NAMES};
use super::*;
use crate::oracle::{cross_entropy_bits_direct, max_abs_diff};
use crate::tensor::finite_diff::{finite_diff_grad, max_rel_err};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn tiny_config(attention_kind: AttentionKind, encoding_kind: EncodingKind) -> ModelConfig {
    ModelConfig {
        attention_kind,
        encoding_kind,
        n_blocks: 2,
        seq_len: 8,
        d_model: 8,
        heads_or_classes: 2,
        vocab_size: 5,
        ffn_multiplier: 2,
        conv_width: 3,
    }
}

fn tokens(ids: &[u32], rows: usize) -> TokenBatch {
    TokenBatch::new(ids.to_vec(), rows, ids.len() / rows).unwrap()
}

// ── parameter counting ───────────────────────────────────────────────

#[test]
fn count_matches_hand_enumeration_for_tiny_config() {
    // vocab 3, d 4, classes 2, ffn multiplier 2, conv width 3, seq 5
    let config = ModelConfig {
        attention_kind: AttentionKind::Agglomerative,
        encoding_kind: EncodingKind::Convolution,
        n_blocks: 1,
        seq_len: 5,
        d_model: 4,
        heads_or_classes: 2,
        vocab_size: 3,
        ffn_multiplier: 2,
        conv_width: 3,
    };
    // token table 3x4 = 12; conv 3*4*4 + 4 = 52; four layer-norm
    // vectors = 16; classification 2*(4*2+2) = 20, projections
    // 2*(4*2) = 16, recombination 16 -> attention 52; ffn
    // 4*8 + 8 + 8*4 + 4 = 76; output 4*3 = 12
    assert_eq!(count_params(&config), 12 + 52 + 16 + 52 + 76 + 12);

    let embedded = ModelConfig {
        encoding_kind: EncodingKind::Embedding,
        ..config.clone()
    };
    // position table replaces the convolution: 5*4 = 20
    assert_eq!(count_params(&embedded), 12 + 20 + 16 + 52 + 76 + 12);

    let full = ModelConfig {
        attention_kind: AttentionKind::Full,
        ..config
    };
    // four 4x4 projections
    assert_eq!(count_params(&full), 12 + 52 + 16 + 64 + 76 + 12);
}

#[test]
fn count_matches_instantiated_models() {
    for attention in [AttentionKind::Full, AttentionKind::Agglomerative] {
        for encoding in [EncodingKind::Embedding, EncodingKind::Convolution] {
            let config = tiny_config(attention, encoding);
            let model = DecoderModel::<f32>::new(&config, 0).unwrap();
            assert_eq!(model.num_params(), count_params(&config));
        }
    }
    for name in PRESET_NAMES {
        let config = preset(name).unwrap();
        let model = DecoderModel::<f32>::new(&config, 0).unwrap();
        assert_eq!(model.num_params(), count_params(&config));
    }
}

#[test]
fn preset_counts_land_near_reference_sizes() {
    let reference = [
        ("text8_full_embed", 64_200.0),
        ("text8_full_conv", 88_500.0),
        ("text8_agglo_embed", 57_000.0),
        ("text8_agglo_conv", 81_400.0),
    ];
    for (name, target) in reference {
        let count = count_params(&preset(name).unwrap()) as f64;
        let deviation = (count - target).abs() / target;
        assert!(
            deviation <= 0.15,
            "{name}: {count} deviates {:.1}% from {target}",
            deviation * 100.0
        );
    }
}

#[test]
fn doubling_width_roughly_quadruples_dominant_terms() {
    // widths large against vocab/seq so the d^2 terms dominate
    let config = |d: usize| ModelConfig {
        attention_kind: AttentionKind::Full,
        encoding_kind: EncodingKind::Embedding,
        n_blocks: 1,
        seq_len: 2,
        d_model: d,
        heads_or_classes: 2,
        vocab_size: 2,
        ffn_multiplier: 4,
        conv_width: 2,
    };
    let ratio = count_params(&config(128)) as f64 / count_params(&config(64)) as f64;
    assert!(ratio > 3.5 && ratio < 4.3, "ratio {ratio}");
}

// ── sequence encoding ────────────────────────────────────────────────

#[test]
fn convolution_impulse_has_causal_receptive_field() {
    let config = tiny_config(AttentionKind::Agglomerative, EncodingKind::Convolution);
    let model = DecoderModel::<f64>::new(&config, 7).unwrap();
    let d = config.d_model;
    // token 0 embeds to zero, token 1 to a random nonzero row
    let mut table = vec![0.0f64; config.vocab_size * d];
    let mut r = rng(3);
    for v in table[d..2 * d].iter_mut() {
        *v = r.gen_range(0.5..1.0);
    }
    model.token_embedding.set_values(&table).unwrap();

    let t = config.seq_len;
    for p in 0..t {
        let mut ids = vec![0u32; t];
        ids[p] = 1;
        let out = model.encode_sequence(&tokens(&ids, 1)).unwrap().to_vec();
        for i in 0..t {
            let row_norm: f64 = out[i * d..(i + 1) * d].iter().map(|v| v.abs()).sum();
            let in_window = i >= p && i < p + config.conv_width;
            if in_window {
                assert!(row_norm > 1e-9, "impulse at {p}: expected output at {i}");
            } else {
                assert!(row_norm < 1e-12, "impulse at {p}: leakage at {i}");
            }
        }
    }
}

#[test]
fn zero_token_table_leaves_position_embeddings() {
    let config = tiny_config(AttentionKind::Full, EncodingKind::Embedding);
    let model = DecoderModel::<f64>::new(&config, 9).unwrap();
    let d = config.d_model;
    model
        .token_embedding
        .set_values(&vec![0.0; config.vocab_size * d])
        .unwrap();
    let t = 6;
    let out = model
        .encode_sequence(&tokens(&vec![2u32; 2 * t], 2))
        .unwrap();
    let pos = match &model.encoder {
        SequenceEncoder::Positions(p) => p.to_vec(),
        _ => unreachable!(),
    };
    let ov = out.to_vec();
    for b in 0..2 {
        for i in 0..t {
            for j in 0..d {
                assert_eq!(ov[(b * t + i) * d + j], pos[i * d + j]);
            }
        }
    }
}

#[test]
fn convolution_encoding_never_looks_ahead() {
    let config = ModelConfig {
        seq_len: 16,
        ..tiny_config(AttentionKind::Agglomerative, EncodingKind::Convolution)
    };
    let model = DecoderModel::<f64>::new(&config, 11).unwrap();
    let t = 16;
    let mut r = rng(5);
    let base_ids: Vec<u32> = (0..t).map(|_| r.gen_range(0..5)).collect();
    let base = model
        .encode_sequence(&tokens(&base_ids, 1))
        .unwrap()
        .to_vec();
    let d = config.d_model;
    for p in 0..t {
        let mut ids = base_ids.clone();
        ids[p] = (ids[p] + 1 + r.gen_range(0..4)) % 5;
        let out = model.encode_sequence(&tokens(&ids, 1)).unwrap().to_vec();
        for i in 0..p * d {
            assert_eq!(base[i], out[i], "perturbation at {p} leaked backwards");
        }
    }
}

#[test]
fn sequences_beyond_configured_length_are_rejected() {
    let config = tiny_config(AttentionKind::Full, EncodingKind::Embedding);
    let model = DecoderModel::<f32>::new(&config, 0).unwrap();
    let too_long = vec![0u32; config.seq_len + 1];
    assert!(model.encode_sequence(&tokens(&too_long, 1)).is_err());
    let bad_id = vec![config.vocab_size as u32; 4];
    assert!(matches!(
        model.encode_sequence(&tokens(&bad_id, 1)),
        Err(crate::Error::Data(_))
    ));
}

// ── decoder forward ──────────────────────────────────────────────────

#[test]
fn decoder_logits_are_causal() {
    for (attention, encoding) in [
        (AttentionKind::Agglomerative, EncodingKind::Convolution),
        (AttentionKind::Full, EncodingKind::Embedding),
    ] {
        let config = ModelConfig {
            seq_len: 32,
            ..tiny_config(attention, encoding)
        };
        let model = DecoderModel::<f64>::new(&config, 13).unwrap();
        // randomize the head so logits respond to context at all
        let mut r = rng(17);
        let head: Vec<f64> = (0..config.d_model * config.vocab_size)
            .map(|_| r.gen_range(-0.3..0.3))
            .collect();
        model.output_proj.set_values(&head).unwrap();

        let t = 32;
        let ids: Vec<u32> = (0..t).map(|_| r.gen_range(0..5)).collect();
        let base = model.forward(&tokens(&ids, 1)).unwrap().to_vec();
        let v = config.vocab_size;
        for p in [1usize, 7, 15, 31] {
            let mut bumped = ids.clone();
            bumped[p] = (bumped[p] + 2) % 5;
            let out = model.forward(&tokens(&bumped, 1)).unwrap().to_vec();
            for i in 0..p * v {
                assert!(
                    (base[i] - out[i]).abs() < 1e-5,
                    "{:?}/{:?}: token change at {p} moved logits at {}",
                    attention,
                    encoding,
                    i / v
                );
            }
        }
    }
}

#[test]
fn zero_blocks_degenerates_to_projected_encoding() {
    let config = ModelConfig {
        n_blocks: 0,
        ..tiny_config(AttentionKind::Full, EncodingKind::Embedding)
    };
    let model = DecoderModel::<f64>::new(&config, 3).unwrap();
    let mut r = rng(23);
    let head: Vec<f64> = (0..config.d_model * config.vocab_size)
        .map(|_| r.gen_range(-0.5..0.5))
        .collect();
    model.output_proj.set_values(&head).unwrap();
    let ids = tokens(&[1, 2, 3, 0], 1);
    let direct = model
        .encode_sequence(&ids)
        .unwrap()
        .matmul(&model.output_proj)
        .unwrap();
    let logits = model.forward(&ids).unwrap();
    assert_eq!(direct.to_vec(), logits.to_vec());
}

#[test]
fn single_token_forward_works() {
    let config = tiny_config(AttentionKind::Agglomerative, EncodingKind::Convolution);
    let model = DecoderModel::<f32>::new(&config, 0).unwrap();
    let logits = model.forward(&tokens(&[3], 1)).unwrap();
    assert_eq!(logits.shape(), &[1, 1, config.vocab_size]);
    let again = model.forward(&tokens(&[3], 1)).unwrap();
    assert_eq!(logits.to_vec(), again.to_vec());
}

#[test]
fn shared_block_parameters_are_single_nodes_in_the_graph() {
    let config = ModelConfig {
        n_blocks: 5,
        ..tiny_config(AttentionKind::Agglomerative, EncodingKind::Convolution)
    };
    let model = DecoderModel::<f32>::new(&config, 1).unwrap();
    let mut r = rng(1);
    let head: Vec<f32> = (0..config.d_model * config.vocab_size)
        .map(|_| r.gen_range(-0.5..0.5))
        .collect();
    model.output_proj.set_values(&head).unwrap();
    let logits = model.forward(&tokens(&[0, 1, 2, 3, 4, 0], 1)).unwrap();
    let leaves = logits.grad_leaf_ids();
    // every application references the same parameter node, so each
    // named parameter contributes exactly one leaf
    let named = model.named_params();
    let param_ids: std::collections::HashSet<u64> = named.iter().map(|(_, t)| t.id()).collect();
    assert_eq!(
        param_ids.len(),
        named.len(),
        "parameter handles are distinct nodes"
    );
    assert_eq!(
        leaves, param_ids,
        "graph leaves are exactly the shared parameters"
    );

    // mutating the shared block is visible in the next forward pass
    let before = logits.to_vec();
    let bumped: Vec<f32> = model
        .block
        .ffn_w1
        .to_vec()
        .iter()
        .map(|v| v + 0.05)
        .collect();
    model.block.ffn_w1.set_values(&bumped).unwrap();
    let after = model
        .forward(&tokens(&[0, 1, 2, 3, 4, 0], 1))
        .unwrap()
        .to_vec();
    assert_ne!(before, after);
}

// ── loss ─────────────────────────────────────────────────────────────

#[test]
fn uniform_logits_cost_log2_vocab() {
    let logits = Tensor::<f64>::zeros(&[1, 4, 27]);
    let targets = tokens(&[0, 5, 26, 13], 1);
    let loss = lm_loss(&logits, &targets).unwrap().item().unwrap();
    assert!((loss - 27.0f64.log2()).abs() < 1e-9, "got {loss}");
    assert!((loss - 4.7549).abs() < 1e-4);
}

#[test]
fn confident_correct_logits_cost_nothing() {
    let v = 5;
    let ids = [1u32, 4, 0];
    let mut vals = vec![0.0f64; 3 * v];
    for (r, &t) in ids.iter().enumerate() {
        vals[r * v + t as usize] = 1000.0;
    }
    let logits = Tensor::new(&[1, 3, v], vals).unwrap();
    let loss = lm_loss(&logits, &tokens(&ids, 1)).unwrap().item().unwrap();
    assert!(loss.abs() < 1e-9);
}

#[test]
fn loss_matches_direct_probability_oracle() {
    let mut r = rng(29);
    let (rows, v) = (12usize, 7usize);
    let vals: Vec<f64> = (0..rows * v).map(|_| r.gen_range(-3.0..3.0)).collect();
    let ids: Vec<u32> = (0..rows).map(|_| r.gen_range(0..v as u32)).collect();
    let logits = Tensor::new(&[1, rows, v], vals.clone()).unwrap();
    let fast = lm_loss(&logits, &tokens(&ids, 1)).unwrap().item().unwrap();
    let slow = cross_entropy_bits_direct(&vals, v, &ids);
    assert!((fast - slow).abs() < 1e-7);
}

#[test]
fn untrained_model_scores_the_uniform_baseline() {
    let config = tiny_config(AttentionKind::Full, EncodingKind::Embedding);
    let model = DecoderModel::<f32>::new(&config, 41).unwrap();
    let mut r = rng(41);
    let ids: Vec<u32> = (0..64)
        .map(|_| r.gen_range(0..config.vocab_size as u32))
        .collect();
    let t = 8;
    let batch = tokens(&ids[..t * 4], 4);
    let target_ids: Vec<u32> = (0..t * 4).map(|_| r.gen_range(0..5)).collect();
    let logits = model.forward(&batch).unwrap();
    let loss = lm_loss(&logits, &tokens(&target_ids, 4))
        .unwrap()
        .item()
        .unwrap() as f64;
    let baseline = (config.vocab_size as f64).log2();
    assert!(
        (loss - baseline).abs() < 0.1,
        "loss {loss} vs baseline {baseline}"
    );
}

// ── full decoder gradient check ──────────────────────────────────────

#[test]
fn micro_decoder_gradients_match_finite_differences() {
    // vocab 5, d 8, classes 2, t 6, two shared applications
    let config = ModelConfig {
        attention_kind: AttentionKind::Agglomerative,
        encoding_kind: EncodingKind::Convolution,
        n_blocks: 2,
        seq_len: 6,
        d_model: 8,
        heads_or_classes: 2,
        vocab_size: 5,
        ffn_multiplier: 2,
        conv_width: 3,
    };
    let model = DecoderModel::<f64>::new(&config, 53).unwrap();
    let mut r = rng(53);
    // the head initializes to zero, which would zero all body gradients
    let head: Vec<f64> = (0..config.d_model * config.vocab_size)
        .map(|_| r.gen_range(-0.4..0.4))
        .collect();
    model.output_proj.set_values(&head).unwrap();

    let input = tokens(&[0, 3, 1, 4, 2, 2], 1);
    let target = tokens(&[3, 1, 4, 2, 2, 0], 1);
    let loss_of = |m: &DecoderModel<f64>| -> crate::Result<f64> {
        lm_loss(&m.forward(&input)?, &target)?.item()
    };

    let loss = lm_loss(&model.forward(&input).unwrap(), &target).unwrap();
    loss.backward().unwrap();

    for (name, tensor) in model.named_params() {
        let analytic = tensor.grad_or_zeros();
        let saved = tensor.to_vec();
        // step 1e-6: the guarded divisions give the loss strong local
        // curvature, so a 1e-5 step leaves visible truncation error
        let fd = finite_diff_grad(
            |probe| {
                tensor.set_values(&probe.to_vec())?;
                let out = loss_of(&model);
                tensor.set_values(&saved)?;
                out
            },
            &tensor,
            1e-6,
        )
        .unwrap();
        // below ~1e-6 the central-difference estimate is dominated by
        // f64 roundoff in the loss, so such entries are not compared
        let err = max_rel_err(&analytic, &fd, 1e-6);
        assert!(err < 1e-4, "{name}: relative error {err}");
    }
}

// ── generation ───────────────────────────────────────────────────────

fn sampling_model() -> DecoderModel<f32> {
    let config = tiny_config(AttentionKind::Agglomerative, EncodingKind::Convolution);
    let model = DecoderModel::<f32>::new(&config, 61).unwrap();
    let mut r = rng(61);
    let head: Vec<f32> = (0..config.d_model * config.vocab_size)
        .map(|_| r.gen_range(-1.0..1.0))
        .collect();
    model.output_proj.set_values(&head).unwrap();
    model
}

#[test]
fn near_zero_temperature_is_argmax_decoding() {
    let model = sampling_model();
    let sampled = generate(&model, &[1, 2], 6, 1e-6, 99).unwrap();
    // roll argmax decoding by hand
    let mut expect = vec![1u32, 2];
    for _ in 0..6 {
        let start = expect.len().saturating_sub(model.config.seq_len);
        let ctx = &expect[start..];
        let logits = model
            .forward(&TokenBatch::new(ctx.to_vec(), 1, ctx.len()).unwrap())
            .unwrap();
        let v = model.config.vocab_size;
        let all = logits.to_vec();
        let last = &all[(ctx.len() - 1) * v..ctx.len() * v];
        let argmax = last
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        expect.push(argmax as u32);
    }
    assert_eq!(sampled, expect);
}

#[test]
fn generation_is_deterministic_for_a_seed() {
    let model = sampling_model();
    let a = generate(&model, &[0], 12, 0.8, 7).unwrap();
    let b = generate(&model, &[0], 12, 0.8, 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_requested_tokens_echoes_prompt() {
    let model = sampling_model();
    let out = generate(&model, &[4, 4, 1], 0, 1.0, 5).unwrap();
    assert_eq!(out, vec![4, 4, 1]);
}

#[test]
fn long_prompts_use_trailing_context() {
    let model = sampling_model();
    let long: Vec<u32> = (0..20).map(|i| (i % 5) as u32).collect();
    let out = generate(&model, &long, 2, 0.5, 3).unwrap();
    assert_eq!(out.len(), 22);
    assert_eq!(&out[..20], &long[..]);
}

#[test]
fn non_positive_temperature_is_rejected() {
    let model = sampling_model();
    assert!(generate(&model, &[1], 3, 0.0, 1).is_err());
    assert!(generate(&model, &[1], 3, -1.0, 1).is_err());
}

// ── checkpoints ──────────────────────────────────────────────────────

#[test]
fn checkpoint_round_trip_preserves_everything() {
    let dir = std::env::temp_dir().join("agglo_ckpt_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("round_trip.ckpt");

    let config = tiny_config(AttentionKind::Agglomerative, EncodingKind::Convolution);
    let model = DecoderModel::<f32>::new(&config, 71).unwrap();
    checkpoint::save(&model, &path).unwrap();
    let loaded = checkpoint::load::<f32>(&path).unwrap();
    assert_eq!(loaded.config, config);
    for ((an, at), (bn, bt)) in model.named_params().iter().zip(loaded.named_params()) {
        assert_eq!(*an, bn);
        assert_eq!(at.to_vec(), bt.to_vec(), "parameter {an}");
    }
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn corrupt_checkpoints_are_refused() {
    let dir = std::env::temp_dir().join("agglo_ckpt_test");
    std::fs::create_dir_all(&dir).unwrap();

    let bad_magic = dir.join("bad_magic.ckpt");
    std::fs::write(&bad_magic, b"NOPE0000000").unwrap();
    assert!(matches!(
        checkpoint::load::<f32>(&bad_magic),
        Err(crate::Error::Checkpoint(_))
    ));

    let config = tiny_config(AttentionKind::Full, EncodingKind::Embedding);
    let model = DecoderModel::<f32>::new(&config, 3).unwrap();
    let whole = dir.join("whole.ckpt");
    checkpoint::save(&model, &whole).unwrap();
    let bytes = std::fs::read(&whole).unwrap();

    let truncated = dir.join("truncated.ckpt");
    std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(
        checkpoint::load::<f32>(&truncated),
        Err(crate::Error::Checkpoint(_))
    ));

    let padded = dir.join("padded.ckpt");
    let mut extended = bytes.clone();
    extended.extend_from_slice(&[0u8; 8]);
    std::fs::write(&padded, &extended).unwrap();
    assert!(matches!(
        checkpoint::load::<f32>(&padded),
        Err(crate::Error::Checkpoint(_))
    ));

    for f in [bad_magic, whole, truncated, padded] {
        let _ = std::fs::remove_file(f);
    }
}

// ── config text ──────────────────────────────────────────────────────

#[test]
fn config_text_round_trips() {
    for name in PRESET_NAMES {
        let config = preset(name).unwrap();
        let parsed = ModelConfig::from_text(&config.to_text()).unwrap();
        assert_eq!(parsed, config);
    }
}

#[test]
fn config_validation_rejects_bad_shapes() {
    let mut config = preset("text8_agglo_conv").unwrap();
    config.heads_or_classes = 7; // 64 % 7 != 0
    assert!(config.validate().is_err());
    config.heads_or_classes = 8;
    config.vocab_size = 1;
    assert!(config.validate().is_err());
}

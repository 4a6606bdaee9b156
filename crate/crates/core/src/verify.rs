//! Self-contained verification suite: oracle equivalences, causality
//! sweeps, and finite-difference gradient checks, each reported as a
//! named pass/fail line. The CLI's verify command runs exactly this.

#[cfg(test)]
mod tests;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{
    agglo_full, agglo_masked, full_attention, AggloAttentionParams, FullAttentionParams,
};
use crate::model::{lm_loss, AttentionKind, DecoderModel, EncodingKind, ModelConfig};
use crate::oracle::{
    agglo_full_naive, agglo_masked_naive, full_attention_naive, max_abs_diff, softmax_row,
    AggloRaw, FullRaw,
};
use crate::tensor::finite_diff::{finite_diff_grad, max_rel_err};
use crate::tensor::{DType, Elem, Tensor, TokenBatch};
use crate::Result;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub dtype: DType,
    /// Negative control: run the causality sweep against a layer with
    /// the prefix restriction removed; the check must then fail.
    pub break_masking: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            dtype: DType::F64,
            break_masking: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_input<E: Elem>(r: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<E> {
    let n: usize = shape.iter().product();
    let v: Vec<E> = (0..n)
        .map(|_| E::from_f64(r.gen_range(-1.5..1.5)))
        .collect();
    Tensor::new(shape, v).unwrap()
}

/// Run every check; all must pass for a clean exit.
pub fn run_all(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let mut results = match opts.dtype {
        DType::F32 => typed_oracle_checks::<f32>(opts, 1e-5),
        DType::F64 => typed_oracle_checks::<f64>(opts, 1e-10),
    }?;
    // Gradient oracles always run in f64; coarser precisions cannot
    // separate truncation error from real defects.
    results.push(gradcheck_agglo()?);
    results.push(gradcheck_full()?);
    results.push(gradcheck_decoder()?);
    Ok(results)
}

fn typed_oracle_checks<E: Elem>(opts: &VerifyOptions, masked_tol: f64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    // prefix-sum path against per-position recomputation
    {
        let mut worst = 0.0f64;
        for (seed, t) in [(0u64, 1usize), (1, 2), (2, 3), (3, 17), (4, 128)] {
            let mut r = rng(seed);
            let (b, d, m) = (2usize, 16usize, 4usize);
            let x = random_input::<E>(&mut r, &[b, t, d]);
            let p = AggloAttentionParams::<E>::init(d, m, &mut r)?;
            let fast = agglo_masked(&x, &x, &p)?.to_f64_vec();
            let slow = agglo_masked_naive(
                &x.to_f64_vec(),
                &x.to_f64_vec(),
                b,
                t,
                &AggloRaw::from_params(&p),
            );
            worst = worst.max(max_abs_diff(&fast, &slow));
        }
        out.push(check(
            "prefix-sum class averages vs naive recomputation",
            worst < masked_tol,
            format!("max abs diff {worst:.3e} (tol {masked_tol:.0e})"),
        ));
    }

    // whole-sequence averages against direct summation
    {
        let mut r = rng(11);
        let (b, t_ref, t_query, d, m) = (2usize, 16usize, 5usize, 32usize, 4usize);
        let x_ref = random_input::<E>(&mut r, &[b, t_ref, d]);
        let x_query = random_input::<E>(&mut r, &[b, t_query, d]);
        let p = AggloAttentionParams::<E>::init(d, m, &mut r)?;
        let fast = agglo_full(&x_ref, &x_query, &p)?.to_f64_vec();
        let slow = agglo_full_naive(
            &x_ref.to_f64_vec(),
            &x_query.to_f64_vec(),
            b,
            t_ref,
            t_query,
            &AggloRaw::from_params(&p),
        );
        let diff = max_abs_diff(&fast, &slow);
        let tol = masked_tol.max(1e-6);
        out.push(check(
            "whole-sequence class averages vs direct summation",
            diff < tol,
            format!("max abs diff {diff:.3e} (tol {tol:.0e})"),
        ));
    }

    // dot-product attention against the pair loop
    {
        let mut r = rng(13);
        let (b, t, d, h) = (2usize, 32usize, 64usize, 8usize);
        let x = random_input::<E>(&mut r, &[b, t, d]);
        let p = FullAttentionParams::<E>::init(d, h, &mut r)?;
        let mut worst = 0.0f64;
        for causal in [false, true] {
            let fast = full_attention(&x, &x, &p, causal)?.to_f64_vec();
            let slow = full_attention_naive(
                &x.to_f64_vec(),
                &x.to_f64_vec(),
                b,
                t,
                t,
                causal,
                &FullRaw::from_params(&p),
            );
            worst = worst.max(max_abs_diff(&fast, &slow));
        }
        let tol = masked_tol.max(1e-5);
        out.push(check(
            "pairwise attention vs explicit double loop",
            worst < tol,
            format!("max abs diff {worst:.3e} (tol {tol:.0e})"),
        ));
    }

    // single-class collapse to a running mean
    {
        let mut r = rng(17);
        let (b, t, d) = (2usize, 9usize, 8usize);
        let x = random_input::<E>(&mut r, &[b, t, d]);
        let p = AggloAttentionParams::<E>::init(d, 1, &mut r)?;
        let got = agglo_masked(&x, &x, &p)?.to_f64_vec();
        let xv = x.to_f64_vec();
        let proj = p.class_proj[0].to_f64_vec();
        let w_out = p.w_out.to_f64_vec();
        let mut worst = 0.0f64;
        for bi in 0..b {
            let mut running = vec![0.0f64; d];
            for i in 0..t {
                let row = &xv[(bi * t + i) * d..(bi * t + i + 1) * d];
                for l in 0..d {
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc += row[j] * proj[j * d + l];
                    }
                    running[l] += acc;
                }
                for j in 0..d {
                    let mut acc = 0.0;
                    for l in 0..d {
                        acc += running[l] / (i as f64 + 1.0) * w_out[l * d + j];
                    }
                    worst = worst.max((got[(bi * t + i) * d + j] - acc).abs());
                }
            }
        }
        out.push(check(
            "single-class attention collapses to the running mean",
            worst < 1e-6,
            format!("max abs diff {worst:.3e} (tol 1e-6)"),
        ));
    }

    // softmax and prefix-sum primitives against direct evaluation
    {
        let mut r = rng(19);
        let vals: Vec<f64> = (0..48).map(|_| r.gen_range(-6.0..6.0)).collect();
        let t = Tensor::<E>::new(&[48], vals.iter().map(|&v| E::from_f64(v)).collect())?;
        let soft = t.softmax(0)?.to_f64_vec();
        let direct = softmax_row(&vals);
        let soft_diff = max_abs_diff(&soft, &direct);
        let cums = t.cumsum(0)?.to_f64_vec();
        let mut acc = 0.0;
        let mut cum_diff = 0.0f64;
        for (i, &v) in vals.iter().enumerate() {
            acc += v;
            cum_diff = cum_diff.max((cums[i] - acc).abs());
        }
        let tol = masked_tol.max(1e-7);
        out.push(check(
            "softmax and prefix-sum primitives vs direct evaluation",
            soft_diff < tol && cum_diff < tol.max(1e-6),
            format!("softmax diff {soft_diff:.3e}, cumsum diff {cum_diff:.3e}"),
        ));
    }

    // causality sweeps
    out.push(causality_masked_class::<E>(opts.break_masking));
    out.push(causality_causal_full::<E>());
    out.push(causality_decoder::<E>()?);

    Ok(out)
}

fn causality_masked_class<E: Elem>(break_masking: bool) -> CheckResult {
    let mut failures = 0usize;
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut r = rng(seed ^ 0xa77);
        let d = 8;
        let p = AggloAttentionParams::<E>::init(d, 2, &mut r).unwrap();
        let t = r.gen_range(2..24);
        let x = random_input::<E>(&mut r, &[1, t, d]);
        let pos = r.gen_range(1..t);
        let mut bumped = x.to_vec();
        for j in 0..d {
            bumped[pos * d + j] = E::from_f64(r.gen_range(-1.5..1.5));
        }
        let x2 = Tensor::new(&[1, t, d], bumped).unwrap();
        let layer = |x: &Tensor<E>| {
            if break_masking {
                // fault hook: whole-sequence averaging with the prefix
                // restriction removed
                agglo_full(x, x, &p).unwrap()
            } else {
                agglo_masked(x, x, &p).unwrap()
            }
        };
        let base = layer(&x).to_f64_vec();
        let out = layer(&x2).to_f64_vec();
        let head_diff = max_abs_diff(&base[..pos * d], &out[..pos * d]);
        worst = worst.max(head_diff);
        if head_diff > 1e-6 {
            failures += 1;
        }
    }
    check(
        "causality of masked class attention (50 perturbation trials)",
        failures == 0,
        format!("{failures}/50 trials leaked; worst leak {worst:.3e} (tol 1e-6)"),
    )
}

fn causality_causal_full<E: Elem>() -> CheckResult {
    let mut failures = 0usize;
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut r = rng(seed ^ 0xb88);
        let d = 8;
        let p = FullAttentionParams::<E>::init(d, 2, &mut r).unwrap();
        let t = r.gen_range(2..24);
        let x = random_input::<E>(&mut r, &[1, t, d]);
        let pos = r.gen_range(1..t);
        let mut bumped = x.to_vec();
        for j in 0..d {
            bumped[pos * d + j] = E::from_f64(r.gen_range(-1.5..1.5));
        }
        let x2 = Tensor::new(&[1, t, d], bumped).unwrap();
        let base = full_attention(&x, &x, &p, true).unwrap().to_f64_vec();
        let out = full_attention(&x2, &x2, &p, true).unwrap().to_f64_vec();
        let head_diff = max_abs_diff(&base[..pos * d], &out[..pos * d]);
        worst = worst.max(head_diff);
        if head_diff > 1e-6 {
            failures += 1;
        }
    }
    check(
        "causality of causal dot-product attention (50 perturbation trials)",
        failures == 0,
        format!("{failures}/50 trials leaked; worst leak {worst:.3e} (tol 1e-6)"),
    )
}

fn causality_decoder<E: Elem>() -> Result<CheckResult> {
    let mut failures = 0usize;
    let mut worst = 0.0f64;
    let combos = [
        (AttentionKind::Full, EncodingKind::Embedding),
        (AttentionKind::Full, EncodingKind::Convolution),
        (AttentionKind::Agglomerative, EncodingKind::Embedding),
        (AttentionKind::Agglomerative, EncodingKind::Convolution),
    ];
    for (idx, (attention_kind, encoding_kind)) in combos.into_iter().enumerate() {
        let config = ModelConfig {
            attention_kind,
            encoding_kind,
            n_blocks: 2,
            seq_len: 24,
            d_model: 16,
            heads_or_classes: 4,
            vocab_size: 11,
            ffn_multiplier: 2,
            conv_width: 4,
        };
        let model = DecoderModel::<E>::new(&config, 100 + idx as u64)?;
        let mut r = rng(200 + idx as u64);
        let head: Vec<E> = (0..config.d_model * config.vocab_size)
            .map(|_| E::from_f64(r.gen_range(-0.3..0.3)))
            .collect();
        model.output_proj.set_values(&head)?;
        let v = config.vocab_size;
        for _trial in 0..10 {
            let t = 24;
            let ids: Vec<u32> = (0..t).map(|_| r.gen_range(0..v as u32)).collect();
            let base = model
                .forward(&TokenBatch::new(ids.clone(), 1, t)?)?
                .to_f64_vec();
            let pos = r.gen_range(1..t);
            let mut bumped = ids.clone();
            bumped[pos] = (bumped[pos] + 1 + r.gen_range(0..v as u32 - 1)) % v as u32;
            let out = model.forward(&TokenBatch::new(bumped, 1, t)?)?.to_f64_vec();
            let head_diff = max_abs_diff(&base[..pos * v], &out[..pos * v]);
            worst = worst.max(head_diff);
            if head_diff > 1e-5 {
                failures += 1;
            }
        }
    }
    Ok(check(
        "causality of the decoder, all attention/encoding combinations",
        failures == 0,
        format!("{failures}/40 trials leaked; worst leak {worst:.3e} (tol 1e-5)"),
    ))
}

/// Finite-difference check of every class-attention parameter.
pub fn gradcheck_agglo() -> Result<CheckResult> {
    let mut r = rng(20);
    let (b, t, d, m) = (1usize, 5usize, 8usize, 2usize);
    let x = Tensor::<f64>::param(
        &[b, t, d],
        (0..b * t * d).map(|_| r.gen_range(-1.0..1.0)).collect(),
    )?;
    let p = AggloAttentionParams::<f64>::init(d, m, &mut r)?;
    let probe_w = {
        let mut rr = rng(21);
        let w: Vec<f64> = (0..b * t * d).map(|_| rr.gen_range(-1.0..1.0)).collect();
        Tensor::new(&[b, t, d], w)?
    };
    let forward = |x: &Tensor<f64>, p: &AggloAttentionParams<f64>| -> Result<Tensor<f64>> {
        Ok(agglo_masked(x, x, p)?.mul(&probe_w)?.sum_all())
    };
    forward(&x, &p)?.backward()?;
    let mut inputs = vec![("x".to_string(), x.clone())];
    inputs.extend(p.named("layer"));
    let mut worst = 0.0f64;
    for (_, tensor) in &inputs {
        let analytic = tensor.grad_or_zeros();
        let fd = finite_diff_grad(
            |probe| {
                let pick = |t: &Tensor<f64>| {
                    if Tensor::same(t, tensor) {
                        probe.clone()
                    } else {
                        t.clone()
                    }
                };
                let swapped = AggloAttentionParams {
                    w_ref: pick(&p.w_ref),
                    b_ref: pick(&p.b_ref),
                    w_query: pick(&p.w_query),
                    b_query: pick(&p.b_query),
                    class_proj: p.class_proj.iter().map(&pick).collect(),
                    w_out: pick(&p.w_out),
                    classes: m,
                    width: d,
                };
                forward(&pick(&x), &swapped)?.item()
            },
            tensor,
            1e-5,
        )?;
        worst = worst.max(max_rel_err(&analytic, &fd, 1e-8));
    }
    Ok(check(
        "gradients of class attention vs central differences (f64)",
        worst < 1e-5,
        format!("worst relative error {worst:.3e} (tol 1e-5)"),
    ))
}

/// Finite-difference check of every dot-product attention parameter.
pub fn gradcheck_full() -> Result<CheckResult> {
    let mut r = rng(22);
    let (b, t, d, h) = (1usize, 5usize, 8usize, 2usize);
    let x = Tensor::<f64>::param(
        &[b, t, d],
        (0..b * t * d).map(|_| r.gen_range(-1.0..1.0)).collect(),
    )?;
    let p = FullAttentionParams::<f64>::init(d, h, &mut r)?;
    let probe_w = {
        let mut rr = rng(23);
        let w: Vec<f64> = (0..b * t * d).map(|_| rr.gen_range(-1.0..1.0)).collect();
        Tensor::new(&[b, t, d], w)?
    };
    let forward = |x: &Tensor<f64>, p: &FullAttentionParams<f64>| -> Result<Tensor<f64>> {
        Ok(full_attention(x, x, p, true)?.mul(&probe_w)?.sum_all())
    };
    forward(&x, &p)?.backward()?;
    let mut inputs = vec![("x".to_string(), x.clone())];
    inputs.extend(p.named("layer"));
    let mut worst = 0.0f64;
    for (_, tensor) in &inputs {
        let analytic = tensor.grad_or_zeros();
        let fd = finite_diff_grad(
            |probe| {
                let pick = |t: &Tensor<f64>| {
                    if Tensor::same(t, tensor) {
                        probe.clone()
                    } else {
                        t.clone()
                    }
                };
                let swapped = FullAttentionParams {
                    w_query: pick(&p.w_query),
                    w_key: pick(&p.w_key),
                    w_value: pick(&p.w_value),
                    w_out: pick(&p.w_out),
                    heads: h,
                    width: d,
                };
                forward(&pick(&x), &swapped)?.item()
            },
            tensor,
            1e-5,
        )?;
        worst = worst.max(max_rel_err(&analytic, &fd, 1e-8));
    }
    Ok(check(
        "gradients of dot-product attention vs central differences (f64)",
        worst < 1e-5,
        format!("worst relative error {worst:.3e} (tol 1e-5)"),
    ))
}

/// Finite-difference check of every micro-decoder parameter.
pub fn gradcheck_decoder() -> Result<CheckResult> {
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
    let model = DecoderModel::<f64>::new(&config, 53)?;
    let mut r = rng(53);
    let head: Vec<f64> = (0..config.d_model * config.vocab_size)
        .map(|_| r.gen_range(-0.4..0.4))
        .collect();
    model.output_proj.set_values(&head)?;
    let input = TokenBatch::new(vec![0, 3, 1, 4, 2, 2], 1, 6)?;
    let target = TokenBatch::new(vec![3, 1, 4, 2, 2, 0], 1, 6)?;
    let loss = lm_loss(&model.forward(&input)?, &target)?;
    loss.backward()?;
    let mut worst = 0.0f64;
    for (_, tensor) in model.named_params() {
        let analytic = tensor.grad_or_zeros();
        let saved = tensor.to_vec();
        let fd = finite_diff_grad(
            |probe| {
                tensor.set_values(&probe.to_vec())?;
                let out = lm_loss(&model.forward(&input)?, &target)?.item();
                tensor.set_values(&saved)?;
                out
            },
            &tensor,
            1e-6,
        )?;
        worst = worst.max(max_rel_err(&analytic, &fd, 1e-6));
    }
    Ok(check(
        "gradients of the micro decoder vs central differences (f64)",
        worst < 1e-4,
        format!("worst relative error {worst:.3e} (tol 1e-4)"),
    ))
}

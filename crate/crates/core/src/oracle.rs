//! Slow, obviously-correct reference implementations used to cross-check
//! the fast layers. Everything here works on plain f64 buffers with
//! nested loops and recomputes from scratch instead of reusing prefix
//! sums, fused kernels, or the tensor graph.

use crate::attention::{AggloAttentionParams, FullAttentionParams};
use crate::tensor::{Elem, DIV_GUARD};

/// Raw f64 copies of one class-attention layer's weights.
pub struct AggloRaw {
    pub w_ref: Vec<f64>,
    pub b_ref: Vec<f64>,
    pub w_query: Vec<f64>,
    pub b_query: Vec<f64>,
    pub class_proj: Vec<Vec<f64>>, // m of [d, d/m]
    pub w_out: Vec<f64>,           // [d, d]
    pub classes: usize,
    pub width: usize,
}

impl AggloRaw {
    pub fn from_params<E: Elem>(p: &AggloAttentionParams<E>) -> Self {
        AggloRaw {
            w_ref: p.w_ref.to_f64_vec(),
            b_ref: p.b_ref.to_f64_vec(),
            w_query: p.w_query.to_f64_vec(),
            b_query: p.b_query.to_f64_vec(),
            class_proj: p.class_proj.iter().map(|t| t.to_f64_vec()).collect(),
            w_out: p.w_out.to_f64_vec(),
            classes: p.classes,
            width: p.width,
        }
    }
}

/// Raw f64 copies of one dot-product attention layer's weights.
pub struct FullRaw {
    pub w_query: Vec<f64>,
    pub w_key: Vec<f64>,
    pub w_value: Vec<f64>,
    pub w_out: Vec<f64>,
    pub heads: usize,
    pub width: usize,
}

impl FullRaw {
    pub fn from_params<E: Elem>(p: &FullAttentionParams<E>) -> Self {
        FullRaw {
            w_query: p.w_query.to_f64_vec(),
            w_key: p.w_key.to_f64_vec(),
            w_value: p.w_value.to_f64_vec(),
            w_out: p.w_out.to_f64_vec(),
            heads: p.heads,
            width: p.width,
        }
    }
}

/// Stable softmax of one row.
pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Class probabilities of one input row: softmax(x W + b).
fn assign_row(x: &[f64], w: &[f64], b: &[f64], d: usize, m: usize) -> Vec<f64> {
    let mut logits = vec![0.0f64; m];
    for k in 0..m {
        let mut acc = b[k];
        for j in 0..d {
            acc += x[j] * w[j * m + k];
        }
        logits[k] = acc;
    }
    softmax_row(&logits)
}

/// Project one input row with class projection `k`: x P^k, width d/m.
fn project_row(x: &[f64], proj: &[f64], d: usize, dm: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; dm];
    for l in 0..dm {
        let mut acc = 0.0;
        for j in 0..d {
            acc += x[j] * proj[j * dm + l];
        }
        out[l] = acc;
    }
    out
}

/// Per-position recomputation of masked class-averaging attention:
/// for every output position the class sums over tau <= i are rebuilt
/// from scratch (O(t^2)), with the same guarded normalization as the
/// layer. Inputs are [b, t, d] row-major; output likewise.
pub fn agglo_masked_naive(
    x_ref: &[f64],
    x_query: &[f64],
    b: usize,
    t: usize,
    p: &AggloRaw,
) -> Vec<f64> {
    let (d, m) = (p.width, p.classes);
    let dm = d / m;
    let mut out = vec![0.0f64; b * t * d];
    for bi in 0..b {
        let base = bi * t * d;
        for i in 0..t {
            // mixture vector p_i, assembled class by class
            let mut mixed = vec![0.0f64; d];
            let cq = assign_row(
                &x_query[base + i * d..base + (i + 1) * d],
                &p.w_query,
                &p.b_query,
                d,
                m,
            );
            for k in 0..m {
                let mut mass = 0.0f64;
                let mut sum = vec![0.0f64; dm];
                for tau in 0..=i {
                    let xrow = &x_ref[base + tau * d..base + (tau + 1) * d];
                    let cr = assign_row(xrow, &p.w_ref, &p.b_ref, d, m)[k];
                    mass += cr;
                    let proj = project_row(xrow, &p.class_proj[k], d, dm);
                    for l in 0..dm {
                        sum[l] += cr * proj[l];
                    }
                }
                for l in 0..dm {
                    mixed[k * dm + l] = cq[k] * sum[l] / (mass + DIV_GUARD);
                }
            }
            let orow = &mut out[base + i * d..base + (i + 1) * d];
            for j in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += mixed[l] * p.w_out[l * d + j];
                }
                orow[j] = acc;
            }
        }
    }
    out
}

/// Direct-summation evaluation of the non-causal class-averaging layer;
/// reference and query lengths may differ.
pub fn agglo_full_naive(
    x_ref: &[f64],
    x_query: &[f64],
    b: usize,
    t_ref: usize,
    t_query: usize,
    p: &AggloRaw,
) -> Vec<f64> {
    let (d, m) = (p.width, p.classes);
    let dm = d / m;
    let mut out = vec![0.0f64; b * t_query * d];
    for bi in 0..b {
        // one summary per class for the whole reference sequence
        let mut averages = vec![vec![0.0f64; dm]; m];
        for (k, avg) in averages.iter_mut().enumerate() {
            let mut mass = 0.0f64;
            let mut sum = vec![0.0f64; dm];
            for tau in 0..t_ref {
                let xrow = &x_ref[(bi * t_ref + tau) * d..(bi * t_ref + tau + 1) * d];
                let cr = assign_row(xrow, &p.w_ref, &p.b_ref, d, m)[k];
                mass += cr;
                let proj = project_row(xrow, &p.class_proj[k], d, dm);
                for l in 0..dm {
                    sum[l] += cr * proj[l];
                }
            }
            for l in 0..dm {
                avg[l] = sum[l] / (mass + DIV_GUARD);
            }
        }
        for i in 0..t_query {
            let qrow = &x_query[(bi * t_query + i) * d..(bi * t_query + i + 1) * d];
            let cq = assign_row(qrow, &p.w_query, &p.b_query, d, m);
            let mut mixed = vec![0.0f64; d];
            for k in 0..m {
                for l in 0..dm {
                    mixed[k * dm + l] = cq[k] * averages[k][l];
                }
            }
            let orow = &mut out[(bi * t_query + i) * d..(bi * t_query + i + 1) * d];
            for j in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += mixed[l] * p.w_out[l * d + j];
                }
                orow[j] = acc;
            }
        }
    }
    out
}

/// Explicit O(t^2) pair-loop evaluation of multi-head dot-product
/// attention, one (query, reference) pair at a time.
pub fn full_attention_naive(
    x_ref: &[f64],
    x_query: &[f64],
    b: usize,
    t_ref: usize,
    t_query: usize,
    causal: bool,
    p: &FullRaw,
) -> Vec<f64> {
    let d = p.width;
    let h = p.heads;
    let dh = d / h;
    let scale = 1.0 / (dh as f64).sqrt();
    let project = |x: &[f64], w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0f64; d];
        for j in 0..d {
            let mut acc = 0.0;
            for l in 0..d {
                acc += x[l] * w[l * d + j];
            }
            out[j] = acc;
        }
        out
    };
    let mut out = vec![0.0f64; b * t_query * d];
    for bi in 0..b {
        let qbase = bi * t_query * d;
        let rbase = bi * t_ref * d;
        let queries: Vec<Vec<f64>> = (0..t_query)
            .map(|i| project(&x_query[qbase + i * d..qbase + (i + 1) * d], &p.w_query))
            .collect();
        let keys: Vec<Vec<f64>> = (0..t_ref)
            .map(|i| project(&x_ref[rbase + i * d..rbase + (i + 1) * d], &p.w_key))
            .collect();
        let values: Vec<Vec<f64>> = (0..t_ref)
            .map(|i| project(&x_ref[rbase + i * d..rbase + (i + 1) * d], &p.w_value))
            .collect();
        for i in 0..t_query {
            let mut mixed = vec![0.0f64; d];
            for head in 0..h {
                let cols = head * dh..(head + 1) * dh;
                let mut logits = vec![0.0f64; t_ref];
                for tau in 0..t_ref {
                    let mut dot = 0.0;
                    for (ql, kl) in queries[i][cols.clone()]
                        .iter()
                        .zip(&keys[tau][cols.clone()])
                    {
                        dot += ql * kl;
                    }
                    logits[tau] = dot * scale;
                    if causal && tau > i {
                        logits[tau] += crate::tensor::CAUSAL_MASK_OFFSET;
                    }
                }
                let weights = softmax_row(&logits);
                for tau in 0..t_ref {
                    for col in cols.clone() {
                        mixed[col] += weights[tau] * values[tau][col];
                    }
                }
            }
            let orow = &mut out[qbase + i * d..qbase + (i + 1) * d];
            for j in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += mixed[l] * p.w_out[l * d + j];
                }
                orow[j] = acc;
            }
        }
    }
    out
}

/// Mean cross-entropy in bits by direct probability normalization.
pub fn cross_entropy_bits_direct(logits: &[f64], vocab: usize, targets: &[u32]) -> f64 {
    let rows = targets.len();
    assert_eq!(logits.len(), rows * vocab);
    let mut total = 0.0f64;
    for (r, &t) in targets.iter().enumerate() {
        let probs = softmax_row(&logits[r * vocab..(r + 1) * vocab]);
        total += -(probs[t as usize].ln()) / std::f64::consts::LN_2;
    }
    total / rows as f64
}

/// Largest absolute elementwise difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

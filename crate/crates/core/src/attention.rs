//! Attention layers: linear-time class-averaging attention (masked and
//! full) and the reference multi-head scaled dot-product attention.
//!
//! The class-based layer soft-assigns every position to one of `m`
//! classes, averages the class members' projected representations (a
//! running prefix average in the masked case), and hands each query
//! position a mixture of its classes' summaries weighted by its own
//! assignment. Cost is O(t * d^2 / m + t * d * m); no t-by-t buffer is
//! ever formed.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::init::{glorot_uniform, zeros_param};
use crate::tensor::{concat, shape::fmt_shape, Elem, Tensor, CAUSAL_MASK_OFFSET};

/// Weights of one class-averaging attention layer. Reference and query
/// classification weights are distinct storage: information flows from
/// reference elements to query elements, not symmetrically.
pub struct AggloAttentionParams<E: Elem> {
    pub w_ref: Tensor<E>,           // [d, m]
    pub b_ref: Tensor<E>,           // [m]
    pub w_query: Tensor<E>,         // [d, m]
    pub b_query: Tensor<E>,         // [m]
    pub class_proj: Vec<Tensor<E>>, // m projections [d, d/m]
    pub w_out: Tensor<E>,           // [d, d]
    pub classes: usize,
    pub width: usize,
}

impl<E: Elem> AggloAttentionParams<E> {
    pub fn init<R: Rng>(width: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if classes == 0 || width % classes != 0 {
            return Err(Error::dim(format!(
                "width {width} not divisible into {classes} classes"
            )));
        }
        let per_class = width / classes;
        let class_proj = (0..classes)
            .map(|_| glorot_uniform(rng, &[width, per_class], width, per_class))
            .collect::<Result<Vec<_>>>()?;
        Ok(AggloAttentionParams {
            w_ref: glorot_uniform(rng, &[width, classes], width, classes)?,
            b_ref: zeros_param(&[classes])?,
            w_query: glorot_uniform(rng, &[width, classes], width, classes)?,
            b_query: zeros_param(&[classes])?,
            class_proj,
            w_out: glorot_uniform(rng, &[width, width], width, width)?,
            classes,
            width,
        })
    }

    pub fn named(&self, prefix: &str) -> Vec<(String, Tensor<E>)> {
        let mut out = vec![
            (format!("{prefix}.w_ref"), self.w_ref.clone()),
            (format!("{prefix}.b_ref"), self.b_ref.clone()),
            (format!("{prefix}.w_query"), self.w_query.clone()),
            (format!("{prefix}.b_query"), self.b_query.clone()),
        ];
        for (k, p) in self.class_proj.iter().enumerate() {
            out.push((format!("{prefix}.class_proj.{k}"), p.clone()));
        }
        out.push((format!("{prefix}.w_out"), self.w_out.clone()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.named("").iter().map(|(_, t)| t.numel()).sum()
    }

    /// Gradient-free copy for inference-only timing.
    pub fn detached(&self) -> Self {
        AggloAttentionParams {
            w_ref: self.w_ref.detached(),
            b_ref: self.b_ref.detached(),
            w_query: self.w_query.detached(),
            b_query: self.b_query.detached(),
            class_proj: self.class_proj.iter().map(Tensor::detached).collect(),
            w_out: self.w_out.detached(),
            classes: self.classes,
            width: self.width,
        }
    }
}

/// Weights of one multi-head dot-product attention layer; the d-by-d
/// projections are read as `heads` independent slices of width d/heads.
pub struct FullAttentionParams<E: Elem> {
    pub w_query: Tensor<E>, // [d, d]
    pub w_key: Tensor<E>,   // [d, d]
    pub w_value: Tensor<E>, // [d, d]
    pub w_out: Tensor<E>,   // [d, d]
    pub heads: usize,
    pub width: usize,
}

impl<E: Elem> FullAttentionParams<E> {
    pub fn init<R: Rng>(width: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || width % heads != 0 {
            return Err(Error::dim(format!(
                "width {width} not divisible into {heads} heads"
            )));
        }
        Ok(FullAttentionParams {
            w_query: glorot_uniform(rng, &[width, width], width, width)?,
            w_key: glorot_uniform(rng, &[width, width], width, width)?,
            w_value: glorot_uniform(rng, &[width, width], width, width)?,
            w_out: glorot_uniform(rng, &[width, width], width, width)?,
            heads,
            width,
        })
    }

    pub fn named(&self, prefix: &str) -> Vec<(String, Tensor<E>)> {
        vec![
            (format!("{prefix}.w_query"), self.w_query.clone()),
            (format!("{prefix}.w_key"), self.w_key.clone()),
            (format!("{prefix}.w_value"), self.w_value.clone()),
            (format!("{prefix}.w_out"), self.w_out.clone()),
        ]
    }

    pub fn num_params(&self) -> usize {
        4 * self.width * self.width
    }

    /// Gradient-free copy for inference-only timing.
    pub fn detached(&self) -> Self {
        FullAttentionParams {
            w_query: self.w_query.detached(),
            w_key: self.w_key.detached(),
            w_value: self.w_value.detached(),
            w_out: self.w_out.detached(),
            heads: self.heads,
            width: self.width,
        }
    }
}

/// Soft per-position probabilities over the attention classes; every
/// [batch, time] row is a distribution.
pub struct ClassAssignment<E: Elem>(pub Tensor<E>);

impl<E: Elem> ClassAssignment<E> {
    pub fn probs(&self) -> &Tensor<E> {
        &self.0
    }
}

/// softmax(x W + b) over the class axis.
pub fn assign_classes<E: Elem>(
    x: &Tensor<E>,
    w: &Tensor<E>,
    b: &Tensor<E>,
) -> Result<ClassAssignment<E>> {
    let logits = x.matmul(w)?.add(b)?;
    let axis = logits.shape().len() - 1;
    Ok(ClassAssignment(logits.softmax(axis)?))
}

fn check_widths<E: Elem>(x: &Tensor<E>, width: usize, name: &str) -> Result<()> {
    let sh = x.shape();
    if sh.len() != 3 || sh[2] != width {
        return Err(Error::dim(format!(
            "{name} expects [batch, time, {width}], got {}",
            fmt_shape(sh)
        )));
    }
    Ok(())
}

/// Running class average over positions tau <= i: weighted prefix sums
/// of the projected inputs, normalized by the running class mass.
fn class_average_masked<E: Elem>(
    x_ref: &Tensor<E>,
    ck_ref: &Tensor<E>,
    proj: &Tensor<E>,
) -> Result<Tensor<E>> {
    let projected = x_ref.matmul(proj)?; // [b, t, d/m]
    let weighted = ck_ref.mul(&projected)?;
    let running_sum = weighted.cumsum(1)?;
    let running_mass = ck_ref.cumsum(1)?;
    running_sum.div(&running_mass)
}

/// Whole-sequence class average: a single summary per class, shared by
/// every query position.
fn class_average_full<E: Elem>(
    x_ref: &Tensor<E>,
    ck_ref: &Tensor<E>,
    proj: &Tensor<E>,
) -> Result<Tensor<E>> {
    let projected = x_ref.matmul(proj)?; // [b, t_r, d/m]
    let weighted = ck_ref.mul(&projected)?;
    let total = weighted.sum_axis(1)?; // [b, 1, d/m]
    let mass = ck_ref.sum_axis(1)?; // [b, 1, 1]
    total.div(&mass)
}

/// Causal self-attention by class averaging. Position i sees reference
/// positions tau <= i only; runtime and memory stay linear in t.
pub fn agglo_masked<E: Elem>(
    x_ref: &Tensor<E>,
    x_query: &Tensor<E>,
    params: &AggloAttentionParams<E>,
) -> Result<Tensor<E>> {
    check_widths(x_ref, params.width, "agglo_masked")?;
    check_widths(x_query, params.width, "agglo_masked")?;
    if x_ref.shape() != x_query.shape() {
        return Err(Error::dim(format!(
            "masked attention requires aligned sequences, got {} and {}",
            fmt_shape(x_ref.shape()),
            fmt_shape(x_query.shape())
        )));
    }
    let c_ref = assign_classes(x_ref, &params.w_ref, &params.b_ref)?.0;
    let c_query = assign_classes(x_query, &params.w_query, &params.b_query)?.0;
    let mut parts = Vec::with_capacity(params.classes);
    for k in 0..params.classes {
        let ck_ref = c_ref.slice(2, k, 1)?;
        let ck_query = c_query.slice(2, k, 1)?;
        let avg = class_average_masked(x_ref, &ck_ref, &params.class_proj[k])?;
        parts.push(ck_query.mul(&avg)?);
    }
    concat(&parts, 2)?.matmul(&params.w_out)
}

/// Non-causal class averaging over a whole reference sequence; reference
/// and query lengths may differ.
pub fn agglo_full<E: Elem>(
    x_ref: &Tensor<E>,
    x_query: &Tensor<E>,
    params: &AggloAttentionParams<E>,
) -> Result<Tensor<E>> {
    check_widths(x_ref, params.width, "agglo_full")?;
    check_widths(x_query, params.width, "agglo_full")?;
    if x_ref.shape()[0] != x_query.shape()[0] {
        return Err(Error::dim(format!(
            "batch extents disagree: {} vs {}",
            fmt_shape(x_ref.shape()),
            fmt_shape(x_query.shape())
        )));
    }
    let c_ref = assign_classes(x_ref, &params.w_ref, &params.b_ref)?.0;
    let c_query = assign_classes(x_query, &params.w_query, &params.b_query)?.0;
    let mut parts = Vec::with_capacity(params.classes);
    for k in 0..params.classes {
        let ck_ref = c_ref.slice(2, k, 1)?;
        let ck_query = c_query.slice(2, k, 1)?;
        let avg = class_average_full(x_ref, &ck_ref, &params.class_proj[k])?; // [b, 1, d/m]
        parts.push(ck_query.mul(&avg)?); // broadcast over query positions
    }
    concat(&parts, 2)?.matmul(&params.w_out)
}

/// Additive mask: 0 where query position i may see reference position j
/// (j <= i), a large negative offset elsewhere.
fn causal_mask<E: Elem>(t: usize) -> Tensor<E> {
    let mut v = vec![E::ZERO; t * t];
    let off = E::from_f64(CAUSAL_MASK_OFFSET);
    for i in 0..t {
        for j in (i + 1)..t {
            v[i * t + j] = off;
        }
    }
    Tensor::new(&[t, t], v).expect("mask shape")
}

/// Multi-head scaled dot-product attention, the quadratic reference.
/// With `causal`, disallowed logits receive a large negative offset
/// before the softmax; reference and query extents must then align.
pub fn full_attention<E: Elem>(
    x_ref: &Tensor<E>,
    x_query: &Tensor<E>,
    params: &FullAttentionParams<E>,
    causal: bool,
) -> Result<Tensor<E>> {
    check_widths(x_ref, params.width, "full_attention")?;
    check_widths(x_query, params.width, "full_attention")?;
    let (t_ref, t_query) = (x_ref.shape()[1], x_query.shape()[1]);
    if causal && t_ref != t_query {
        return Err(Error::contract(format!(
            "causal attention requires aligned positions, got reference length {t_ref} and query length {t_query}"
        )));
    }
    if x_ref.shape()[0] != x_query.shape()[0] {
        return Err(Error::dim(format!(
            "batch extents disagree: {} vs {}",
            fmt_shape(x_ref.shape()),
            fmt_shape(x_query.shape())
        )));
    }
    let q = x_query.matmul(&params.w_query)?;
    let k = x_ref.matmul(&params.w_key)?;
    let v = x_ref.matmul(&params.w_value)?;
    let head_width = params.width / params.heads;
    let scale = E::from_f64(1.0 / (head_width as f64).sqrt());
    let mask = if causal {
        Some(causal_mask::<E>(t_query))
    } else {
        None
    };
    let mut heads = Vec::with_capacity(params.heads);
    for h in 0..params.heads {
        let qh = q.slice(2, h * head_width, head_width)?;
        let kh = k.slice(2, h * head_width, head_width)?;
        let vh = v.slice(2, h * head_width, head_width)?;
        let mut logits = qh.matmul_nt_scaled(&kh, scale)?; // [b, t_q, t_r]
        if let Some(m) = &mask {
            logits = logits.add(m)?;
        }
        let weights = logits.softmax(2)?;
        heads.push(weights.matmul(&vh)?);
    }
    concat(&heads, 2)?.matmul(&params.w_out)
}

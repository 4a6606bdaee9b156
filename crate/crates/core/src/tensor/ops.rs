//! Forward implementations of the recorded operations.

use std::rc::Rc;

use super::gemm::gemm_slices;
use super::shape::{axis_split, broadcast_shapes, broadcast_strides, check_axis, fmt_shape, numel};
use super::{Elem, Op, Tensor, TokenBatch, DIV_GUARD};
use crate::error::{Error, Result};

// ── broadcast machinery ──────────────────────────────────────────────

/// Apply `f` elementwise over two buffers broadcast into `out_shape`.
pub(crate) fn zip_broadcast<E: Elem>(
    a: &[E],
    a_shape: &[usize],
    b: &[E],
    b_shape: &[usize],
    out_shape: &[usize],
    f: impl Fn(E, E) -> E + Copy,
) -> Vec<E> {
    let n = numel(out_shape);
    let mut out = vec![E::ZERO; n];
    if a_shape == b_shape {
        for ((dst, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *dst = f(x, y);
        }
        return out;
    }
    let astr = broadcast_strides(a_shape, out_shape);
    let bstr = broadcast_strides(b_shape, out_shape);
    fill_broadcast(out_shape, &astr, &bstr, a, b, &mut out, 0, 0, 0, 0, f);
    out
}

#[allow(clippy::too_many_arguments)]
fn fill_broadcast<E: Elem>(
    dims: &[usize],
    astr: &[usize],
    bstr: &[usize],
    a: &[E],
    b: &[E],
    out: &mut [E],
    dim: usize,
    aoff: usize,
    boff: usize,
    ooff: usize,
    f: impl Fn(E, E) -> E + Copy,
) {
    if dims.is_empty() {
        out[0] = f(a[0], b[0]);
        return;
    }
    if dim == dims.len() - 1 {
        let (sa, sb) = (astr[dim], bstr[dim]);
        let row = &mut out[ooff..ooff + dims[dim]];
        match (sa, sb) {
            (1, 1) => {
                for (j, dst) in row.iter_mut().enumerate() {
                    *dst = f(a[aoff + j], b[boff + j]);
                }
            }
            (1, 0) => {
                let y = b[boff];
                for (j, dst) in row.iter_mut().enumerate() {
                    *dst = f(a[aoff + j], y);
                }
            }
            (0, 1) => {
                let x = a[aoff];
                for (j, dst) in row.iter_mut().enumerate() {
                    *dst = f(x, b[boff + j]);
                }
            }
            _ => {
                for (j, dst) in row.iter_mut().enumerate() {
                    *dst = f(a[aoff + j * sa], b[boff + j * sb]);
                }
            }
        }
        return;
    }
    let out_stride: usize = dims[dim + 1..].iter().product();
    for j in 0..dims[dim] {
        fill_broadcast(
            dims,
            astr,
            bstr,
            a,
            b,
            out,
            dim + 1,
            aoff + j * astr[dim],
            boff + j * bstr[dim],
            ooff + j * out_stride,
            f,
        );
    }
}

/// Sum `g` (laid out as `out_shape`) down to `target_shape`, undoing a
/// broadcast. Used by the backward pass of every broadcasting op.
pub(crate) fn reduce_broadcast<E: Elem>(
    g: &[E],
    out_shape: &[usize],
    target_shape: &[usize],
) -> Vec<E> {
    if out_shape == target_shape {
        return g.to_vec();
    }
    let mut acc = vec![E::ZERO; numel(target_shape)];
    let tstr = broadcast_strides(target_shape, out_shape);
    accumulate_broadcast(out_shape, &tstr, g, &mut acc, 0, 0, 0);
    acc
}

fn accumulate_broadcast<E: Elem>(
    dims: &[usize],
    tstr: &[usize],
    g: &[E],
    acc: &mut [E],
    dim: usize,
    goff: usize,
    toff: usize,
) {
    if dims.is_empty() {
        acc[0] += g[0];
        return;
    }
    if dim == dims.len() - 1 {
        let s = tstr[dim];
        if s == 1 {
            for j in 0..dims[dim] {
                acc[toff + j] += g[goff + j];
            }
        } else if s == 0 {
            let mut sum = E::ZERO;
            for j in 0..dims[dim] {
                sum += g[goff + j];
            }
            acc[toff] += sum;
        } else {
            for j in 0..dims[dim] {
                acc[toff + j * s] += g[goff + j];
            }
        }
        return;
    }
    let g_stride: usize = dims[dim + 1..].iter().product();
    for j in 0..dims[dim] {
        accumulate_broadcast(
            dims,
            tstr,
            g,
            acc,
            dim + 1,
            goff + j * g_stride,
            toff + j * tstr[dim],
        );
    }
}

/// Walk every 1-D lane of `shape` along `axis`, calling
/// `f(base, stride, len)`; lane elements sit at `base + j * stride`.
pub(crate) fn for_each_lane(shape: &[usize], axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let (outer, len, inner) = axis_split(shape, axis);
    for o in 0..outer {
        for i in 0..inner {
            f(o * len * inner + i, inner, len);
        }
    }
}

// ── matmul ───────────────────────────────────────────────────────────

pub(crate) struct MatDims {
    pub batch: usize,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub a_batched: bool,
    pub b_batched: bool,
    pub out_shape: Vec<usize>,
}

/// Shape analysis shared by the forward op and its adjoints. Batch
/// extents must match elementwise, or one operand is a plain matrix
/// broadcast across the other's batch.
pub(crate) fn matmul_dims<E: Elem>(
    a: &Tensor<E>,
    b: &Tensor<E>,
    ta: bool,
    tb: bool,
) -> Result<MatDims> {
    let (ash, bsh) = (a.shape(), b.shape());
    if ash.len() < 2 || bsh.len() < 2 {
        return Err(Error::dim(format!(
            "matmul needs rank >= 2 operands, got {} and {}",
            fmt_shape(ash),
            fmt_shape(bsh)
        )));
    }
    let (ar, ac) = (ash[ash.len() - 2], ash[ash.len() - 1]);
    let (br, bc) = (bsh[bsh.len() - 2], bsh[bsh.len() - 1]);
    let (m, ka) = if ta { (ac, ar) } else { (ar, ac) };
    let (kb, n) = if tb { (bc, br) } else { (br, bc) };
    if ka != kb {
        return Err(Error::dim(format!(
            "matmul inner extents disagree: {} vs {}",
            fmt_shape(ash),
            fmt_shape(bsh)
        )));
    }
    let abatch = &ash[..ash.len() - 2];
    let bbatch = &bsh[..bsh.len() - 2];
    let (batch_dims, a_batched, b_batched) = if abatch == bbatch {
        (abatch.to_vec(), !abatch.is_empty(), !bbatch.is_empty())
    } else if bbatch.is_empty() {
        (abatch.to_vec(), true, false)
    } else if abatch.is_empty() {
        (bbatch.to_vec(), false, true)
    } else {
        return Err(Error::dim(format!(
            "matmul batch extents disagree: {} vs {}",
            fmt_shape(ash),
            fmt_shape(bsh)
        )));
    };
    let batch = numel(&batch_dims);
    let mut out_shape = batch_dims;
    out_shape.push(m);
    out_shape.push(n);
    Ok(MatDims {
        batch,
        m,
        k: ka,
        n,
        a_batched,
        b_batched,
        out_shape,
    })
}

impl<E: Elem> Tensor<E> {
    fn matmul_general(&self, other: &Tensor<E>, ta: bool, tb: bool, alpha: E) -> Result<Tensor<E>> {
        let d = matmul_dims(self, other, ta, tb)?;
        let av = self.values();
        let bv = other.values();
        let mut out = vec![E::ZERO; d.batch * d.m * d.n];
        let (asz, bsz, osz) = (d.m * d.k, d.k * d.n, d.m * d.n);
        for i in 0..d.batch {
            let ai = if d.a_batched { i * asz } else { 0 };
            let bi = if d.b_batched { i * bsz } else { 0 };
            gemm_slices(
                ta,
                tb,
                d.m,
                d.k,
                d.n,
                alpha,
                &av[ai..ai + asz],
                &bv[bi..bi + bsz],
                E::ZERO,
                &mut out[i * osz..(i + 1) * osz],
                d.n,
            );
        }
        drop(av);
        drop(bv);
        Ok(Tensor::from_op(
            d.out_shape,
            out,
            Op::Matmul {
                a: self.clone(),
                b: other.clone(),
                ta,
                tb,
                alpha,
            },
        ))
    }

    /// Batched row-major matrix product.
    pub fn matmul(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.matmul_general(other, false, false, E::ONE)
    }

    /// a x b^T, with b transposed on read rather than materialized.
    pub fn matmul_nt(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.matmul_general(other, false, true, E::ONE)
    }

    /// alpha * (a x b^T); the scale folds into the gemm.
    pub fn matmul_nt_scaled(&self, other: &Tensor<E>, alpha: E) -> Result<Tensor<E>> {
        self.matmul_general(other, false, true, alpha)
    }

    // ── elementwise with trailing-rule broadcast ────────────────────

    fn binary(
        &self,
        other: &Tensor<E>,
        which: fn(Tensor<E>, Tensor<E>) -> Op<E>,
        f: impl Fn(E, E) -> E + Copy,
    ) -> Result<Tensor<E>> {
        let out_shape = broadcast_shapes(self.shape(), other.shape())?;
        let out = zip_broadcast(
            &self.values(),
            self.shape(),
            &other.values(),
            other.shape(),
            &out_shape,
            f,
        );
        Ok(Tensor::from_op(
            out_shape,
            out,
            which(self.clone(), other.clone()),
        ))
    }

    pub fn add(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.binary(other, |a, b| Op::Add { a, b }, |x, y| x + y)
    }

    pub fn sub(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.binary(other, |a, b| Op::Sub { a, b }, |x, y| x - y)
    }

    pub fn mul(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.binary(other, |a, b| Op::Mul { a, b }, |x, y| x * y)
    }

    /// Guarded division: the denominator is offset by `DIV_GUARD` so a
    /// vanishing divisor yields a large finite quotient, never Inf/NaN.
    pub fn div(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        let guard = E::from_f64(DIV_GUARD);
        self.binary(other, |a, b| Op::Div { a, b }, move |x, y| x / (y + guard))
    }

    pub fn mul_scalar(&self, s: E) -> Tensor<E> {
        let out: Vec<E> = self.values().iter().map(|&x| x * s).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            Op::MulScalar { a: self.clone(), s },
        )
    }

    pub fn relu(&self) -> Tensor<E> {
        let out: Vec<E> = self
            .values()
            .iter()
            .map(|&x| if x > E::ZERO { x } else { E::ZERO })
            .collect();
        Tensor::from_op(self.shape().to_vec(), out, Op::Relu { a: self.clone() })
    }

    // ── axis ops ────────────────────────────────────────────────────

    /// Numerically stable softmax along `axis` (max subtraction).
    pub fn softmax(&self, axis: usize) -> Result<Tensor<E>> {
        check_axis(self.shape(), axis)?;
        let v = self.values();
        let mut out = vec![E::ZERO; v.len()];
        for_each_lane(self.shape(), axis, |base, stride, len| {
            let mut max = v[base];
            for j in 1..len {
                max = max.maximum(v[base + j * stride]);
            }
            let mut sum = E::ZERO;
            for j in 0..len {
                let e = (v[base + j * stride] - max).exp();
                out[base + j * stride] = e;
                sum += e;
            }
            for j in 0..len {
                out[base + j * stride] = out[base + j * stride] / sum;
            }
        });
        drop(v);
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            Op::Softmax {
                a: self.clone(),
                axis,
            },
        ))
    }

    /// Inclusive prefix sum along `axis`. Rows of the trailing extents
    /// are accumulated into a running vector so memory is walked
    /// sequentially; the per-lane summation order is unchanged.
    pub fn cumsum(&self, axis: usize) -> Result<Tensor<E>> {
        check_axis(self.shape(), axis)?;
        let v = self.values();
        let (outer, len, inner) = axis_split(self.shape(), axis);
        let mut out = vec![E::ZERO; v.len()];
        let mut acc = vec![E::ZERO; inner];
        for o in 0..outer {
            let base = o * len * inner;
            acc.copy_from_slice(&v[base..base + inner]);
            out[base..base + inner].copy_from_slice(&acc);
            for j in 1..len {
                let row = base + j * inner;
                for i in 0..inner {
                    acc[i] += v[row + i];
                }
                out[row..row + inner].copy_from_slice(&acc);
            }
        }
        drop(v);
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            Op::Cumsum {
                a: self.clone(),
                axis,
            },
        ))
    }

    /// Sum along `axis`, keeping it as an extent-1 dimension.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor<E>> {
        check_axis(self.shape(), axis)?;
        let v = self.values();
        let mut out_shape = self.shape().to_vec();
        out_shape[axis] = 1;
        let (outer, len, inner) = axis_split(self.shape(), axis);
        let mut out = vec![E::ZERO; outer * inner];
        for o in 0..outer {
            for j in 0..len {
                let src = (o * len + j) * inner;
                let dst = o * inner;
                for i in 0..inner {
                    out[dst + i] += v[src + i];
                }
            }
        }
        drop(v);
        Ok(Tensor::from_op(
            out_shape,
            out,
            Op::SumAxis {
                a: self.clone(),
                axis,
            },
        ))
    }

    pub fn sum_all(&self) -> Tensor<E> {
        let mut acc = E::ZERO;
        for &x in self.values().iter() {
            acc += x;
        }
        Tensor::from_op(vec![], vec![acc], Op::SumAll { a: self.clone() })
    }

    pub fn mean_all(&self) -> Tensor<E> {
        let n = self.numel().max(1);
        let mut acc = E::ZERO;
        for &x in self.values().iter() {
            acc += x;
        }
        let mean = acc / E::from_f64(n as f64);
        Tensor::from_op(vec![], vec![mean], Op::MeanAll { a: self.clone() })
    }

    /// Copy out the half-open range [start, start+len) along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<E>> {
        check_axis(self.shape(), axis)?;
        let extent = self.shape()[axis];
        if start + len > extent || len == 0 {
            return Err(Error::dim(format!(
                "slice {}..{} out of range for axis {} of {}",
                start,
                start + len,
                axis,
                fmt_shape(self.shape())
            )));
        }
        let (outer, full, inner) = axis_split(self.shape(), axis);
        let v = self.values();
        let mut out = vec![E::ZERO; outer * len * inner];
        for o in 0..outer {
            let src = (o * full + start) * inner;
            let dst = o * len * inner;
            out[dst..dst + len * inner].copy_from_slice(&v[src..src + len * inner]);
        }
        drop(v);
        let mut out_shape = self.shape().to_vec();
        out_shape[axis] = len;
        Ok(Tensor::from_op(
            out_shape,
            out,
            Op::Slice {
                a: self.clone(),
                axis,
                start,
                len,
            },
        ))
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<E>> {
        if numel(new_shape) != self.numel() {
            return Err(Error::dim(format!(
                "cannot reshape {} into {}",
                fmt_shape(self.shape()),
                fmt_shape(new_shape)
            )));
        }
        Ok(Tensor::from_op(
            new_shape.to_vec(),
            self.to_vec(),
            Op::Reshape { a: self.clone() },
        ))
    }

    // ── model-level fused ops ───────────────────────────────────────

    /// Row lookup: `self` is a [vocab, width] table, output [rows, cols, width].
    pub fn embed(&self, tokens: &TokenBatch) -> Result<Tensor<E>> {
        if self.shape().len() != 2 {
            return Err(Error::dim(format!(
                "embedding table must be rank 2, got {}",
                fmt_shape(self.shape())
            )));
        }
        let (vocab, width) = (self.shape()[0], self.shape()[1]);
        let v = self.values();
        let mut out = vec![E::ZERO; tokens.ids.len() * width];
        for (i, &id) in tokens.ids.iter().enumerate() {
            let id = id as usize;
            if id >= vocab {
                return Err(Error::data(format!(
                    "token id {} out of range for vocabulary of {}",
                    id, vocab
                )));
            }
            out[i * width..(i + 1) * width].copy_from_slice(&v[id * width..(id + 1) * width]);
        }
        drop(v);
        Ok(Tensor::from_op(
            vec![tokens.rows, tokens.cols, width],
            out,
            Op::Embedding {
                table: self.clone(),
                ids: Rc::new(tokens.ids.clone()),
            },
        ))
    }

    /// Causal 1-D convolution over the time axis of `self` [b, t, d_in]
    /// with `filter` [k, d_in, d_out] and `bias` [d_out]. Left-padded by
    /// k-1 implicitly: output position i reads inputs i-k+1..=i only.
    pub fn causal_conv1d(&self, filter: &Tensor<E>, bias: &Tensor<E>) -> Result<Tensor<E>> {
        let xs = self.shape();
        let fs = filter.shape();
        if xs.len() != 3 || fs.len() != 3 || bias.shape().len() != 1 {
            return Err(Error::dim(format!(
                "causal_conv1d expects x[b,t,din], filter[k,din,dout], bias[dout]; got {}, {}, {}",
                fmt_shape(xs),
                fmt_shape(fs),
                fmt_shape(bias.shape())
            )));
        }
        let (b, t, din) = (xs[0], xs[1], xs[2]);
        let (kw, fdin, dout) = (fs[0], fs[1], fs[2]);
        if fdin != din || bias.shape()[0] != dout {
            return Err(Error::dim(format!(
                "causal_conv1d width mismatch: x {}, filter {}, bias {}",
                fmt_shape(xs),
                fmt_shape(fs),
                fmt_shape(bias.shape())
            )));
        }
        let xv = self.values();
        let fv = filter.values();
        let bv = bias.values();
        let mut out = vec![E::ZERO; b * t * dout];
        for row in out.chunks_exact_mut(dout) {
            row.copy_from_slice(&bv);
        }
        for bi in 0..b {
            for lag in 0..kw.min(t) {
                let rows = t - lag;
                // out[bi, lag.., :] += x[bi, ..rows, :] x filter[lag]
                gemm_slices(
                    false,
                    false,
                    rows,
                    din,
                    dout,
                    E::ONE,
                    &xv[bi * t * din..bi * t * din + rows * din],
                    &fv[lag * din * dout..(lag + 1) * din * dout],
                    E::ONE,
                    &mut out[(bi * t + lag) * dout..(bi * t + t) * dout],
                    dout,
                );
            }
        }
        drop(xv);
        drop(fv);
        drop(bv);
        Ok(Tensor::from_op(
            vec![b, t, dout],
            out,
            Op::CausalConv1d {
                x: self.clone(),
                filter: filter.clone(),
                bias: bias.clone(),
            },
        ))
    }

    /// Layer normalization over the last axis with learned gain and bias.
    pub fn layer_norm(&self, gain: &Tensor<E>, bias: &Tensor<E>, eps: E) -> Result<Tensor<E>> {
        let d = *self
            .shape()
            .last()
            .ok_or_else(|| Error::dim("layer_norm on rank-0 tensor".to_string()))?;
        if gain.shape() != [d] || bias.shape() != [d] {
            return Err(Error::dim(format!(
                "layer_norm gain/bias must be [{}], got {} and {}",
                d,
                fmt_shape(gain.shape()),
                fmt_shape(bias.shape())
            )));
        }
        let v = self.values();
        let gv = gain.values();
        let bv = bias.values();
        let mut out = vec![E::ZERO; v.len()];
        let inv_d = E::ONE / E::from_f64(d as f64);
        for (row, orow) in v.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            let mut mean = E::ZERO;
            for &x in row {
                mean += x;
            }
            mean = mean * inv_d;
            let mut var = E::ZERO;
            for &x in row {
                let c = x - mean;
                var += c * c;
            }
            var = var * inv_d;
            let rstd = E::ONE / (var + eps).sqrt();
            for j in 0..d {
                orow[j] = (row[j] - mean) * rstd * gv[j] + bv[j];
            }
        }
        drop(v);
        drop(gv);
        drop(bv);
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            Op::LayerNorm {
                x: self.clone(),
                gain: gain.clone(),
                bias: bias.clone(),
                eps,
            },
        ))
    }

    /// Mean cross-entropy in nats between rows of logits (last axis) and
    /// integer targets. Log-sum-exp is max-stabilized.
    pub fn cross_entropy_mean(&self, targets: &TokenBatch) -> Result<Tensor<E>> {
        let sh = self.shape();
        if sh.len() < 2 {
            return Err(Error::dim(format!(
                "cross_entropy_mean needs logits of rank >= 2, got {}",
                fmt_shape(sh)
            )));
        }
        let v = sh[sh.len() - 1];
        let rows = numel(sh) / v;
        if targets.ids.len() != rows {
            return Err(Error::dim(format!(
                "cross_entropy_mean: {} target ids for {} logit rows",
                targets.ids.len(),
                rows
            )));
        }
        let lv = self.values();
        let mut acc = E::ZERO;
        for (r, row) in lv.chunks_exact(v).enumerate() {
            let t = targets.ids[r] as usize;
            if t >= v {
                return Err(Error::data(format!(
                    "target id {} out of range for vocabulary of {}",
                    t, v
                )));
            }
            let mut max = row[0];
            for &x in &row[1..] {
                max = max.maximum(x);
            }
            let mut sum = E::ZERO;
            for &x in row {
                sum += (x - max).exp();
            }
            acc += sum.ln() + max - row[t];
        }
        let loss = acc / E::from_f64(rows as f64);
        drop(lv);
        Ok(Tensor::from_op(
            vec![],
            vec![loss],
            Op::CrossEntropy {
                logits: self.clone(),
                targets: Rc::new(targets.ids.clone()),
            },
        ))
    }
}

/// Contiguous concatenation along `axis`.
pub fn concat<E: Elem>(parts: &[Tensor<E>], axis: usize) -> Result<Tensor<E>> {
    if parts.is_empty() {
        return Err(Error::contract("concat of zero tensors".to_string()));
    }
    let first = parts[0].shape();
    check_axis(first, axis)?;
    let mut total = 0usize;
    for p in parts {
        let sh = p.shape();
        if sh.len() != first.len()
            || sh
                .iter()
                .enumerate()
                .any(|(i, &d)| i != axis && d != first[i])
        {
            return Err(Error::dim(format!(
                "concat shapes incompatible: {} vs {}",
                fmt_shape(first),
                fmt_shape(sh)
            )));
        }
        total += sh[axis];
    }
    let mut out_shape = first.to_vec();
    out_shape[axis] = total;
    let (outer, _, inner) = axis_split(&out_shape, axis);
    let mut out = vec![E::ZERO; numel(&out_shape)];
    let mut offset = 0usize;
    for p in parts {
        let len = p.shape()[axis];
        let v = p.values();
        for o in 0..outer {
            let src = o * len * inner;
            let dst = (o * total + offset) * inner;
            out[dst..dst + len * inner].copy_from_slice(&v[src..src + len * inner]);
        }
        offset += len;
    }
    Ok(Tensor::from_op(
        out_shape,
        out,
        Op::Concat {
            parts: parts.to_vec(),
            axis,
        },
    ))
}

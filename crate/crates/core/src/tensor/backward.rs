//! Reverse-mode sweep: walk recorded ops once in descending creation
//! order, pushing adjoints to their inputs.
//!
//! Creation ids grow monotonically and every consumer of a node is
//! created after it, so processing the pending set by maximum id
//! guarantees each node's adjoint is complete before it is expanded and
//! that every operation is visited exactly once.

use std::collections::BTreeMap;

use super::gemm::gemm_slices;
use super::ops::{for_each_lane, matmul_dims, reduce_broadcast, zip_broadcast};
use super::shape::{axis_split, fmt_shape, numel};
use super::{Elem, Op, Tensor, DIV_GUARD};
use crate::error::{Error, Result};

impl<E: Elem> Tensor<E> {
    /// Populate gradients of every `requires_grad` leaf reachable from
    /// this scalar. Leaves the graph intact; leaf grads accumulate.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {}",
                fmt_shape(self.shape())
            )));
        }
        let mut pending: BTreeMap<u64, (Tensor<E>, Vec<E>)> = BTreeMap::new();
        pending.insert(self.id(), (self.clone(), vec![E::ONE]));
        while let Some((&id, _)) = pending.last_key_value() {
            let (node, grad) = pending.remove(&id).unwrap();
            if node.is_leaf() {
                if node.requires_grad() {
                    node.accumulate_grad(&grad);
                }
                continue;
            }
            step(&node, &grad, &mut pending)?;
        }
        Ok(())
    }
}

fn push<E: Elem>(pending: &mut BTreeMap<u64, (Tensor<E>, Vec<E>)>, t: &Tensor<E>, g: Vec<E>) {
    if !t.requires_grad() {
        return;
    }
    match pending.entry(t.id()) {
        std::collections::btree_map::Entry::Occupied(mut e) => {
            let buf = &mut e.get_mut().1;
            for (dst, src) in buf.iter_mut().zip(&g) {
                *dst += *src;
            }
        }
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert((t.clone(), g));
        }
    }
}

fn step<E: Elem>(
    node: &Tensor<E>,
    g: &[E],
    pending: &mut BTreeMap<u64, (Tensor<E>, Vec<E>)>,
) -> Result<()> {
    match node.op() {
        Op::Leaf => unreachable!("leaves are handled by the walk"),
        Op::Matmul {
            a,
            b,
            ta,
            tb,
            alpha,
        } => {
            let d = matmul_dims(a, b, *ta, *tb)?;
            let (asz, bsz, osz) = (d.m * d.k, d.k * d.n, d.m * d.n);
            let av = a.values();
            let bv = b.values();
            if a.requires_grad() {
                let stored = numel(a.shape());
                let mut da = vec![E::ZERO; stored];
                for i in 0..d.batch {
                    let gi = &g[i * osz..(i + 1) * osz];
                    let bi = if d.b_batched { i * bsz } else { 0 };
                    let bs = &bv[bi..bi + bsz];
                    let ai = if d.a_batched { i * asz } else { 0 };
                    let dst = &mut da[ai..ai + asz];
                    if !*ta {
                        // dA[m,k] = alpha * g[m,n] x B'^T[n,k]
                        gemm_slices(false, !*tb, d.m, d.n, d.k, *alpha, gi, bs, E::ONE, dst, d.k);
                    } else {
                        // stored a is [k,m]: d = alpha * B'[k,n] x g^T[n,m]
                        gemm_slices(*tb, true, d.k, d.n, d.m, *alpha, bs, gi, E::ONE, dst, d.m);
                    }
                }
                push(pending, a, da);
            }
            if b.requires_grad() {
                let stored = numel(b.shape());
                let mut db = vec![E::ZERO; stored];
                for i in 0..d.batch {
                    let gi = &g[i * osz..(i + 1) * osz];
                    let ai = if d.a_batched { i * asz } else { 0 };
                    let as_ = &av[ai..ai + asz];
                    let bi = if d.b_batched { i * bsz } else { 0 };
                    let dst = &mut db[bi..bi + bsz];
                    if !*tb {
                        // dB[k,n] = alpha * A'^T[k,m] x g[m,n]
                        gemm_slices(
                            !*ta,
                            false,
                            d.k,
                            d.m,
                            d.n,
                            *alpha,
                            as_,
                            gi,
                            E::ONE,
                            dst,
                            d.n,
                        );
                    } else {
                        // stored b is [n,k]: d = alpha * g^T[n,m] x A'[m,k]
                        gemm_slices(true, *ta, d.n, d.m, d.k, *alpha, gi, as_, E::ONE, dst, d.k);
                    }
                }
                push(pending, b, db);
            }
        }
        Op::Add { a, b } => {
            let out_shape = node.shape();
            if a.requires_grad() {
                push(pending, a, reduce_broadcast(g, out_shape, a.shape()));
            }
            if b.requires_grad() {
                push(pending, b, reduce_broadcast(g, out_shape, b.shape()));
            }
        }
        Op::Sub { a, b } => {
            let out_shape = node.shape();
            if a.requires_grad() {
                push(pending, a, reduce_broadcast(g, out_shape, a.shape()));
            }
            if b.requires_grad() {
                let mut db = reduce_broadcast(g, out_shape, b.shape());
                for x in db.iter_mut() {
                    *x = -*x;
                }
                push(pending, b, db);
            }
        }
        Op::Mul { a, b } => {
            let out_shape = node.shape();
            if a.requires_grad() {
                let gb = zip_broadcast(g, out_shape, &b.values(), b.shape(), out_shape, |x, y| {
                    x * y
                });
                push(pending, a, reduce_broadcast(&gb, out_shape, a.shape()));
            }
            if b.requires_grad() {
                let ga = zip_broadcast(g, out_shape, &a.values(), a.shape(), out_shape, |x, y| {
                    x * y
                });
                push(pending, b, reduce_broadcast(&ga, out_shape, b.shape()));
            }
        }
        Op::Div { a, b } => {
            let out_shape = node.shape();
            let guard = E::from_f64(DIV_GUARD);
            if a.requires_grad() {
                let da = zip_broadcast(
                    g,
                    out_shape,
                    &b.values(),
                    b.shape(),
                    out_shape,
                    move |x, y| x / (y + guard),
                );
                push(pending, a, reduce_broadcast(&da, out_shape, a.shape()));
            }
            if b.requires_grad() {
                // d/db [a / (b+eps)] = -a / (b+eps)^2
                let ratio = zip_broadcast(
                    &a.values(),
                    a.shape(),
                    &b.values(),
                    b.shape(),
                    out_shape,
                    move |x, y| {
                        let den = y + guard;
                        -x / (den * den)
                    },
                );
                let db = zip_broadcast(g, out_shape, &ratio, out_shape, out_shape, |x, y| x * y);
                push(pending, b, reduce_broadcast(&db, out_shape, b.shape()));
            }
        }
        Op::MulScalar { a, s } => {
            if a.requires_grad() {
                let s = *s;
                push(pending, a, g.iter().map(|&x| x * s).collect());
            }
        }
        Op::Relu { a } => {
            if a.requires_grad() {
                let av = a.values();
                let da = g
                    .iter()
                    .zip(av.iter())
                    .map(|(&gi, &xi)| if xi > E::ZERO { gi } else { E::ZERO })
                    .collect();
                drop(av);
                push(pending, a, da);
            }
        }
        Op::Softmax { a, axis } => {
            if a.requires_grad() {
                let y = node.values();
                let mut da = vec![E::ZERO; y.len()];
                for_each_lane(node.shape(), *axis, |base, stride, len| {
                    let mut dot = E::ZERO;
                    for j in 0..len {
                        let idx = base + j * stride;
                        dot += g[idx] * y[idx];
                    }
                    for j in 0..len {
                        let idx = base + j * stride;
                        da[idx] = y[idx] * (g[idx] - dot);
                    }
                });
                drop(y);
                push(pending, a, da);
            }
        }
        Op::Cumsum { a, axis } => {
            if a.requires_grad() {
                // adjoint of an inclusive prefix sum is the inclusive
                // suffix sum, accumulated row-wise for sequential access
                let (outer, len, inner) = axis_split(a.shape(), *axis);
                let mut da = vec![E::ZERO; g.len()];
                let mut acc = vec![E::ZERO; inner];
                for o in 0..outer {
                    let base = o * len * inner;
                    let last = base + (len - 1) * inner;
                    acc.copy_from_slice(&g[last..last + inner]);
                    da[last..last + inner].copy_from_slice(&acc);
                    for j in (0..len.saturating_sub(1)).rev() {
                        let row = base + j * inner;
                        for i in 0..inner {
                            acc[i] += g[row + i];
                        }
                        da[row..row + inner].copy_from_slice(&acc);
                    }
                }
                push(pending, a, da);
            }
        }
        Op::SumAxis { a, axis } => {
            if a.requires_grad() {
                let (outer, len, inner) = axis_split(a.shape(), *axis);
                let mut da = vec![E::ZERO; outer * len * inner];
                for o in 0..outer {
                    for j in 0..len {
                        let dst = (o * len + j) * inner;
                        let src = o * inner;
                        da[dst..dst + inner].copy_from_slice(&g[src..src + inner]);
                    }
                }
                push(pending, a, da);
            }
        }
        Op::SumAll { a } => {
            if a.requires_grad() {
                push(pending, a, vec![g[0]; a.numel()]);
            }
        }
        Op::MeanAll { a } => {
            if a.requires_grad() {
                let scale = g[0] / E::from_f64(a.numel().max(1) as f64);
                push(pending, a, vec![scale; a.numel()]);
            }
        }
        Op::Concat { parts, axis } => {
            let total = node.shape()[*axis];
            let (outer, _, inner) = axis_split(node.shape(), *axis);
            let mut offset = 0usize;
            for p in parts {
                let len = p.shape()[*axis];
                if p.requires_grad() {
                    let mut dp = vec![E::ZERO; outer * len * inner];
                    for o in 0..outer {
                        let src = (o * total + offset) * inner;
                        let dst = o * len * inner;
                        dp[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
                    }
                    push(pending, p, dp);
                }
                offset += len;
            }
        }
        Op::Slice {
            a,
            axis,
            start,
            len,
        } => {
            if a.requires_grad() {
                let (outer, full, inner) = axis_split(a.shape(), *axis);
                let mut da = vec![E::ZERO; outer * full * inner];
                for o in 0..outer {
                    let dst = (o * full + start) * inner;
                    let src = o * len * inner;
                    da[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
                }
                push(pending, a, da);
            }
        }
        Op::Reshape { a } => {
            if a.requires_grad() {
                push(pending, a, g.to_vec());
            }
        }
        Op::Embedding { table, ids } => {
            if table.requires_grad() {
                let width = table.shape()[1];
                let mut dt = vec![E::ZERO; table.numel()];
                for (i, &id) in ids.iter().enumerate() {
                    let dst = id as usize * width;
                    let src = i * width;
                    for j in 0..width {
                        dt[dst + j] += g[src + j];
                    }
                }
                push(pending, table, dt);
            }
        }
        Op::CausalConv1d { x, filter, bias } => {
            let xs = x.shape();
            let fs = filter.shape();
            let (b, t, din) = (xs[0], xs[1], xs[2]);
            let (kw, dout) = (fs[0], fs[2]);
            let xv = x.values();
            let fv = filter.values();
            if x.requires_grad() {
                let mut dx = vec![E::ZERO; x.numel()];
                for bi in 0..b {
                    for lag in 0..kw.min(t) {
                        let rows = t - lag;
                        // dx[bi, ..rows, :] += g[bi, lag.., :] x filter[lag]^T
                        gemm_slices(
                            false,
                            true,
                            rows,
                            dout,
                            din,
                            E::ONE,
                            &g[(bi * t + lag) * dout..(bi * t + t) * dout],
                            &fv[lag * din * dout..(lag + 1) * din * dout],
                            E::ONE,
                            &mut dx[bi * t * din..bi * t * din + rows * din],
                            din,
                        );
                    }
                }
                push(pending, x, dx);
            }
            if filter.requires_grad() {
                let mut df = vec![E::ZERO; filter.numel()];
                for bi in 0..b {
                    for lag in 0..kw.min(t) {
                        let rows = t - lag;
                        // dfilter[lag] += x[bi, ..rows, :]^T x g[bi, lag.., :]
                        gemm_slices(
                            true,
                            false,
                            din,
                            rows,
                            dout,
                            E::ONE,
                            &xv[bi * t * din..bi * t * din + rows * din],
                            &g[(bi * t + lag) * dout..(bi * t + t) * dout],
                            E::ONE,
                            &mut df[lag * din * dout..(lag + 1) * din * dout],
                            dout,
                        );
                    }
                }
                push(pending, filter, df);
            }
            if bias.requires_grad() {
                let mut db = vec![E::ZERO; dout];
                for row in g.chunks_exact(dout) {
                    for (d, &gi) in db.iter_mut().zip(row) {
                        *d += gi;
                    }
                }
                push(pending, bias, db);
            }
        }
        Op::LayerNorm { x, gain, bias, eps } => {
            let d = *x.shape().last().unwrap();
            let inv_d = E::ONE / E::from_f64(d as f64);
            let xv = x.values();
            let gv = gain.values();
            let rows = xv.len() / d;
            let mut dx = vec![E::ZERO; xv.len()];
            let mut dgain = vec![E::ZERO; d];
            let mut dbias = vec![E::ZERO; d];
            let two = E::from_f64(2.0);
            let half = E::from_f64(0.5);
            for r in 0..rows {
                let row = &xv[r * d..(r + 1) * d];
                let grow = &g[r * d..(r + 1) * d];
                let mut mean = E::ZERO;
                for &v in row {
                    mean += v;
                }
                mean = mean * inv_d;
                let mut var = E::ZERO;
                for &v in row {
                    let c = v - mean;
                    var += c * c;
                }
                var = var * inv_d;
                let rstd = E::ONE / (var + *eps).sqrt();
                // dxhat_j = g_j * gain_j; accumulate the three terms of dx
                let mut sum_dxhat = E::ZERO;
                let mut sum_dxhat_c = E::ZERO;
                let mut sum_c = E::ZERO;
                for j in 0..d {
                    let c = row[j] - mean;
                    let dxh = grow[j] * gv[j];
                    sum_dxhat += dxh;
                    sum_dxhat_c += dxh * c;
                    sum_c += c;
                    dgain[j] += grow[j] * c * rstd;
                    dbias[j] += grow[j];
                }
                let dvar = sum_dxhat_c * (-half) * rstd * rstd * rstd;
                let dmean = -rstd * sum_dxhat + dvar * (-two) * inv_d * sum_c;
                for j in 0..d {
                    let c = row[j] - mean;
                    dx[r * d + j] = grow[j] * gv[j] * rstd + dvar * two * c * inv_d + dmean * inv_d;
                }
            }
            drop(xv);
            drop(gv);
            if x.requires_grad() {
                push(pending, x, dx);
            }
            if gain.requires_grad() {
                push(pending, gain, dgain);
            }
            if bias.requires_grad() {
                push(pending, bias, dbias);
            }
        }
        Op::CrossEntropy { logits, targets } => {
            if logits.requires_grad() {
                let sh = logits.shape();
                let v = sh[sh.len() - 1];
                let lv = logits.values();
                let rows = lv.len() / v;
                let scale = g[0] / E::from_f64(rows as f64);
                let mut dl = vec![E::ZERO; lv.len()];
                for (r, row) in lv.chunks_exact(v).enumerate() {
                    let t = targets[r] as usize;
                    let mut max = row[0];
                    for &x in &row[1..] {
                        max = max.maximum(x);
                    }
                    let mut sum = E::ZERO;
                    for &x in row {
                        sum += (x - max).exp();
                    }
                    let drow = &mut dl[r * v..(r + 1) * v];
                    for j in 0..v {
                        let p = (row[j] - max).exp() / sum;
                        drow[j] = scale * (p - if j == t { E::ONE } else { E::ZERO });
                    }
                }
                drop(lv);
                push(pending, logits, dl);
            }
        }
    }
    Ok(())
}

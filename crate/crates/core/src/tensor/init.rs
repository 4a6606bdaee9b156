//! Seeded weight initializers.

use rand::Rng;

use super::{Elem, Tensor};
use crate::error::Result;

/// Uniform on (-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<E: Elem, R: Rng>(
    rng: &mut R,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Result<Tensor<E>> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, shape, -limit, limit)
}

/// Uniform on (lo, hi), drawn in f64 then cast, so the stream of draws
/// is identical across dtypes for a given seed.
pub fn uniform<E: Elem, R: Rng>(
    rng: &mut R,
    shape: &[usize],
    lo: f64,
    hi: f64,
) -> Result<Tensor<E>> {
    let n = super::shape::numel(shape);
    let values: Vec<E> = (0..n).map(|_| E::from_f64(rng.gen_range(lo..hi))).collect();
    Tensor::param(shape, values)
}

pub fn zeros_param<E: Elem>(shape: &[usize]) -> Result<Tensor<E>> {
    Tensor::param(shape, vec![E::ZERO; super::shape::numel(shape)])
}

pub fn ones_param<E: Elem>(shape: &[usize]) -> Result<Tensor<E>> {
    Tensor::param(shape, vec![E::ONE; super::shape::numel(shape)])
}

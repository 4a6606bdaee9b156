//! Central finite-difference gradient estimation, the independent check
//! against which every backward rule is validated. Run it in f64.

use super::{Elem, Tensor};
use crate::error::Result;

/// Central-difference estimate (f(x+he) - f(x-he)) / 2h per element.
/// `f` must be a deterministic map from the tensor to a scalar.
pub fn finite_diff_grad<E: Elem, F>(f: F, x: &Tensor<E>, step: E) -> Result<Vec<E>>
where
    F: Fn(&Tensor<E>) -> Result<E>,
{
    let base = x.to_vec();
    let shape = x.shape().to_vec();
    let two = E::from_f64(2.0);
    let mut grad = vec![E::ZERO; base.len()];
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] = plus[i] + step;
        let fp = f(&Tensor::new(&shape, plus)?)?;
        let mut minus = base.clone();
        minus[i] = minus[i] - step;
        let fm = f(&Tensor::new(&shape, minus)?)?;
        grad[i] = (fp - fm) / (two * step);
    }
    Ok(grad)
}

/// Largest elementwise relative error between two gradient buffers.
/// Entries where both magnitudes are below `floor` count as equal.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient buffers must align");
    let mut worst = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let scale = x.abs().max(y.abs());
        if scale < floor {
            continue;
        }
        worst = worst.max((x - y).abs() / scale);
    }
    worst
}

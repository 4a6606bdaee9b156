//! Thin safe wrapper over the matrixmultiply kernels.
//!
//! All matrix products in the crate funnel through `gemm_slices`, so the
//! single-threaded property of the timed benchmark paths is decided here:
//! matrixmultiply runs on the calling thread (its threading feature is off).

use super::Elem;

/// C[m,n] = alpha * A' * B' + beta * C, where A' is `a` read as an
/// m-by-k matrix (transposed from its row-major storage when `ta`),
/// and B' likewise k-by-n (transposed when `tb`). `c` rows are spaced
/// `rsc` elements apart (columns contiguous).
#[allow(clippy::too_many_arguments)]
pub fn gemm_slices<E: Elem>(
    ta: bool,
    tb: bool,
    m: usize,
    k: usize,
    n: usize,
    alpha: E,
    a: &[E],
    b: &[E],
    beta: E,
    c: &mut [E],
    rsc: usize,
) {
    assert!(a.len() >= m * k, "gemm: lhs buffer too small");
    assert!(b.len() >= k * n, "gemm: rhs buffer too small");
    assert!(
        m == 0 || c.len() >= (m - 1) * rsc + n,
        "gemm: out buffer too small"
    );
    if m == 0 || n == 0 {
        return;
    }
    // Row-major [r, c] storage: row stride c, col stride 1. A transposed
    // read swaps the roles.
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        E::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_product() {
        // [[1,2],[3,4]] x [[5,6],[7,8]] = [[19,22],[43,50]]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut c = [0.0f64; 4];
        gemm_slices(false, false, 2, 2, 2, 1.0, &a, &b, 0.0, &mut c, 2);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transposed_reads() {
        // aT: a stored [k=2, m=2] -> logical [[1,3],[2,4]]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [1.0f64, 0.0, 0.0, 1.0];
        let mut c = [0.0f64; 4];
        gemm_slices(true, false, 2, 2, 2, 1.0, &a, &b, 0.0, &mut c, 2);
        assert_eq!(c, [1.0, 3.0, 2.0, 4.0]);

        // bT: b stored [n=2, k=2] -> logical b^T
        let mut c2 = [0.0f64; 4];
        gemm_slices(false, true, 2, 2, 2, 1.0, &b, &a, 0.0, &mut c2, 2);
        assert_eq!(c2, [1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn beta_accumulates() {
        // [1;1] (2x1) x [2,3] (1x2) = [[2,3],[2,3]], added onto c
        let a = [1.0f32, 1.0];
        let b = [2.0f32, 3.0];
        let mut c = [10.0f32; 4];
        gemm_slices(false, false, 2, 1, 2, 1.0, &a, &b, 1.0, &mut c, 2);
        assert_eq!(c, [12.0, 13.0, 12.0, 13.0]);
    }
}

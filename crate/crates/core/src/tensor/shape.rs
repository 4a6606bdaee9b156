//! Shape arithmetic: extents, axis decomposition, broadcasting.

use crate::error::{Error, Result};

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub fn fmt_shape(shape: &[usize]) -> String {
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    format!("[{}]", dims.join("x"))
}

pub fn check_axis(shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::dim(format!(
            "axis {} out of range for shape {}",
            axis,
            fmt_shape(shape)
        )));
    }
    Ok(())
}

/// Decompose a shape around `axis` into (outer, len, inner) extents.
/// Flat index of element (o, j, i) is (o * len + j) * inner + i.
pub fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, len, inner)
}

/// Result shape of broadcasting `a` against `b` by the trailing-dimension
/// rule: shapes are right-aligned, each pair of extents must be equal or
/// one of them 1; missing leading extents count as 1.
pub fn broadcast_shapes(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() {
            1
        } else {
            a[i - (rank - a.len())]
        };
        let db = if i < rank - b.len() {
            1
        } else {
            b[i - (rank - b.len())]
        };
        if da == db || da == 1 || db == 1 {
            out[i] = da.max(db);
        } else {
            return Err(Error::dim(format!(
                "shapes {} and {} are not broadcastable",
                fmt_shape(a),
                fmt_shape(b)
            )));
        }
    }
    Ok(out)
}

/// Row-major strides of `shape`, right-aligned into an `out`-rank index
/// space, with stride 0 on broadcast (extent-1 or missing) dimensions.
pub fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let offset = rank - shape.len();
    let mut contiguous = vec![0usize; shape.len()];
    let mut acc = 1usize;
    for i in (0..shape.len()).rev() {
        contiguous[i] = acc;
        acc *= shape[i];
    }
    let mut strides = vec![0usize; rank];
    for i in 0..rank {
        if i >= offset && shape[i - offset] != 1 {
            strides[i] = contiguous[i - offset];
        }
    }
    strides
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_trailing_vector() {
        assert_eq!(broadcast_shapes(&[2, 3, 4], &[4]).unwrap(), vec![2, 3, 4]);
        assert_eq!(
            broadcast_shapes(&[2, 3, 1], &[2, 3, 5]).unwrap(),
            vec![2, 3, 5]
        );
        assert_eq!(
            broadcast_shapes(&[2, 1, 3], &[2, 7, 1]).unwrap(),
            vec![2, 7, 3]
        );
        assert!(broadcast_shapes(&[2, 3], &[4, 3]).is_err());
    }

    #[test]
    fn axis_split_extents() {
        assert_eq!(axis_split(&[2, 3, 4], 1), (2, 3, 4));
        assert_eq!(axis_split(&[5], 0), (1, 5, 1));
        assert_eq!(axis_split(&[2, 3, 4], 2), (6, 4, 1));
    }

    #[test]
    fn strides_zero_on_broadcast_dims() {
        assert_eq!(broadcast_strides(&[4], &[2, 3, 4]), vec![0, 0, 1]);
        assert_eq!(broadcast_strides(&[3, 1], &[2, 3, 4]), vec![0, 1, 0]);
        assert_eq!(broadcast_strides(&[2, 3, 4], &[2, 3, 4]), vec![12, 4, 1]);
    }
}

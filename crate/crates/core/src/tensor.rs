//! The dense value type shared by every oracle in the crate.
//!
//! Iterates, gradients, projections, and network packets are all plain
//! multi-dimensional `f64` arrays. Keeping a single alias (rather than a
//! wrapper type) lets callers use the full `ndarray` API directly.

use ndarray::{Array1, ArrayD, IxDyn};

/// Dense multi-dimensional array of `f64` with runtime-known shape.
pub type Tensor = ArrayD<f64>;

/// Rank-1 tensor with a single entry, for scalar problems.
pub fn scalar(value: f64) -> Tensor {
    ArrayD::from_elem(IxDyn(&[1]), value)
}

/// Rank-1 tensor holding a copy of `values`.
pub fn vector(values: &[f64]) -> Tensor {
    ArrayD::from_shape_vec(IxDyn(&[values.len()]), values.to_vec())
        .expect("length always matches a rank-1 shape")
}

/// All-zeros tensor of the given shape.
pub fn zeros(dims: &[usize]) -> Tensor {
    ArrayD::zeros(IxDyn(dims))
}

/// Euclidean norm over all entries (Frobenius norm for matrices).
pub fn norm(x: &Tensor) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Inner product over all entries. Shapes must agree.
pub fn dot(a: &Tensor, b: &Tensor) -> f64 {
    debug_assert_eq!(a.shape(), b.shape(), "dot product requires equal shapes");
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Copy of `x` reshaped to `dims` in row-major element order, or `None` when
/// the element counts differ.
pub(crate) fn reshape_row_major(x: &Tensor, dims: &[usize]) -> Option<Tensor> {
    if x.len() != dims.iter().product::<usize>() {
        return None;
    }
    // `iter` walks the logical (row-major) order regardless of memory layout.
    let flat: Vec<f64> = x.iter().copied().collect();
    Some(ArrayD::from_shape_vec(IxDyn(dims), flat).expect("element count checked above"))
}

/// Row-major flattening into a rank-1 `ndarray` vector.
pub(crate) fn flatten(x: &Tensor) -> Array1<f64> {
    Array1::from_iter(x.iter().copied())
}

/// Inverse of [`flatten`]: a tensor of shape `dims` holding `v`'s entries.
pub(crate) fn from_flat(v: &Array1<f64>, dims: &[usize]) -> Tensor {
    ArrayD::from_shape_vec(IxDyn(dims), v.to_vec()).expect("caller guarantees matching length")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_is_euclidean() {
        let x = vector(&[3.0, 4.0]);
        assert_eq!(norm(&x), 5.0);
    }

    #[test]
    fn reshape_preserves_row_major_order() {
        let x = vector(&[1.0, 2.0, 3.0, 4.0]);
        let m = reshape_row_major(&x, &[2, 2]).unwrap();
        assert_eq!(m[[0, 1]], 2.0);
        assert_eq!(m[[1, 0]], 3.0);
    }

    #[test]
    fn reshape_rejects_element_count_mismatch() {
        let x = vector(&[1.0, 2.0, 3.0]);
        assert!(reshape_row_major(&x, &[2, 2]).is_none());
    }

    #[test]
    fn flatten_round_trips() {
        let x = reshape_row_major(&vector(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), &[2, 3]).unwrap();
        let flat = flatten(&x);
        assert_eq!(from_flat(&flat, &[2, 3]), x);
    }
}

//! Minimal dense linear algebra.
//!
//! Every linear system in this crate is small (problem dimensions and agent
//! counts, typically well under a hundred), so a partial-pivoting LU solve is
//! plenty and keeps the build free of BLAS/LAPACK linkage.

use ndarray::{Array1, Array2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SingularMatrix;

/// Solves the dense square system `a x = b` by Gaussian elimination with
/// partial pivoting. Consumes its inputs to eliminate a copy.
pub(crate) fn solve(mut a: Array2<f64>, mut b: Array1<f64>) -> Result<Array1<f64>, SingularMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    assert_eq!(n, b.len(), "right-hand side length must match");

    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[[row, col]].abs() > a[[pivot, col]].abs() {
                pivot = row;
            }
        }
        if a[[pivot, col]] == 0.0 {
            return Err(SingularMatrix);
        }
        if pivot != col {
            for c in col..n {
                let tmp = a[[col, c]];
                a[[col, c]] = a[[pivot, c]];
                a[[pivot, c]] = tmp;
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[[row, col]] / a[[col, col]];
            if factor != 0.0 {
                for c in col..n {
                    a[[row, c]] -= factor * a[[col, c]];
                }
                b[row] -= factor * b[col];
            }
        }
    }

    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[[i, j]] * x[j];
        }
        x[i] = s / a[[i, i]];
    }
    Ok(x)
}

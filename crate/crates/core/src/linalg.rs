//! Small dense helpers: cofactor determinants and adjugates, residual norms.
//!
//! Matrices here are at most 4x4, so Laplace expansion is both exact enough
//! and keeps every entry a polynomial in the inputs. Nothing is ever divided
//! by the determinant.

use nalgebra::{DMatrix, DVector};

fn minor(a: &DMatrix<f64>, row: usize, col: usize) -> DMatrix<f64> {
    a.clone().remove_row(row).remove_column(col)
}

/// Determinant by cofactor expansion along the first row.
pub fn determinant(a: &DMatrix<f64>) -> f64 {
    assert!(a.is_square(), "determinant of non-square matrix");
    match a.nrows() {
        0 => 1.0,
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        n => (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[(0, j)] * determinant(&minor(a, 0, j))
            })
            .sum(),
    }
}

/// Adjugate (transposed cofactor matrix), so that `A adj(A) = det(A) I`.
pub fn adjugate(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "adjugate of non-square matrix");
    let n = a.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |i, j| {
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        // entry (i, j) of the adjugate is cofactor (j, i)
        sign * determinant(&minor(a, j, i))
    })
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `max|a - b| / max(max|b|, floor)`.
pub fn rel_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    assert_eq!(a.shape(), b.shape(), "residual of mismatched shapes");
    max_abs(&(a - b)) / max_abs(b).max(floor)
}

/// Vector form of [`rel_residual`].
pub fn rel_residual_vec(a: &DVector<f64>, b: &DVector<f64>, floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "residual of mismatched lengths");
    let diff = (a - b).amax();
    diff / b.amax().max(floor)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

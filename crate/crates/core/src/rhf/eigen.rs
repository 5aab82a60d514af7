//! Dense symmetric eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
pub(crate) fn symmetric_eigen(a: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    if n == 0 {
        return Ok((DVector::zeros(0), a));
    }
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0).ok_or(Error::Eigensolver(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    Ok((values, eig.eigenvectors.select_columns(&order)))
}

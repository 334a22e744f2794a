use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Smallest eigenpair of the symmetric-definite pencil `(A, M)` by Cholesky
/// reduction to a standard symmetric problem. The eigenvector is
/// M-normalized; its sign is arbitrary.
pub fn smallest_pair_dense_matrix(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let a = (a + a.transpose()) * 0.5;
    let m = (m + m.transpose()) * 0.5;
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::NotPositiveDefinite(format!("mass matrix of dimension {n}")))?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let x = l
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let (k, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty spectrum");
    let z = eig.eigenvectors.column(k).into_owned();
    let y = l
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let mnorm = y.dot(&(&m * &y)).sqrt();
    let y = y / mnorm;

    let residual = (&a * &y - &m * &y * lambda).norm();
    let bound = 1e-10 * a.amax().max(f64::MIN_POSITIVE) * y.norm().max(1.0);
    if !(residual <= bound) {
        return Err(Error::InaccurateEigenpair { residual, bound });
    }
    Ok((lambda, y))
}

pub fn smallest_pair_dense(a: &CsrMatrix, m: &CsrMatrix) -> Result<(f64, Vec<f64>)> {
    let (lambda, y) = smallest_pair_dense_matrix(&a.to_dense(), &m.to_dense())?;
    Ok((lambda, y.as_slice().to_vec()))
}

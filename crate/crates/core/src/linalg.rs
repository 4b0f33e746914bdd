//! Small dense linear-algebra helpers shared by the solver, refit and diagnostics code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest singular value of `n^{-1/2} X_S`, via the SVD of the submatrix.
/// Returns `None` for an empty column set.
pub fn min_singular_value(x: &DMatrix<f64>, columns: &[usize]) -> Option<f64> {
    if columns.is_empty() {
        return None;
    }
    let n = x.nrows() as f64;
    let sub = x.select_columns(columns) / n.sqrt();
    smallest_singular(sub)
}

/// Smallest singular value of an arbitrary matrix; counts missing singular
/// values (more columns than rows) as zero.
pub fn smallest_singular(m: DMatrix<f64>) -> Option<f64> {
    if m.ncols() == 0 {
        return None;
    }
    if m.ncols() > m.nrows() {
        return Some(0.0);
    }
    let sv = m.singular_values();
    Some(sv.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Smallest singular value of `n^{-1/2} X_S` from the eigenvalues of the
/// Gram matrix. Cheaper than the SVD and adequate for tracking collinearity
/// along a path; loses relative accuracy for near-singular subsets.
pub fn min_singular_value_gram(x: &DMatrix<f64>, columns: &[usize]) -> Option<f64> {
    if columns.is_empty() {
        return None;
    }
    if columns.len() > x.nrows() {
        return Some(0.0);
    }
    let sub = x.select_columns(columns);
    let gram = sub.transpose() * &sub / x.nrows() as f64;
    let ev = gram.symmetric_eigenvalues();
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    Some(min.max(0.0).sqrt())
}

/// Solves `(X_S' X_S + ridge I) b = X_S' y` by Cholesky.
pub fn ridge_solve(x: &DMatrix<f64>, y: &DVector<f64>, columns: &[usize], ridge: f64) -> Result<DVector<f64>> {
    if columns.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let sub = x.select_columns(columns);
    let mut gram = sub.transpose() * &sub;
    for i in 0..columns.len() {
        gram[(i, i)] += ridge;
    }
    let rhs = sub.transpose() * y;
    let chol = gram.clone().cholesky().ok_or_else(|| {
        Error::Singular(format!(
            "normal equations on {} columns with ridge {ridge} are not positive definite",
            columns.len()
        ))
    })?;
    // Cholesky succeeds on numerically singular matrices more often than it
    // should; reject those explicitly.
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(dmin > dmax * 1e-7) {
        return Err(Error::Singular(format!(
            "normal equations on {} columns with ridge {ridge} are numerically singular",
            columns.len()
        )));
    }
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge solution".into()));
    }
    Ok(sol)
}

/// Least-squares fit on `columns`, scattered into a full-length vector.
pub fn ols_on_support(x: &DMatrix<f64>, y: &DVector<f64>, columns: &[usize]) -> Result<DVector<f64>> {
    let coef = ridge_solve(x, y, columns, 0.0)?;
    let mut beta = DVector::zeros(x.ncols());
    for (k, &j) in columns.iter().enumerate() {
        beta[j] = coef[k];
    }
    Ok(beta)
}

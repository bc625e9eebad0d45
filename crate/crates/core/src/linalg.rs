//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalue floor applied before taking square roots.
pub const EIG_FLOOR: f64 = 1e-14;

pub fn is_strictly_lower(m: &DMatrix<f64>) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (i..m.ncols()).all(|j| m[(i, j)] == 0.0))
}

/// Solves T x = b for unit lower triangular T; only entries below the diagonal are read.
pub fn solve_unit_lower(t: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut x = b.clone();
    for i in 0..n {
        let mut v = x[i];
        for j in 0..i {
            v -= t[(i, j)] * x[j];
        }
        x[i] = v;
    }
    x
}

/// Column-wise [`solve_unit_lower`].
pub fn solve_unit_lower_mat(t: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    for c in 0..b.ncols() {
        let col = solve_unit_lower(t, &b.column(c).into_owned());
        out.set_column(c, &col);
    }
    out
}

/// Symmetric square root through the eigendecomposition, eigenvalues floored at [`EIG_FLOOR`].
pub fn sym_sqrt(q: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(q.clone());
    let d = eig.eigenvalues.map(|l| l.max(EIG_FLOOR).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

pub fn min_eigenvalue(q: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(q.clone()).eigenvalues.min()
}

/// Solves Q x = b for symmetric positive definite Q.
pub fn spd_solve(q: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    match q.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => q
            .clone()
            .lu()
            .solve(b)
            .unwrap_or_else(|| DVector::from_element(b.len(), f64::NAN)),
    }
}

/// Squared Frobenius norm.
pub fn fro2(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

//! Dense Hermitian and real-symmetric eigen decompositions backed by faer.

use faer::{c64, linalg::solvers::DenseSolveCore, Mat, Side};
use num_complex::Complex64;

/// Eigenvalues (ascending) and column eigenvectors of a row-major
/// Hermitian matrix.
/// Hermitian matrices with no imaginary part (zero field) take the real
/// symmetric path, several times cheaper.
pub(crate) fn hermitian_eigh(a: &[Complex64], n: usize) -> Result<(Vec<f64>, Vec<Vec<Complex64>>), String> {
    if a.iter().all(|z| z.im == 0.0) {
        let m = Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j].re);
        let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| format!("{e:?}"))?;
        let s = eig.S().column_vector();
        let u = eig.U();
        let values = (0..n).map(|i| s[i]).collect();
        let vectors = (0..n).map(|j| (0..n).map(|i| Complex64::new(u[(i, j)], 0.0)).collect()).collect();
        return Ok((values, vectors));
    }
    let m = Mat::<c64>::from_fn(n, n, |i, j| a[i * n + j]);
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| format!("{e:?}"))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok((values, vectors))
}

#[cfg(test)]
pub(crate) fn hermitian_eigenvalues(a: &[Complex64], n: usize) -> Result<Vec<f64>, String> {
    let m = Mat::<c64>::from_fn(n, n, |i, j| a[i * n + j]);
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|e| format!("{e:?}"))
}

/// Eigen decomposition of a small Hermitian matrix given column-major;
/// returns ascending values and column-major vectors.
pub(crate) fn small_hermitian(a: &[Complex64], m: usize) -> Result<(Vec<f64>, Vec<Complex64>), String> {
    let mat = Mat::<c64>::from_fn(m, m, |i, j| 0.5 * (a[j * m + i] + a[i * m + j].conj()));
    let eig = mat.self_adjoint_eigen(Side::Lower).map_err(|e| format!("{e:?}"))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let values = (0..m).map(|i| s[i].re).collect();
    let mut vecs = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            vecs.push(u[(i, j)]);
        }
    }
    Ok((values, vecs))
}

/// Symmetric tridiagonal eigen decomposition; returns ascending values and
/// column-major vectors.
pub(crate) fn tridiagonal(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Vec<f64>), String> {
    let m = alpha.len();
    let mat = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let eig = mat.self_adjoint_eigen(Side::Lower).map_err(|e| format!("{e:?}"))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let values = (0..m).map(|i| s[i]).collect();
    let mut vecs = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            vecs.push(u[(i, j)]);
        }
    }
    Ok((values, vecs))
}

/// Row-major inverse of a row-major square matrix via partial-pivot LU.
pub(crate) fn inverse(a: &[Complex64], n: usize) -> Vec<Complex64> {
    let m = Mat::<c64>::from_fn(n, n, |i, j| a[i * n + j]);
    let inv = m.partial_piv_lu().inverse();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(inv[(i, j)]);
        }
    }
    out
}

/// Singular values (descending) of a row-major square matrix.
pub(crate) fn singular_values(a: &[Complex64], n: usize) -> Result<Vec<f64>, String> {
    let m = Mat::<c64>::from_fn(n, n, |i, j| a[i * n + j]);
    m.singular_values().map_err(|e| format!("{e:?}"))
}

//! Thin wrappers over nalgebra eigensolvers with deterministic output ordering.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

pub(crate) fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigenpairs of a real symmetric matrix, ascending. Each eigenvector is
/// signed so that its largest-magnitude component is positive.
pub fn eigh(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(to_dmatrix(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let vals = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut big = 0;
        for i in 0..n {
            if v[i].abs() > v[big].abs() + 1e-12 {
                big = i;
            }
        }
        let sign = if v[big] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vecs[[i, col]] = sign * v[i];
        }
    }
    (vals, vecs)
}

/// Eigenpairs of a complex Hermitian matrix, ascending.
pub(crate) fn eigh_complex(a: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Principal logarithm of a unitary matrix, `K` with `exp(K) = u` and `K`
/// anti-Hermitian. Uses the complex Schur form, which is diagonal for normal
/// matrices.
pub(crate) fn log_unitary(u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (q, t) = u.clone().schur().unpack();
    let n = u.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let z = t[(i, i)];
        d[(i, i)] = Complex64::new(0.0, z.arg());
    }
    let k = &q * d * q.adjoint();
    (&k - k.adjoint()) * Complex64::new(0.5, 0.0)
}

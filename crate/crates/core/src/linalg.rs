//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex;

use crate::scalar::Scalar;

/// Dense complex matrix.
pub type CMatrix<T> = DMatrix<Complex<T>>;
/// Dense complex vector.
pub type CVector<T> = DVector<Complex<T>>;

/// Real embedding `[[Re H, -Im H], [Im H, Re H]]` of a complex matrix.
///
/// For Hermitian `H` the result is real symmetric and carries every
/// eigenvalue of `H` twice.
pub fn realify<T: Scalar>(h: &CMatrix<T>) -> DMatrix<T> {
    let (r, c) = h.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Largest `|H_ij - conj(H_ji)|`.
pub fn hermitian_defect<T: Scalar>(h: &CMatrix<T>) -> T {
    let n = h.nrows().min(h.ncols());
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            let d = (h[(i, j)] - h[(j, i)].conj()).modulus();
            if d > worst {
                worst = d;
            }
        }
    }
    if h.nrows() != h.ncols() {
        return T::max_value().unwrap_or_else(T::one);
    }
    worst
}

/// `(H + H*) / 2`.
pub fn hermitian_part<T: Scalar>(h: &CMatrix<T>) -> CMatrix<T> {
    let half = T::c(0.5);
    (h + h.adjoint()).map(|z| z * half)
}

/// Largest absolute entry.
pub fn max_abs<T: Scalar>(h: &CMatrix<T>) -> T {
    h.iter().fold(T::zero(), |m, z| m.max(z.modulus()))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues<T: Scalar>(h: &CMatrix<T>) -> Vec<T> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::<Complex<T>, Dyn>::new(hermitian_part(h));
    let mut values: Vec<T> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    values
}

/// Smallest eigenvalue of a Hermitian matrix (`+inf` for an empty matrix).
pub fn hermitian_min_eigenvalue<T: Scalar>(h: &CMatrix<T>) -> T {
    hermitian_eigenvalues(h).first().copied().unwrap_or_else(|| T::max_value().unwrap_or_else(T::one))
}

/// Eigenvalues of a real symmetric matrix in ascending order.
pub fn symmetric_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let half = T::c(0.5);
    let sym = (m + m.transpose()) * half;
    let eig = SymmetricEigen::new(sym);
    let mut values: Vec<T> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    values
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn symmetric_min_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> T {
    symmetric_eigenvalues(m).first().copied().unwrap_or_else(|| T::max_value().unwrap_or_else(T::one))
}

/// `true` when the Cholesky factorization of the symmetric matrix succeeds.
pub fn is_positive_definite<T: Scalar>(m: &DMatrix<T>) -> bool {
    m.iter().all(|x| x.is_finite()) && Cholesky::new(m.clone()).is_some()
}

/// `Re(x* H x)`.
pub fn quadratic_value<T: Scalar>(h: &CMatrix<T>, x: &CVector<T>) -> T {
    let hx = h * x;
    x.dotc(&hx).re
}

/// Frobenius inner product `<A, B>` of two real matrices of equal shape.
pub fn frobenius_dot<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

/// `(M + M^T) / 2`.
pub fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::c(0.5)
}

use nalgebra::{DMatrix, SymmetricEigen};

use super::{vector, DenseMatrix, Real};
use crate::error::{argument, Error, Result};

/// Iteration cap for [`spectral_norm`].
pub const POWER_ITERATION_CAP: usize = 10_000;

/// Symmetry tolerance accepted by the symmetric eigen routines.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// `‖m‖₂` by power iteration on `mᵀm`.
///
/// Starts from the all-ones vector with a small deterministic ripple so that
/// exactly ones-orthogonal dominant directions are still reached. Terminates
/// once the eigen-residual `‖mᵀm v − λv‖` falls below `tol·λ`, which bounds
/// the relative error of the returned norm by roughly `tol / 2`.
pub fn spectral_norm<T: Real>(m: &DenseMatrix<T>, tol: T) -> Result<T> {
    if !(tol > T::zero()) {
        return Err(argument("spectral_norm tolerance must be positive"));
    }
    let n = m.cols();
    if n == 0 || m.rows() == 0 || m.max_abs() == T::zero() {
        return Ok(T::zero());
    }
    let mut v: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.25 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()))
        .collect();
    normalize(&mut v);
    for _ in 0..POWER_ITERATION_CAP {
        let w = m.matvec_t(&m.matvec(&v));
        let lambda = vector::dot(&v, &w);
        let wnorm = vector::norm(&w);
        if wnorm == T::zero() {
            // v fell into the null space; only possible for rank-deficient m
            // whose range misses the start vector entirely.
            return Ok(T::zero());
        }
        let resid = w
            .iter()
            .zip(&v)
            .fold(T::zero(), |acc, (&wi, &vi)| {
                let d = wi - lambda * vi;
                acc + d * d
            })
            .sqrt();
        if resid <= tol * lambda.abs() {
            return Ok(lambda.max(T::zero()).sqrt());
        }
        v = w;
        normalize(&mut v);
    }
    Err(Error::NotConverged {
        iterations: POWER_ITERATION_CAP,
    })
}

fn normalize<T: Real>(v: &mut [T]) {
    let n = vector::norm(v);
    if n > T::zero() {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// All eigenvalues of a symmetric matrix, ascending.
///
/// Uses a dense symmetric QR eigen-solver in double precision.
pub fn sym_eigenvalues<T: Real>(m: &DenseMatrix<T>, tol: T) -> Result<Vec<T>> {
    if !(tol > T::zero()) {
        return Err(argument("eigen tolerance must be positive"));
    }
    if !m.is_square() {
        return Err(argument(format!(
            "symmetric eigen solve needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_symmetric(T::lit(SYMMETRY_TOL)) {
        return Err(argument("matrix is not symmetric"));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let dm = DMatrix::from_fn(n, n, |i, j| m.get(i, j).as_f64());
    let eps = tol.as_f64().min(1e-12).max(f64::EPSILON);
    let eig = SymmetricEigen::try_new(dm, eps, 0).ok_or(Error::NotConverged { iterations: 0 })?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals.into_iter().map(T::lit).collect())
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig_sym<T: Real>(m: &DenseMatrix<T>, tol: T) -> Result<T> {
    let vals = sym_eigenvalues(m, tol)?;
    vals.last()
        .copied()
        .ok_or_else(|| argument("empty matrix has no eigenvalues"))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig_sym<T: Real>(m: &DenseMatrix<T>, tol: T) -> Result<T> {
    let vals = sym_eigenvalues(m, tol)?;
    vals.first()
        .copied()
        .ok_or_else(|| argument("empty matrix has no eigenvalues"))
}

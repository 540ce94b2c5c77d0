//! Projection of Hermitian matrices onto the PSD cone.
//!
//! Truncating negative eigenvalues at zero is the maximum-likelihood
//! covariance update when fitting from noisy samples: the noise-free
//! covariance estimate `scatter - noise_var * I` can be indefinite, and the
//! likelihood-optimal PSD choice keeps the eigenbasis and clips the spectrum.

use crate::{linalg, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Eigendecomposition of a Hermitian matrix, symmetrized first so that
/// round-off asymmetry cannot leak complex eigenvalues. Returns
/// `(eigenvalues, eigenvectors)` with eigenvectors in columns.
pub(crate) fn hermitian_eigen(
    s: &DMatrix<Complex64>,
) -> Result<(DVector<f64>, DMatrix<Complex64>)> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            s.nrows(),
            s.ncols()
        )));
    }
    let mut sym = s.clone();
    linalg::hermitianize(&mut sym);
    let n = sym.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 100 * n.max(10))
        .ok_or(Error::EigenFailure)?;
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// Eigenvalues only (symmetrized input), for invariant checks.
pub(crate) fn hermitian_eigenvalues(s: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let (vals, _) = hermitian_eigen(s)?;
    Ok(vals.iter().copied().collect())
}

/// Projects a Hermitian matrix onto the PSD cone by truncating negative
/// eigenvalues: `V diag(max(0, xi)) V^H` where `S = V diag(xi) V^H`.
///
/// The input is symmetrized as `(S + S^H)/2` before decomposition, the output
/// is exactly Hermitian, and the map is idempotent and scale-equivariant
/// (`psd_project(a*S) = a*psd_project(S)` for `a > 0`).
pub fn psd_project(s: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (vals, vecs) = hermitian_eigen(s)?;
    let clipped = DVector::from_iterator(vals.len(), vals.iter().map(|&x| x.max(0.0)));
    Ok(reconstruct(&clipped, &vecs))
}

/// Hermitian square root with negative eigenvalues clamped to zero:
/// `V diag(sqrt(max(0, xi))) V^H`. Suitable for drawing Gaussian samples from
/// PSD (possibly singular) covariances.
pub(crate) fn psd_sqrt(s: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (vals, vecs) = hermitian_eigen(s)?;
    let roots = DVector::from_iterator(vals.len(), vals.iter().map(|&x| x.max(0.0).sqrt()));
    Ok(reconstruct(&roots, &vecs))
}

/// `V diag(d) V^H`, symmetrized exactly.
fn reconstruct(d: &DVector<f64>, v: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(d[j], 0.0);
    }
    let mut out = linalg::mul_adjoint_rhs(&scaled, v);
    linalg::hermitianize(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(entries: &[(f64, f64)], n: usize) -> DMatrix<Complex64> {
        DMatrix::from_iterator(n, n, entries.iter().map(|&(r, i)| Complex64::new(r, i)))
    }

    #[test]
    fn already_psd_diagonal_is_unchanged() {
        let s = cm(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (2.0, 0.0)], 2);
        let p = psd_project(&s).unwrap();
        assert!((p - s).norm() < 1e-14);
    }

    #[test]
    fn negative_diagonal_entries_are_truncated() {
        let s = cm(&[(-0.5, 0.0), (0.0, 0.0), (0.0, 0.0), (3.0, 0.0)], 2);
        let p = psd_project(&s).unwrap();
        let expect = cm(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (3.0, 0.0)], 2);
        assert!((p - expect).norm() < 1e-14);
    }

    #[test]
    fn symmetric_off_diagonal_keeps_positive_eigenpair() {
        // Eigenpairs of [[0,1],[1,0]] are (+1, (1,1)/sqrt2) and (-1, (1,-1)/sqrt2);
        // keeping the positive one gives the all-0.5 matrix.
        let s = cm(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)], 2);
        let p = psd_project(&s).unwrap();
        let expect = cm(&[(0.5, 0.0), (0.5, 0.0), (0.5, 0.0), (0.5, 0.0)], 2);
        assert!((p - expect).norm() < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = crate::rng::sample_rng(31, 0);
        let a = DMatrix::from_fn(5, 5, |_, _| crate::rng::standard_complex(&mut rng));
        let s = &a * a.adjoint();
        let r = psd_sqrt(&s).unwrap();
        assert!((&r * &r - &s).norm() < 1e-10 * s.norm());
    }
}

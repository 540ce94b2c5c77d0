//! Block-Toeplitz covariance parameterization via a truncated 2-D DFT.
//!
//! Stationary time-frequency channels have covariances that are
//! block-Toeplitz with Toeplitz blocks. Such matrices embed into a larger
//! (block-)circulant matrix diagonalized by the DFT, which yields the
//! parameterization
//!
//! ```text
//! C = Q^H diag(c) Q,   c >= 0 elementwise,
//! ```
//!
//! where `Q = Q_t (x) Q_f` and each axis factor is a two-times oversampled
//! truncated unitary DFT, `Q_x = F_{2 N_x} [I_{N_x}; 0]` of shape
//! `2 N_x x N_x`. An axis of length 1 contributes no correlation structure
//! and uses the trivial factor `[1]`; so a grid with both axes nontrivial has
//! a spectrum of length `4 N_c N_t`, while a pure 1-D grid `(N, 1)` has
//! length `2N`. Any `c >= 0` synthesizes an exactly structured PSD matrix,
//! which is what makes the parameterization safe inside EM updates.

use crate::{linalg, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Spectrum length for a `(carriers, timeslots)` grid: each axis of length
/// `> 1` is represented with two-times oversampling.
fn axis_bins(n: usize) -> usize {
    if n > 1 {
        2 * n
    } else {
        1
    }
}

/// The truncated 2-D DFT basis `Q` for a fixed grid, with enough cached
/// structure to synthesize covariances and project onto the parameterization.
#[derive(Clone, Debug)]
pub struct DftBasis {
    dims: (usize, usize),
    /// `Q` itself, `spectrum_len x n` with `n = dims.0 * dims.1`.
    q: DMatrix<Complex64>,
}

impl DftBasis {
    /// Builds the basis for a `(carriers, timeslots)` grid. Vectorization is
    /// column-major over the grid: entry `(c, t)` sits at index
    /// `c + carriers * t`.
    pub fn new(dims: (usize, usize)) -> Self {
        let (nc, nt) = dims;
        assert!(nc >= 1 && nt >= 1, "grid axes must be positive");
        let qf = axis_factor(nc);
        let qt = axis_factor(nt);
        let (rf, rt) = (qf.nrows(), qt.nrows());
        let n = nc * nt;
        let mut q = DMatrix::<Complex64>::zeros(rt * rf, n);
        for t in 0..nt {
            for c in 0..nc {
                let col = c + nc * t;
                for a in 0..rt {
                    for b in 0..rf {
                        q[(a * rf + b, col)] = qt[(a, t)] * qf[(b, c)];
                    }
                }
            }
        }
        DftBasis { dims, q }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Grid size `N = carriers * timeslots`.
    pub fn dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    /// Length of the spectral vector `c`.
    pub fn spectrum_len(&self) -> usize {
        self.q.nrows()
    }

    /// Synthesizes `Q^H diag(c) Q`. The result is exactly Hermitian, exactly
    /// block-Toeplitz with Toeplitz blocks, and PSD for `c >= 0`.
    pub fn synthesize(&self, c: &DVector<f64>) -> Result<DMatrix<Complex64>> {
        let r = self.spectrum_len();
        if c.len() != r {
            return Err(Error::DimensionMismatch(format!(
                "spectrum length {} for a {}x{} grid (expected {r})",
                c.len(),
                self.dims.0,
                self.dims.1
            )));
        }
        if c.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParameter(
                "spectrum entries must be nonnegative".into(),
            ));
        }
        let (nc, nt) = self.dims;
        let (rf, rt) = (axis_bins(nc), axis_bins(nt));
        // Entry ((c,t),(c',t')) of Q^H diag(c) Q depends only on the lags
        // (t'-t, c'-c); build that lag table once, then tile it.
        let tau = std::f64::consts::TAU;
        let mut lag = vec![Complex64::new(0.0, 0.0); nt * (2 * nc - 1)];
        let lag_at = |dt: usize, dc: isize| dt * (2 * nc - 1) + (dc + nc as isize - 1) as usize;
        for dt in 0..nt {
            for dc in -(nc as isize - 1)..=(nc as isize - 1) {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..rt {
                    // exp(-i 2 pi a dt / rt); rt == 1 collapses to 1.
                    let pt = -tau * (a as f64) * (dt as f64) / rt as f64;
                    let wt = Complex64::new(pt.cos(), pt.sin());
                    for b in 0..rf {
                        let pf = -tau * (b as f64) * (dc as f64) / rf as f64;
                        let wf = Complex64::new(pf.cos(), pf.sin());
                        acc += c[a * rf + b] * wt * wf;
                    }
                }
                lag[lag_at(dt, dc)] = acc / (rt * rf) as f64;
            }
        }
        let n = self.dim();
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        for t in 0..nt {
            for cc in 0..nc {
                let i = cc + nc * t;
                for tp in t..nt {
                    for cp in 0..nc {
                        let j = cp + nc * tp;
                        if j < i {
                            continue;
                        }
                        let g = lag[lag_at(tp - t, cp as isize - cc as isize)];
                        let g = if i == j { Complex64::new(g.re, 0.0) } else { g };
                        out[(i, j)] = g;
                        out[(j, i)] = g.conj();
                    }
                }
            }
        }
        Ok(out)
    }

    /// Real part of `diag(Q M Q^H)`: the projection of a Hermitian matrix
    /// onto the spectral bins. Used to seed spectra from unstructured
    /// covariances and inside the multiplicative spectral update.
    pub(crate) fn analyze_diag(&self, m: &DMatrix<Complex64>) -> DVector<f64> {
        let g = linalg::mul(&self.q, m);
        let r = self.spectrum_len();
        let n = self.dim();
        DVector::from_fn(r, |row, _| {
            let mut acc = 0.0;
            for j in 0..n {
                acc += (g[(row, j)] * self.q[(row, j)].conj()).re;
            }
            acc
        })
    }

    /// Projects an unstructured covariance onto a valid spectrum:
    /// `Re diag(Q C Q^H)` clamped below at the spectral floor.
    pub(crate) fn seed_spectrum(&self, cov: &DMatrix<Complex64>) -> DVector<f64> {
        let raw = self.analyze_diag(cov);
        let pos_sum: f64 = raw.iter().map(|&x| x.max(0.0)).sum();
        let floor = spectral_floor(pos_sum, self.spectrum_len());
        raw.map(|x| x.max(floor))
    }
}

/// One axis factor `F_{2n} [I_n; 0]` (columns of the unitary DFT truncated to
/// the first `n`), degenerating to `[1]` for an axis of length 1.
fn axis_factor(n: usize) -> DMatrix<Complex64> {
    if n <= 1 {
        return DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    }
    let rows = 2 * n;
    let scale = 1.0 / (rows as f64).sqrt();
    DMatrix::from_fn(rows, n, |r, k| {
        let phase = -std::f64::consts::TAU * (r as f64) * (k as f64) / rows as f64;
        Complex64::new(phase.cos(), phase.sin()) * scale
    })
}

/// Lower clamp applied to spectra so synthesized covariances stay usable in
/// solves: `1e-10 * mean(c_old)`.
pub(crate) fn spectral_floor(spectrum_sum: f64, len: usize) -> f64 {
    if spectrum_sum > 0.0 {
        1e-10 * spectrum_sum / len as f64
    } else {
        f64::MIN_POSITIVE
    }
}

/// Synthesizes the block-Toeplitz matrix `Q^H diag(c) Q` for a grid.
pub fn toeplitz_synthesize(c: &DVector<f64>, dims: (usize, usize)) -> Result<DMatrix<Complex64>> {
    DftBasis::new(dims).synthesize(c)
}

/// Multiplicative spectral update keeping a covariance inside the
/// block-Toeplitz family.
///
/// Given the previous structured covariance `c_old_cov` (invertible, e.g.
/// `toeplitz_synthesize(c_old)` plus a small ridge), its spectrum `c_old`,
/// and an unconstrained Hermitian PSD update target `c_new_unconstrained`,
/// computes
///
/// ```text
/// Theta = Q (C_old^-1 C_new_unc C_old^-1 - C_old^-1) Q^H
/// c_new = c_old + c_old .* Re diag(Theta) .* c_old
/// ```
///
/// clamped elementwise at the spectral floor, and returns
/// `(c_new, toeplitz_synthesize(c_new))`.
pub fn structured_update(
    c_old_cov: &DMatrix<Complex64>,
    c_old: &DVector<f64>,
    c_new_unconstrained: &DMatrix<Complex64>,
    dims: (usize, usize),
) -> Result<(DVector<f64>, DMatrix<Complex64>)> {
    let basis = DftBasis::new(dims);
    structured_update_with(&basis, c_old_cov, c_old, c_new_unconstrained)
}

/// [`structured_update`] against a prebuilt basis (the fitting loop reuses
/// one basis across components and iterations).
pub(crate) fn structured_update_with(
    basis: &DftBasis,
    c_old_cov: &DMatrix<Complex64>,
    c_old: &DVector<f64>,
    c_new_unconstrained: &DMatrix<Complex64>,
) -> Result<(DVector<f64>, DMatrix<Complex64>)> {
    let r = basis.spectrum_len();
    if c_old.len() != r {
        return Err(Error::DimensionMismatch(format!(
            "spectrum length {} (expected {r})",
            c_old.len()
        )));
    }
    let n = basis.dim();
    if c_old_cov.nrows() != n || c_new_unconstrained.nrows() != n {
        return Err(Error::DimensionMismatch(
            "covariance size does not match the grid".into(),
        ));
    }
    let chol = linalg::cholesky(c_old_cov.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite("structured update requires PD previous covariance".into())
    })?;
    // C^-1 C' C^-1 - C^-1 = (C^-1 (Y - I)^H)^H with Y = C^-1 C'.
    let y = chol.solve(c_new_unconstrained);
    let ym1 = y - DMatrix::<Complex64>::identity(n, n);
    let mut inner = chol.solve(&ym1.adjoint()).adjoint();
    linalg::hermitianize(&mut inner);
    let theta_diag = basis.analyze_diag(&inner);
    let floor = spectral_floor(c_old.sum(), r);
    let c_new = DVector::from_fn(r, |i, _| {
        (c_old[i] + c_old[i] * theta_diag[i] * c_old[i]).max(floor)
    });
    let cov_new = basis.synthesize(&c_new)?;
    Ok((c_new, cov_new))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_spectrum_synthesizes_identity() {
        for dims in [(6, 1), (3, 2), (4, 4), (1, 5)] {
            let basis = DftBasis::new(dims);
            let c = DVector::from_element(basis.spectrum_len(), 1.0);
            let m = basis.synthesize(&c).unwrap();
            let n = basis.dim();
            assert!(
                (m - DMatrix::<Complex64>::identity(n, n)).norm() < 1e-12,
                "dims {dims:?}"
            );
        }
    }

    #[test]
    fn first_bin_spectrum_is_constant_matrix() {
        // For a 1-D grid (N, 1) the basis is F_{2N}[I; 0]; selecting only bin
        // zero picks out the constant DFT row, so the synthesis is the rank-1
        // all-ones matrix scaled by 1/(2N).
        let n = 5;
        let basis = DftBasis::new((n, 1));
        let mut c = DVector::zeros(basis.spectrum_len());
        c[0] = 1.0;
        let m = basis.synthesize(&c).unwrap();
        let expect = DMatrix::from_element(n, n, Complex64::new(1.0 / (2.0 * n as f64), 0.0));
        assert!((m - expect).norm() < 1e-14);
    }

    #[test]
    fn synthesis_is_hermitian_psd_block_toeplitz() {
        let (nc, nt) = (3, 2);
        let basis = DftBasis::new((nc, nt));
        let mut rng = crate::rng::sample_rng(77, 0);
        let c = DVector::from_fn(basis.spectrum_len(), |_, _| {
            rand::Rng::gen_range(&mut rng, 0.0..2.0)
        });
        let m = basis.synthesize(&c).unwrap();
        assert!((&m - m.adjoint()).norm() == 0.0, "exactly Hermitian");
        let eigs = super::super::psd::hermitian_eigenvalues(&m).unwrap();
        let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10 * c.sum());
        // Structural scan: entry (i, j) may depend only on the block-index
        // difference (time lag) and within-block difference (carrier lag).
        let n = nc * nt;
        for i in 0..n {
            for j in 0..n {
                let (ci, ti) = (i % nc, i / nc);
                let (cj, tj) = (j % nc, j / nc);
                for ip in 0..n {
                    for jp in 0..n {
                        let (cip, tip) = (ip % nc, ip / nc);
                        let (cjp, tjp) = (jp % nc, jp / nc);
                        let same_lag = (tj as isize - ti as isize
                            == tjp as isize - tip as isize)
                            && (cj as isize - ci as isize == cjp as isize - cip as isize);
                        if same_lag {
                            assert_eq!(m[(i, j)], m[(ip, jp)], "lag structure violated");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_negative_entries_and_bad_lengths() {
        let basis = DftBasis::new((4, 1));
        let mut c = DVector::from_element(basis.spectrum_len(), 1.0);
        c[2] = -0.1;
        assert!(matches!(
            basis.synthesize(&c),
            Err(crate::Error::InvalidParameter(_))
        ));
        let short = DVector::from_element(3, 1.0);
        assert!(matches!(
            basis.synthesize(&short),
            Err(crate::Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn structured_update_fixed_point() {
        let basis = DftBasis::new((3, 2));
        let mut rng = crate::rng::sample_rng(78, 0);
        let c = DVector::from_fn(basis.spectrum_len(), |_, _| {
            rand::Rng::gen_range(&mut rng, 0.5..2.0)
        });
        let cov = basis.synthesize(&c).unwrap();
        let (c_new, cov_new) = structured_update(&cov, &c, &cov, basis.dims()).unwrap();
        assert!((c_new - &c).norm() < 1e-10 * c.norm());
        assert!((cov_new - &cov).norm() < 1e-10 * cov.norm());
    }

    #[test]
    fn structured_update_identity_doubling() {
        // c_old = 1 => C_old = I; target 2I gives Theta = Q Q^H whose diagonal
        // entries equal the squared row norms of Q. With one oversampled axis
        // those are 1/2, so c_new = 1.5 and C_new = 1.5 I.
        let n = 6;
        let basis = DftBasis::new((n, 1));
        let c = DVector::from_element(basis.spectrum_len(), 1.0);
        let eye = DMatrix::<Complex64>::identity(n, n);
        let (c_new, cov_new) = structured_update(&eye, &c, &eye.scale(2.0), (n, 1)).unwrap();
        assert!((c_new - DVector::from_element(basis.spectrum_len(), 1.5)).amax() < 1e-12);
        assert!((cov_new - eye.scale(1.5)).norm() < 1e-12);
        // Both axes oversampled: squared row norms are 1/4, so the same
        // experiment lands at 1.25.
        let basis2 = DftBasis::new((3, 2));
        let c2 = DVector::from_element(basis2.spectrum_len(), 1.0);
        let eye2 = DMatrix::<Complex64>::identity(6, 6);
        let (c_new2, _) = structured_update(&eye2, &c2, &eye2.scale(2.0), (3, 2)).unwrap();
        assert!((c_new2 - DVector::from_element(basis2.spectrum_len(), 1.25)).amax() < 1e-12);
    }

    #[test]
    fn structured_update_clamps_at_spectral_floor() {
        // A spectrum with one small entry whose basis row leans on the small
        // eigenvalue of C_old: the multiplicative step would push that entry
        // negative, so it must come back exactly at the spectral floor.
        let basis = DftBasis::new((2, 1));
        let c = DVector::from_vec(vec![4.0, 0.1, 0.0, 0.0]);
        let cov = basis.synthesize(&c).unwrap()
            + DMatrix::<Complex64>::identity(2, 2).scale(1e-12);
        let target = DMatrix::<Complex64>::zeros(2, 2);
        let (c_new, cov_new) = structured_update(&cov, &c, &target, (2, 1)).unwrap();
        let floor = spectral_floor(c.sum(), 4);
        assert_eq!(c_new[1], floor, "driven-negative entry sits at the floor");
        assert!(c_new.iter().all(|&x| x >= floor));
        let eigs = super::super::psd::hermitian_eigenvalues(&cov_new).unwrap();
        assert!(eigs.iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn structured_update_rejects_singular_previous() {
        let basis = DftBasis::new((2, 1));
        let c = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let cov = basis.synthesize(&c).unwrap(); // rank 1, singular
        let eye = DMatrix::<Complex64>::identity(2, 2);
        assert!(matches!(
            structured_update(&cov, &c, &eye, (2, 1)),
            Err(crate::Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn seed_spectrum_of_identity_is_flat() {
        // Seeding is Re diag(Q C Q^H) clamped at the floor. Q's rows are not
        // orthonormal (the basis is oversampled), so this is a biased
        // projection: for C = I it returns the squared row norms — 1/4 with
        // both axes oversampled, 1/2 for a 1-D grid. The multiplicative
        // spectral update absorbs the scale within a few iterations; what
        // matters here is that the seed is flat, positive, and deterministic.
        let basis = DftBasis::new((3, 2));
        let eye = DMatrix::<Complex64>::identity(6, 6);
        let seeded = basis.seed_spectrum(&eye);
        assert!((seeded - DVector::from_element(basis.spectrum_len(), 0.25)).amax() < 1e-12);
        let basis1d = DftBasis::new((4, 1));
        let eye4 = DMatrix::<Complex64>::identity(4, 4);
        let seeded1d = basis1d.seed_spectrum(&eye4);
        assert!((seeded1d - DVector::from_element(basis1d.spectrum_len(), 0.5)).amax() < 1e-12);
    }
}

//! Internal dense linear algebra helpers.
//!
//! The EM inner loops are dominated by complex matrix products of shape
//! (N x N) * (N x L) with L in the tens of thousands. nalgebra's built-in
//! matmul is scalar for `Complex64`, so the hot products here are expressed
//! as four real GEMM calls on split real/imaginary buffers, which lets
//! `matrixmultiply` use its vectorized f64 kernels. Everything in this module
//! is deterministic: fixed shapes produce bit-identical results run to run.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

/// Cholesky factorization with an explicit positive-pivot check.
///
/// nalgebra's complex Cholesky takes *complex* square roots of the pivots, so
/// on its own it rejects only exactly-zero pivots: an indefinite Hermitian
/// matrix "factors" with imaginary diagonal entries and downstream solves and
/// log-determinants return garbage. The exact pivots of a Hermitian matrix
/// are real, so a factor diagonal whose imaginary magnitude rivals its real
/// part can only come from a non-positive pivot; such factorizations are
/// rejected here.
pub fn cholesky(m: DMatrix<Complex64>) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = Cholesky::new(m)?;
    {
        let l = chol.l_dirty();
        for i in 0..l.nrows() {
            let d = l[(i, i)];
            if !(d.re > 0.0 && d.im.abs() < 0.5 * d.re) {
                return None;
            }
        }
    }
    Some(chol)
}

/// Splits a complex matrix into column-major real and imaginary buffers.
fn split(m: &DMatrix<Complex64>) -> (Vec<f64>, Vec<f64>) {
    let n = m.len();
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for v in m.iter() {
        re.push(v.re);
        im.push(v.im);
    }
    (re, im)
}

/// Recombines split buffers into a complex matrix.
fn join(nrows: usize, ncols: usize, re: &[f64], im: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_iterator(
        nrows,
        ncols,
        re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)),
    )
}

/// `c += alpha * op(a) * op(b)` on column-major buffers, where `op` is an
/// optional transpose. Dimensions are those of the *product*: (m x k)(k x n).
#[allow(clippy::too_many_arguments)]
fn dgemm_cm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.iter_mut() {
            *v *= beta;
        }
        return;
    }
    // Column-major (r x c) storage: row stride 1, column stride r. A
    // transposed operand is the same buffer with the strides swapped.
    let (rsa, csa) = if a_trans { (k as isize, 1) } else { (1, m as isize) };
    let (rsb, csb) = if b_trans { (n as isize, 1) } else { (1, k as isize) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
}

/// Complex product `A * B` via four real GEMMs.
pub fn mul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.ncols(), b.nrows(), "mul: inner dimensions");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut cr = vec![0.0; m * n];
    let mut ci = vec![0.0; m * n];
    dgemm_cm(m, k, n, 1.0, &ar, false, &br, false, 0.0, &mut cr);
    dgemm_cm(m, k, n, -1.0, &ai, false, &bi, false, 1.0, &mut cr);
    dgemm_cm(m, k, n, 1.0, &ar, false, &bi, false, 0.0, &mut ci);
    dgemm_cm(m, k, n, 1.0, &ai, false, &br, false, 1.0, &mut ci);
    join(m, n, &cr, &ci)
}

/// Complex product `A * B^H` via four real GEMMs.
pub fn mul_adjoint_rhs(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.ncols(), b.ncols(), "mul_adjoint_rhs: inner dimensions");
    let (m, k, n) = (a.nrows(), a.ncols(), b.nrows());
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut cr = vec![0.0; m * n];
    let mut ci = vec![0.0; m * n];
    // (Ar + i Ai)(Br^T - i Bi^T): real = Ar Br^T + Ai Bi^T, imag = Ai Br^T - Ar Bi^T.
    dgemm_cm(m, k, n, 1.0, &ar, false, &br, true, 0.0, &mut cr);
    dgemm_cm(m, k, n, 1.0, &ai, false, &bi, true, 1.0, &mut cr);
    dgemm_cm(m, k, n, 1.0, &ai, false, &br, true, 0.0, &mut ci);
    dgemm_cm(m, k, n, -1.0, &ar, false, &bi, true, 1.0, &mut ci);
    join(m, n, &cr, &ci)
}

/// Complex matrix times a real matrix (two real GEMMs). Used for collapsing
/// samples against responsibility rows: `X * Gamma^T`.
pub fn mul_real_rhs(a: &DMatrix<Complex64>, b: &DMatrix<f64>) -> DMatrix<Complex64> {
    assert_eq!(a.ncols(), b.nrows(), "mul_real_rhs: inner dimensions");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let (ar, ai) = split(a);
    let bs = b.as_slice();
    let mut cr = vec![0.0; m * n];
    let mut ci = vec![0.0; m * n];
    dgemm_cm(m, k, n, 1.0, &ar, false, bs, false, 0.0, &mut cr);
    dgemm_cm(m, k, n, 1.0, &ai, false, bs, false, 0.0, &mut ci);
    join(m, n, &cr, &ci)
}

/// Squared Euclidean norm of every column of `A * B`, without materializing
/// the complex product. This is the whitened E-step kernel: with `A = L^-1`
/// and `B` the centered samples, column `l` yields the Mahalanobis term.
pub fn mul_col_sqnorms(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Vec<f64> {
    assert_eq!(a.ncols(), b.nrows(), "mul_col_sqnorms: inner dimensions");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut cr = vec![0.0; m * n];
    let mut ci = vec![0.0; m * n];
    dgemm_cm(m, k, n, 1.0, &ar, false, &br, false, 0.0, &mut cr);
    dgemm_cm(m, k, n, -1.0, &ai, false, &bi, false, 1.0, &mut cr);
    dgemm_cm(m, k, n, 1.0, &ar, false, &bi, false, 0.0, &mut ci);
    dgemm_cm(m, k, n, 1.0, &ai, false, &br, false, 1.0, &mut ci);
    let mut out = vec![0.0; n];
    for (l, o) in out.iter_mut().enumerate() {
        let col = l * m;
        let mut acc = 0.0;
        for i in 0..m {
            let (r, im_) = (cr[col + i], ci[col + i]);
            acc += r * r + im_ * im_;
        }
        *o = acc;
    }
    out
}

/// Weighted scatter `sum_l w_l (x_l - mean)(x_l - mean)^H` where `x_l` are the
/// columns of `x`. Weights must be non-negative. Computed as `Y Y^H` with
/// `Y[:,l] = sqrt(w_l) (x_l - mean)`, i.e. a single (Hermitian) GEMM pass.
pub fn weighted_scatter(
    x: &DMatrix<Complex64>,
    mean: &DVector<Complex64>,
    w: &[f64],
) -> DMatrix<Complex64> {
    let (n, l) = (x.nrows(), x.ncols());
    assert_eq!(mean.len(), n, "weighted_scatter: mean length");
    assert_eq!(w.len(), l, "weighted_scatter: weight length");
    let mut yr = vec![0.0; n * l];
    let mut yi = vec![0.0; n * l];
    for (j, &wj) in w.iter().enumerate() {
        let s = wj.max(0.0).sqrt();
        let col = j * n;
        for i in 0..n {
            let v = x[(i, j)] - mean[i];
            yr[col + i] = s * v.re;
            yi[col + i] = s * v.im;
        }
    }
    let mut cr = vec![0.0; n * n];
    let mut ci = vec![0.0; n * n];
    // Y Y^H: real = Yr Yr^T + Yi Yi^T, imag = Yi Yr^T - Yr Yi^T.
    dgemm_cm(n, l, n, 1.0, &yr, false, &yr, true, 0.0, &mut cr);
    dgemm_cm(n, l, n, 1.0, &yi, false, &yi, true, 1.0, &mut cr);
    dgemm_cm(n, l, n, 1.0, &yi, false, &yr, true, 0.0, &mut ci);
    dgemm_cm(n, l, n, -1.0, &yr, false, &yi, true, 1.0, &mut ci);
    let mut s = join(n, n, &cr, &ci);
    hermitianize(&mut s);
    s
}

/// Symmetrizes a nearly Hermitian matrix in place: `M <- (M + M^H) / 2`.
pub fn hermitianize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for j in 0..n {
        m[(j, j)] = Complex64::new(m[(j, j)].re, 0.0);
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// `log(sum_i exp(v_i))`, stabilized by subtracting the maximum.
pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // All -inf (or an empty slice): the sum is zero. A +inf or NaN input
        // propagates through the fold below.
        return m;
    }
    let sum: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Explicit inverse of a lower-triangular matrix by forward substitution.
/// Small (N x N) cost; the payoff is that whitening a wide sample matrix
/// becomes a GEMM instead of N^2 L scalar solves.
pub fn lower_triangular_inverse(l: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = l.nrows();
    debug_assert_eq!(n, l.ncols());
    let mut inv = DMatrix::<Complex64>::identity(n, n);
    for col in 0..n {
        for i in col..n {
            let mut acc = inv[(i, col)];
            for j in col..i {
                acc -= l[(i, j)] * inv[(j, col)];
            }
            inv[(i, col)] = acc / l[(i, i)];
        }
    }
    inv
}

/// Extracts `v[idx]` as a new vector.
pub fn gather_vec(v: &DVector<Complex64>, idx: &[usize]) -> DVector<Complex64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Extracts the submatrix `m[rows, cols]`.
pub fn gather_mat(
    m: &DMatrix<Complex64>,
    rows: &[usize],
    cols: &[usize],
) -> DMatrix<Complex64> {
    let mut out = DMatrix::<Complex64>::zeros(rows.len(), cols.len());
    for (jj, &j) in cols.iter().enumerate() {
        for (ii, &i) in rows.iter().enumerate() {
            out[(ii, jj)] = m[(i, j)];
        }
    }
    out
}

//! Classical EM for complex Gaussian mixtures, plus the shared building
//! blocks (seeding, E-step, M-step) reused by the observation-aware fits.

use crate::gmm_core::{FitConfig, GmmParams};
use crate::{linalg, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Outcome of an EM fit.
#[derive(Clone, Debug)]
pub struct FitReport {
    /// The fitted mixture.
    pub gmm: GmmParams,
    /// Training log-likelihood measured at the start of each iteration
    /// (under the parameters produced by the previous M-step), including one
    /// final evaluation after the last M-step.
    pub loglik_history: Vec<f64>,
    /// Number of M-steps performed.
    pub iterations: usize,
    /// Whether the relative log-likelihood tolerance was met before
    /// `max_iters`.
    pub converged: bool,
}

/// Mutable EM state shared by the classical and observation-aware fits.
pub(crate) struct EmState {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<Complex64>>,
    pub covs: Vec<DMatrix<Complex64>>,
    /// Unregularized global sample covariance, kept for reseeding empty
    /// components.
    pub global_cov: DMatrix<Complex64>,
}

pub(crate) struct EStepOut {
    pub loglik: f64,
    /// Responsibilities, one row per sample (L x K; column k is contiguous).
    pub gamma: DMatrix<f64>,
    /// Per-sample mixture log-density, used to pick reseeding candidates.
    pub sample_ll: Vec<f64>,
}

/// Stacks samples into an N x L matrix and checks shape consistency.
pub(crate) fn pack_samples(samples: &[DVector<Complex64>]) -> Result<DMatrix<Complex64>> {
    let l = samples.len();
    if l == 0 {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    let n = samples[0].len();
    if n == 0 {
        return Err(Error::InvalidParameter("zero-dimensional samples".into()));
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "samples of length {n} and {}",
            bad.len()
        )));
    }
    let mut x = DMatrix::<Complex64>::zeros(n, l);
    for (j, s) in samples.iter().enumerate() {
        x.column_mut(j).copy_from(s);
    }
    Ok(x)
}

/// Default covariance regularizer: `1e-8` times the per-dimension power of
/// the data, so the floor scales equivariantly under rescaling and stays
/// strictly positive for any nonzero dataset.
pub(crate) fn power_floor(x: &DMatrix<Complex64>) -> f64 {
    1e-8 * x.norm_squared() / x.len() as f64
}

/// Covariance regularizer: the configured value, or [`power_floor`].
pub(crate) fn resolve_cov_floor(x: &DMatrix<Complex64>, config: &FitConfig) -> f64 {
    config.cov_floor.unwrap_or_else(|| power_floor(x))
}

/// Deterministic farthest-point seeding of component means (a k-means++
/// variant with the probabilistic draw replaced by the argmax): the first
/// center is the highest-power sample, each further center the sample
/// farthest from all chosen centers. Permutation-invariant up to exact
/// distance ties.
pub(crate) fn seed_means(x: &DMatrix<Complex64>, k: usize) -> Result<Vec<DVector<Complex64>>> {
    let l = x.ncols();
    if l < k {
        return Err(Error::InvalidParameter(format!(
            "need at least K = {k} samples, got {l}"
        )));
    }
    let mut centers: Vec<DVector<Complex64>> = Vec::with_capacity(k);
    let first = (0..l)
        .max_by(|&a, &b| {
            let (na, nb) = (x.column(a).norm_squared(), x.column(b).norm_squared());
            na.partial_cmp(&nb)
                .unwrap_or(std::cmp::Ordering::Equal)
                // Tie-break toward the lower index regardless of scan order.
                .then(b.cmp(&a))
        })
        .unwrap();
    centers.push(x.column(first).into_owned());
    let mut d2: Vec<f64> = (0..l)
        .map(|j| (x.column(j) - &centers[0]).norm_squared())
        .collect();
    while centers.len() < k {
        let next = (0..l)
            .max_by(|&a, &b| {
                d2[a]
                    .partial_cmp(&d2[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .unwrap();
        let c = x.column(next).into_owned();
        for j in 0..l {
            let dist = (x.column(j) - &c).norm_squared();
            if dist < d2[j] {
                d2[j] = dist;
            }
        }
        centers.push(c);
    }
    Ok(centers)
}

/// Global sample mean and (1/L)-normalized scatter of the columns of `x`.
pub(crate) fn global_mean_cov(
    x: &DMatrix<Complex64>,
) -> (DVector<Complex64>, DMatrix<Complex64>) {
    let l = x.ncols();
    let mean = DVector::from_fn(x.nrows(), |i, _| {
        x.row(i).iter().sum::<Complex64>() / l as f64
    });
    let w = vec![1.0 / l as f64; l];
    let cov = linalg::weighted_scatter(x, &mean, &w);
    (mean, cov)
}

/// Initial EM state: farthest-point means, covariances all equal to the
/// global sample covariance plus `seed_diag_load` on the diagonal, uniform
/// weights.
pub(crate) fn init_state(
    x: &DMatrix<Complex64>,
    k: usize,
    seed_diag_load: f64,
) -> Result<EmState> {
    let means = seed_means(x, k)?;
    let (_, global_cov) = global_mean_cov(x);
    let mut seeded = global_cov.clone();
    for i in 0..seeded.nrows() {
        seeded[(i, i)] += Complex64::new(seed_diag_load, 0.0);
    }
    Ok(EmState {
        weights: vec![1.0 / k as f64; k],
        means,
        covs: vec![seeded; k],
        global_cov,
    })
}

/// E-step against the state's covariances as-is (callers are responsible for
/// keeping them PD, e.g. via the covariance floor). Returns responsibilities
/// and the training log-likelihood.
pub(crate) fn e_step(x: &DMatrix<Complex64>, state: &EmState) -> Result<EStepOut> {
    e_step_with(x, &state.weights, &state.means, &state.covs)
}

/// [`e_step`] against explicit component parameters, so observation-aware
/// fits can evaluate responsibilities in observation space (gathered means
/// and covariances plus the noise diagonal) without building an `EmState`.
pub(crate) fn e_step_with(
    x: &DMatrix<Complex64>,
    weights: &[f64],
    means: &[DVector<Complex64>],
    covs: &[DMatrix<Complex64>],
) -> Result<EStepOut> {
    let (n, l) = (x.nrows(), x.ncols());
    let k = weights.len();
    let mut joint = DMatrix::<f64>::zeros(l, k);
    for kk in 0..k {
        let chol = linalg::cholesky(covs[kk].clone()).ok_or_else(|| {
            Error::NotPositiveDefinite(format!("component {kk} covariance in E-step"))
        })?;
        let log_norm = -(n as f64) * std::f64::consts::PI.ln() - chol.ln_determinant();
        let log_w = weights[kk].ln();
        let linv = linalg::lower_triangular_inverse(&chol.unpack());
        let centered = centered_columns(x, &means[kk]);
        let quads = linalg::mul_col_sqnorms(&linv, &centered);
        for (j, &q) in quads.iter().enumerate() {
            joint[(j, kk)] = log_w + log_norm - q;
        }
    }
    let mut gamma = joint;
    let mut sample_ll = vec![0.0; l];
    let mut loglik = 0.0;
    let mut row = vec![0.0; k];
    for j in 0..l {
        for kk in 0..k {
            row[kk] = gamma[(j, kk)];
        }
        let lse = linalg::logsumexp(&row);
        if !lse.is_finite() {
            return Err(Error::DegenerateResponsibilities);
        }
        let mut total = 0.0;
        for kk in 0..k {
            let g = (row[kk] - lse).exp();
            gamma[(j, kk)] = g;
            total += g;
        }
        for kk in 0..k {
            gamma[(j, kk)] /= total;
        }
        sample_ll[j] = lse;
        loglik += lse;
    }
    Ok(EStepOut {
        loglik,
        gamma,
        sample_ll,
    })
}

/// Classical M-step: `pi_k = N_k / L`, means are responsibility-weighted
/// sample means, covariances responsibility-weighted scatters plus
/// `diag_load` on the diagonal. Components whose effective count `N_k` falls
/// below `1e-12 * L` are reseeded from the worst-explained samples (lowest
/// mixture log-density), with the global covariance and weight `1/L`.
pub(crate) fn m_step(
    x: &DMatrix<Complex64>,
    es: &EStepOut,
    state: &mut EmState,
    diag_load: f64,
) {
    let l = x.ncols();
    let k = state.weights.len();
    let nk: Vec<f64> = (0..k).map(|kk| es.gamma.column(kk).sum()).collect();
    let weighted_sums = linalg::mul_real_rhs(x, &es.gamma); // N x K
    let mut raw_pi = vec![0.0; k];
    let mut starved: Vec<usize> = Vec::new();
    for kk in 0..k {
        if nk[kk] < 1e-12 * l as f64 {
            starved.push(kk);
            continue;
        }
        raw_pi[kk] = nk[kk] / l as f64;
        let inv_nk = Complex64::new(1.0 / nk[kk], 0.0);
        let mu = DVector::from_fn(x.nrows(), |i, _| weighted_sums[(i, kk)] * inv_nk);
        let mut cov = linalg::weighted_scatter(x, &mu, es.gamma.column(kk).as_slice());
        cov /= Complex64::new(nk[kk], 0.0);
        for i in 0..cov.nrows() {
            cov[(i, i)] += Complex64::new(diag_load, 0.0);
        }
        state.means[kk] = mu;
        state.covs[kk] = cov;
    }
    if !starved.is_empty() {
        // Worst-explained samples first, deterministic tie-break by index.
        let mut order: Vec<usize> = (0..l).collect();
        order.sort_by(|&a, &b| {
            es.sample_ll[a]
                .partial_cmp(&es.sample_ll[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for (slot, &kk) in starved.iter().enumerate() {
            let src = order[slot.min(l - 1)];
            state.means[kk] = x.column(src).into_owned();
            let mut cov = state.global_cov.clone();
            for i in 0..cov.nrows() {
                cov[(i, i)] += Complex64::new(diag_load, 0.0);
            }
            state.covs[kk] = cov;
            raw_pi[kk] = 1.0 / l as f64;
        }
    }
    let total: f64 = raw_pi.iter().sum();
    for kk in 0..k {
        state.weights[kk] = raw_pi[kk] / total;
    }
}

fn centered_columns(x: &DMatrix<Complex64>, mu: &DVector<Complex64>) -> DMatrix<Complex64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col -= mu;
    }
    out
}

pub(crate) fn snapshot(state: &EmState) -> Result<GmmParams> {
    GmmParams::new(
        state.weights.clone(),
        state.means.clone(),
        state.covs.clone(),
    )
}

fn fit_classical_inner(
    samples: &[DVector<Complex64>],
    config: &FitConfig,
    mut hook: Option<&mut dyn FnMut(usize, &GmmParams)>,
) -> Result<FitReport> {
    config.validate()?;
    let x = pack_samples(samples)?;
    let floor = resolve_cov_floor(&x, config);
    let mut state = init_state(&x, config.num_components, floor)?;
    if let Some(h) = hook.as_mut() {
        h(0, &snapshot(&state)?);
    }
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    let mut m_steps = 0;
    let mut converged = false;
    loop {
        let es = e_step(&x, &state)?;
        history.push(es.loglik);
        if let Some(p) = prev {
            if (es.loglik - p).abs() <= config.rel_loglik_tol * p.abs() {
                converged = true;
                break;
            }
        }
        if m_steps == config.max_iters {
            break;
        }
        prev = Some(es.loglik);
        m_step(&x, &es, &mut state, floor);
        m_steps += 1;
        if let Some(h) = hook.as_mut() {
            h(m_steps, &snapshot(&state)?);
        }
    }
    Ok(FitReport {
        gmm: snapshot(&state)?,
        loglik_history: history,
        iterations: m_steps,
        converged,
    })
}

/// Fits a mixture to perfect (noise-free, fully observed) samples by
/// classical EM. Covariance updates add the covariance floor, iteration
/// stops at `max_iters` or when the relative log-likelihood change drops
/// below `rel_loglik_tol`.
pub fn em_fit_classical(
    samples: &[DVector<Complex64>],
    config: &FitConfig,
) -> Result<FitReport> {
    fit_classical_inner(samples, config, None)
}

/// [`em_fit_classical`] with a callback invoked as `hook(0, initial)` and
/// `hook(i, params)` after the i-th M-step, for per-iteration inspection.
pub fn em_fit_classical_traced(
    samples: &[DVector<Complex64>],
    config: &FitConfig,
    mut hook: impl FnMut(usize, &GmmParams),
) -> Result<FitReport> {
    fit_classical_inner(samples, config, Some(&mut hook))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{sample_rng, standard_complex};

    fn gaussian_blob(
        center: Complex64,
        n: usize,
        l: usize,
        seed: u64,
    ) -> Vec<DVector<Complex64>> {
        (0..l)
            .map(|j| {
                let mut rng = sample_rng(seed, j as u64);
                DVector::from_fn(n, |_, _| center + standard_complex(&mut rng))
            })
            .collect()
    }

    #[test]
    fn single_component_closed_form() {
        let samples = gaussian_blob(Complex64::new(1.0, -2.0), 3, 400, 5);
        let report = em_fit_classical(&samples, &FitConfig::new(1)).unwrap();
        assert!(report.converged);
        let x = pack_samples(&samples).unwrap();
        let (mean, cov) = global_mean_cov(&x);
        let floor = resolve_cov_floor(&x, &FitConfig::new(1));
        let fitted = &report.gmm;
        assert!((fitted.weights()[0] - 1.0).abs() < 1e-14);
        assert!((&fitted.means()[0] - &mean).norm() < 1e-10);
        let expected = cov + DMatrix::<Complex64>::identity(3, 3).scale(floor);
        assert!((&fitted.covariances()[0] - expected).norm() < 1e-10);
    }

    #[test]
    fn identical_samples_yield_floor_covariance() {
        let v = DVector::from_vec(vec![Complex64::new(2.0, 1.0), Complex64::new(-1.0, 0.5)]);
        let samples = vec![v.clone(); 50];
        let report = em_fit_classical(&samples, &FitConfig::new(1)).unwrap();
        let x = pack_samples(&samples).unwrap();
        let floor = resolve_cov_floor(&x, &FitConfig::new(1));
        assert!(floor > 0.0);
        let expected = DMatrix::<Complex64>::identity(2, 2).scale(floor);
        let diff = (&report.gmm.covariances()[0] - expected).norm();
        assert!(diff <= 1e-12 * floor, "diff {diff} vs floor {floor}");
        assert!((&report.gmm.means()[0] - v).norm() < 1e-13);
    }

    #[test]
    fn two_separated_clusters_are_recovered() {
        let mut samples = gaussian_blob(Complex64::new(10.0, 0.0), 2, 2500, 6);
        samples.extend(gaussian_blob(Complex64::new(-10.0, 0.0), 2, 2500, 7));
        let report = em_fit_classical(&samples, &FitConfig::new(2)).unwrap();
        let mut fitted: Vec<f64> = report.gmm.means().iter().map(|m| m[0].re).collect();
        fitted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((fitted[0] + 10.0).abs() < 0.1, "means {fitted:?}");
        assert!((fitted[1] - 10.0).abs() < 0.1);
        for w in report.gmm.weights() {
            assert!((w - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn loglik_history_is_monotone() {
        let mut samples = gaussian_blob(Complex64::new(1.5, 1.0), 3, 600, 8);
        samples.extend(gaussian_blob(Complex64::new(-1.0, 2.0), 3, 600, 9));
        let mut config = FitConfig::new(3);
        config.max_iters = 30;
        config.rel_loglik_tol = 1e-12;
        let report = em_fit_classical(&samples, &config).unwrap();
        for w in report.loglik_history.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-8 * w[0].abs(),
                "log-likelihood decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn too_few_samples_is_rejected() {
        let samples = gaussian_blob(Complex64::new(0.0, 0.0), 2, 3, 10);
        assert!(matches!(
            em_fit_classical(&samples, &FitConfig::new(4)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn traced_hook_sees_init_and_every_m_step() {
        let samples = gaussian_blob(Complex64::new(0.5, 0.0), 2, 200, 11);
        let mut config = FitConfig::new(2);
        config.max_iters = 5;
        config.rel_loglik_tol = 1e-15;
        let mut calls = Vec::new();
        let report = em_fit_classical_traced(&samples, &config, |i, gmm| {
            assert!(gmm.validate().is_ok());
            calls.push(i);
        })
        .unwrap();
        let expect: Vec<usize> = (0..=report.iterations).collect();
        assert_eq!(calls, expect);
    }
}

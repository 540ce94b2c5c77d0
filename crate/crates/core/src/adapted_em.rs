//! EM fits that account for the observation model of the training data.
//!
//! A base station never collects clean channel vectors: every available
//! training sample is a pilot observation `y = A h + n`, where `A` selects a
//! fixed subset of the `N` grid entries and `n` is white complex Gaussian
//! noise of known variance. The fits in this module run EM directly on such
//! observations and still return a mixture over the *channel* domain:
//!
//! * [`fit_noisy`] — fully observed but noisy samples (`A = I`). The E-step
//!   evaluates responsibilities against `C_k + sigma^2 I`; the M-step forms
//!   the usual weighted scatter of the noisy samples and removes the noise
//!   by truncating the spectrum of `scatter - sigma^2 I` at zero, which is
//!   the maximum-likelihood covariance update under this noise model.
//! * [`fit_noisy_missing`] — noisy samples observed on a fixed index
//!   pattern. Responsibilities are computed in observation space; each
//!   component extends every sample with its own conditional mean over the
//!   unobserved entries and adds the conditional covariance to the scatter,
//!   again followed by noise removal and spectral truncation. Covariances
//!   can additionally be constrained to the block-Toeplitz family via a
//!   multiplicative spectral update.
//!
//! Both fits subtract the *true* noise variance in the covariance update and
//! regularize linear solves only when `sigma^2 = 0`, so the noiseless,
//! fully observed case reduces exactly to classical EM.

use crate::channel_sim::SelectionPattern;
use crate::estimators;
use crate::gmm_core::psd::psd_project;
use crate::gmm_core::toeplitz::{structured_update_with, DftBasis};
use crate::gmm_core::{
    e_step_with, init_state, m_step, pack_samples, resolve_cov_floor, snapshot, EStepOut, EmState,
    FitConfig, FitReport, GmmParams, ObservationGmm,
};
use crate::{linalg, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Covariance family enforced by [`fit_noisy_missing`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StructureSpec {
    /// Unconstrained Hermitian PSD covariances.
    #[default]
    Full,
    /// Covariances of the form `Q^H diag(c) Q` for the truncated 2-D DFT
    /// basis of the grid, updated multiplicatively in the spectrum.
    BlockToeplitz,
}

/// Fits a channel-domain mixture to fully observed samples contaminated by
/// white complex Gaussian noise of known variance `noise_var`.
///
/// The first M-step is the classical one (it seeds the mixture from the raw
/// samples); every later M-step removes the noise from the covariance
/// estimate by spectral truncation of `scatter - noise_var * I`. With
/// `noise_var = 0` the trajectory coincides with [`crate::gmm_core::em_fit_classical`]
/// on the same data; the stored covariances then differ exactly by the
/// covariance floor on the diagonal, which this fit applies only inside
/// linear solves instead of baking it into the parameters.
pub fn fit_noisy(
    samples: &[DVector<Complex64>],
    noise_var: f64,
    config: &FitConfig,
) -> Result<FitReport> {
    fit_noisy_inner(samples, noise_var, config, None)
}

/// [`fit_noisy`] with a callback invoked as `hook(0, initial)` and
/// `hook(i, params)` after the i-th M-step.
pub fn fit_noisy_traced(
    samples: &[DVector<Complex64>],
    noise_var: f64,
    config: &FitConfig,
    mut hook: impl FnMut(usize, &GmmParams),
) -> Result<FitReport> {
    fit_noisy_inner(samples, noise_var, config, Some(&mut hook))
}

fn fit_noisy_inner(
    samples: &[DVector<Complex64>],
    noise_var: f64,
    config: &FitConfig,
    mut hook: Option<&mut dyn FnMut(usize, &GmmParams)>,
) -> Result<FitReport> {
    config.validate()?;
    check_noise_var(noise_var)?;
    let x = pack_samples(samples)?;
    let floor = resolve_cov_floor(&x, config);
    let load = solve_load(noise_var, floor);
    let mut state = init_state(&x, config.num_components, 0.0)?;
    if let Some(h) = hook.as_mut() {
        h(0, &snapshot(&state)?);
    }
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    let mut m_steps = 0;
    let mut converged = false;
    loop {
        let es = e_step_with(&x, &state.weights, &state.means, &loaded(&state.covs, load))?;
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
        m_step(&x, &es, &mut state, 0.0);
        if m_steps > 0 {
            denoise_covs(&mut state.covs, noise_var)?;
        }
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

/// Fits a channel-domain mixture to noisy observations restricted to a fixed
/// selection `pattern` over an `N_c x N_t` grid of shape `dims`.
///
/// Initialization interpolates every observation onto the full grid (see
/// [`estimators::lin_interp`]) and runs one classical EM iteration on the
/// interpolated samples; all later iterations compute responsibilities in
/// observation space, impute the unobserved entries per component with the
/// conditional mean under the current parameters, add the conditional
/// covariance to the scatter, and denoise by spectral truncation. With
/// `structure = BlockToeplitz`, every covariance update is followed by a
/// multiplicative spectral step that keeps `C_k = Q^H diag(c_k) Q`.
pub fn fit_noisy_missing(
    samples: &[DVector<Complex64>],
    pattern: &SelectionPattern,
    noise_var: f64,
    dims: (usize, usize),
    structure: StructureSpec,
    config: &FitConfig,
) -> Result<FitReport> {
    fit_noisy_missing_inner(samples, pattern, noise_var, dims, structure, config, None)
}

/// [`fit_noisy_missing`] with a per-iteration callback, called like the one
/// of [`fit_noisy_traced`].
#[allow(clippy::too_many_arguments)]
pub fn fit_noisy_missing_traced(
    samples: &[DVector<Complex64>],
    pattern: &SelectionPattern,
    noise_var: f64,
    dims: (usize, usize),
    structure: StructureSpec,
    config: &FitConfig,
    mut hook: impl FnMut(usize, &GmmParams),
) -> Result<FitReport> {
    fit_noisy_missing_inner(
        samples,
        pattern,
        noise_var,
        dims,
        structure,
        config,
        Some(&mut hook),
    )
}

#[allow(clippy::too_many_arguments)]
fn fit_noisy_missing_inner(
    samples: &[DVector<Complex64>],
    pattern: &SelectionPattern,
    noise_var: f64,
    dims: (usize, usize),
    structure: StructureSpec,
    config: &FitConfig,
    mut hook: Option<&mut dyn FnMut(usize, &GmmParams)>,
) -> Result<FitReport> {
    config.validate()?;
    check_noise_var(noise_var)?;
    let n = dims
        .0
        .checked_mul(dims.1)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("invalid grid {}x{}", dims.0, dims.1)))?;
    if pattern.total_dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "pattern over {} entries vs {}x{} grid",
            pattern.total_dim(),
            dims.0,
            dims.1
        )));
    }
    let y = pack_samples(samples)?;
    if y.nrows() != pattern.num_observed() {
        return Err(Error::DimensionMismatch(format!(
            "observations of length {} do not match the declared pattern ({} observed entries)",
            y.nrows(),
            pattern.num_observed()
        )));
    }
    let obs = pattern.observed().to_vec();
    let miss = pattern.complement();
    let l = y.ncols();

    // Seed from interpolated full-grid samples.
    let mut xt = DMatrix::<Complex64>::zeros(n, l);
    for (j, s) in samples.iter().enumerate() {
        xt.column_mut(j)
            .copy_from(&estimators::lin_interp(s, pattern, dims)?);
    }
    let floor = resolve_cov_floor(&xt, config);
    let load = solve_load(noise_var, floor);
    let basis = match structure {
        StructureSpec::BlockToeplitz => Some(DftBasis::new(dims)),
        StructureSpec::Full => None,
    };
    let mut state = init_state(&xt, config.num_components, 0.0)?;
    // Per-component spectra; empty until the seeding iteration has run (and
    // always empty for unconstrained fits).
    let mut spectra: Vec<DVector<f64>> = Vec::new();
    if let Some(h) = hook.as_mut() {
        h(0, &snapshot_structured(&state, &spectra, dims)?);
    }
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    let mut m_steps = 0;
    let mut converged = false;
    loop {
        // Observation-space E-step: gathered means and covariance blocks
        // plus the noise (or regularizer) on the diagonal.
        let means_o: Vec<_> = state
            .means
            .iter()
            .map(|m| linalg::gather_vec(m, &obs))
            .collect();
        let covs_o: Vec<_> = state
            .covs
            .iter()
            .map(|c| {
                let mut g = linalg::gather_mat(c, &obs, &obs);
                add_diag(&mut g, load);
                g
            })
            .collect();
        let es = e_step_with(&y, &state.weights, &means_o, &covs_o)?;
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
        if m_steps == 0 {
            // Seeding iteration: classical M-step on the interpolated
            // samples, then (if structured) project each covariance onto a
            // spectrum and resynthesize so the loop starts inside the family.
            m_step(&xt, &es, &mut state, 0.0);
            if let Some(basis) = &basis {
                spectra = state.covs.iter().map(|c| basis.seed_spectrum(c)).collect();
                for (c, spec) in state.covs.iter_mut().zip(&spectra) {
                    *c = basis.synthesize(spec)?;
                }
            }
        } else {
            adapted_m_step(
                &y,
                &es,
                &mut state,
                &mut spectra,
                pattern,
                &obs,
                &miss,
                dims,
                noise_var,
                load,
                basis.as_ref(),
            )?;
        }
        m_steps += 1;
        if let Some(h) = hook.as_mut() {
            h(m_steps, &snapshot_structured(&state, &spectra, dims)?);
        }
    }
    Ok(FitReport {
        gmm: snapshot_structured(&state, &spectra, dims)?,
        loglik_history: history,
        iterations: m_steps,
        converged,
    })
}

/// One observation-aware M-step: per-component conditional imputation,
/// scatter assembly in compressed form, noise removal, and (optionally) the
/// block-Toeplitz spectral update.
#[allow(clippy::too_many_arguments)]
fn adapted_m_step(
    y: &DMatrix<Complex64>,
    es: &EStepOut,
    state: &mut EmState,
    spectra: &mut [DVector<f64>],
    pattern: &SelectionPattern,
    obs: &[usize],
    miss: &[usize],
    dims: (usize, usize),
    noise_var: f64,
    load: f64,
    basis: Option<&DftBasis>,
) -> Result<()> {
    let l = y.ncols();
    let k = state.weights.len();
    let n = state.means[0].len();
    let old_covs = basis.map(|_| state.covs.clone());
    let nk: Vec<f64> = (0..k).map(|kk| es.gamma.column(kk).sum()).collect();
    let weighted_sums = linalg::mul_real_rhs(y, &es.gamma); // M x K
    let mut raw_pi = vec![0.0; k];
    let mut starved: Vec<usize> = Vec::new();
    for kk in 0..k {
        if nk[kk] < 1e-12 * l as f64 {
            starved.push(kk);
            continue;
        }
        raw_pi[kk] = nk[kk] / l as f64;
        let inv_nk = Complex64::new(1.0 / nk[kk], 0.0);
        let m1 = DVector::from_fn(y.nrows(), |i, _| weighted_sums[(i, kk)] * inv_nk);
        // Conditional split of the *current* component over [observed;
        // missing]: w maps observed residuals to the conditional mean of the
        // missing block, sigma is the conditional covariance left there.
        let sg = split_gaussian(&state.covs[kk], obs, miss, load)?;
        let mu_o_old = linalg::gather_vec(&state.means[kk], obs);
        let mu_m_old = linalg::gather_vec(&state.means[kk], miss);
        let mu_miss = &mu_m_old + &sg.w * (&m1 - &mu_o_old);
        let mut mu_new = DVector::<Complex64>::zeros(n);
        for (a, &i) in obs.iter().enumerate() {
            mu_new[i] = m1[a];
        }
        for (a, &i) in miss.iter().enumerate() {
            mu_new[i] = mu_miss[a];
        }
        // Every imputed sample, centered at the new mean, is [d; w d] in
        // [observed; missing] order with d = y - m1, so the full scatter
        // follows from the observed-block scatter s without materializing
        // the imputed samples. The missing block additionally accumulates
        // the conditional covariance once per unit responsibility.
        let mut s = linalg::weighted_scatter(y, &m1, es.gamma.column(kk).as_slice());
        s /= Complex64::new(nk[kk], 0.0);
        let ws = linalg::mul(&sg.w, &s);
        let wsw = linalg::mul_adjoint_rhs(&ws, &sg.w);
        let mut cy = DMatrix::<Complex64>::zeros(n, n);
        for (a, &i) in obs.iter().enumerate() {
            for (b, &j) in obs.iter().enumerate() {
                cy[(i, j)] = s[(a, b)];
            }
        }
        for (a, &i) in miss.iter().enumerate() {
            for (b, &j) in obs.iter().enumerate() {
                cy[(i, j)] = ws[(a, b)];
                cy[(j, i)] = ws[(a, b)].conj();
            }
            for (b, &j) in miss.iter().enumerate() {
                cy[(i, j)] = wsw[(a, b)] + sg.sigma[(a, b)];
            }
        }
        linalg::hermitianize(&mut cy);
        state.means[kk] = mu_new;
        state.covs[kk] = cy;
    }
    if !starved.is_empty() {
        // Reseed starved components from the worst-explained observations,
        // interpolated onto the grid; the covariance restarts from the
        // global covariance of the interpolated data.
        let mut order: Vec<usize> = (0..l).collect();
        order.sort_by(|&a, &b| {
            es.sample_ll[a]
                .partial_cmp(&es.sample_ll[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for (slot, &kk) in starved.iter().enumerate() {
            let src = order[slot.min(l - 1)];
            state.means[kk] = estimators::lin_interp(&y.column(src).into_owned(), pattern, dims)?;
            state.covs[kk] = state.global_cov.clone();
            raw_pi[kk] = 1.0 / l as f64;
        }
    }
    let total: f64 = raw_pi.iter().sum();
    for kk in 0..k {
        state.weights[kk] = raw_pi[kk] / total;
    }
    denoise_covs(&mut state.covs, noise_var)?;
    if let (Some(basis), Some(old_covs)) = (basis, old_covs) {
        for kk in 0..k {
            if starved.contains(&kk) {
                spectra[kk] = basis.seed_spectrum(&state.covs[kk]);
                state.covs[kk] = basis.synthesize(&spectra[kk])?;
            } else {
                let (c_new, cov_new) =
                    structured_update_with(basis, &old_covs[kk], &spectra[kk], &state.covs[kk])?;
                spectra[kk] = c_new;
                state.covs[kk] = cov_new;
            }
        }
    }
    Ok(())
}

/// Conditional-mean extension of a single observation under one mixture
/// component: returns the full-grid vector that keeps the observed entries
/// of `y` untouched and fills the unobserved ones with
/// `mean_miss + C_mo (C_oo + noise_var I)^{-1} (y - mean_obs)`, together
/// with the conditional covariance of the unobserved block,
/// `C_mm - C_mo (C_oo + noise_var I)^{-1} C_om` (Hermitian PSD,
/// `(N - M) x (N - M)`).
pub fn impute_component(
    y: &DVector<Complex64>,
    pattern: &SelectionPattern,
    mean: &DVector<Complex64>,
    cov: &DMatrix<Complex64>,
    noise_var: f64,
) -> Result<(DVector<Complex64>, DMatrix<Complex64>)> {
    check_noise_var(noise_var)?;
    let n = pattern.total_dim();
    if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "mean of length {} / covariance {}x{} for a pattern over {n} entries",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    if y.len() != pattern.num_observed() {
        return Err(Error::DimensionMismatch(format!(
            "observation of length {} vs {} observed entries",
            y.len(),
            pattern.num_observed()
        )));
    }
    if pattern.is_full() {
        return Ok((y.clone(), DMatrix::zeros(0, 0)));
    }
    let obs = pattern.observed();
    let miss = pattern.complement();
    let sg = split_gaussian(cov, obs, &miss, noise_var)?;
    let d = y - linalg::gather_vec(mean, obs);
    let y_miss = linalg::gather_vec(mean, &miss) + &sg.w * &d;
    let mut out = DVector::<Complex64>::zeros(n);
    for (a, &i) in obs.iter().enumerate() {
        out[i] = y[a];
    }
    for (a, &i) in miss.iter().enumerate() {
        out[i] = y_miss[a];
    }
    Ok((out, sg.sigma))
}

/// Total log-likelihood of a set of pattern-restricted noisy observations
/// under a channel-domain mixture: each component contributes
/// `N_C(y; mean_obs, C_obs + noise_var I)`, accumulated in the log domain.
pub fn loglik_observations(
    samples: &[DVector<Complex64>],
    pattern: &SelectionPattern,
    noise_var: f64,
    gmm: &GmmParams,
) -> Result<f64> {
    let obs_gmm = ObservationGmm::new(gmm, pattern, noise_var)?;
    let mut total = 0.0;
    for y in samples {
        total += obs_gmm.log_density(y)?;
    }
    Ok(total)
}

/// Conditional split of one Gaussian component over `[observed; missing]`.
struct SplitGaussian {
    /// `C_mo (C_oo + load I)^{-1}`.
    w: DMatrix<Complex64>,
    /// `C_mm - w C_om`: conditional covariance of the missing block.
    sigma: DMatrix<Complex64>,
}

fn split_gaussian(
    cov: &DMatrix<Complex64>,
    obs: &[usize],
    miss: &[usize],
    load: f64,
) -> Result<SplitGaussian> {
    let mut c_oo = linalg::gather_mat(cov, obs, obs);
    add_diag(&mut c_oo, load);
    let chol = linalg::cholesky(c_oo).ok_or_else(|| {
        Error::NotPositiveDefinite("observed-block covariance in conditional split".into())
    })?;
    let c_mo = linalg::gather_mat(cov, miss, obs);
    let c_mm = linalg::gather_mat(cov, miss, miss);
    let w = chol.solve(&c_mo.adjoint()).adjoint();
    let mut sigma = c_mm - linalg::mul_adjoint_rhs(&w, &c_mo);
    linalg::hermitianize(&mut sigma);
    Ok(SplitGaussian { w, sigma })
}

fn check_noise_var(noise_var: f64) -> Result<()> {
    if !noise_var.is_finite() || noise_var < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be finite and nonnegative, got {noise_var}"
        )));
    }
    Ok(())
}

/// Diagonal load used in every linear solve: the true noise variance, or the
/// covariance floor when the data is declared noiseless (covariances coming
/// out of the truncation step may be singular, so solves always need a
/// strictly positive shift).
fn solve_load(noise_var: f64, floor: f64) -> f64 {
    if noise_var > 0.0 {
        noise_var
    } else {
        floor
    }
}

fn add_diag(c: &mut DMatrix<Complex64>, v: f64) {
    for i in 0..c.nrows() {
        c[(i, i)] += Complex64::new(v, 0.0);
    }
}

fn loaded(covs: &[DMatrix<Complex64>], load: f64) -> Vec<DMatrix<Complex64>> {
    covs.iter()
        .map(|c| {
            let mut c = c.clone();
            add_diag(&mut c, load);
            c
        })
        .collect()
}

/// Subtracts the noise variance from every diagonal and projects back onto
/// the PSD cone. Skipped entirely for noiseless data so that the stored
/// covariances stay bit-identical to the classical weighted scatters.
fn denoise_covs(covs: &mut [DMatrix<Complex64>], noise_var: f64) -> Result<()> {
    if noise_var == 0.0 {
        return Ok(());
    }
    for cov in covs.iter_mut() {
        add_diag(cov, -noise_var);
        *cov = psd_project(cov)?;
    }
    Ok(())
}

/// Snapshot that restores the block-Toeplitz structure tag once spectra
/// exist (they are seeded by the first M-step of a structured fit).
fn snapshot_structured(
    state: &EmState,
    spectra: &[DVector<f64>],
    dims: (usize, usize),
) -> Result<GmmParams> {
    if spectra.is_empty() {
        snapshot(state)
    } else {
        GmmParams::new_block_toeplitz(
            state.weights.clone(),
            state.means.clone(),
            spectra.to_vec(),
            dims,
        )
    }
}

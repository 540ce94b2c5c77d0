//! Circularly symmetric complex Gaussian densities and responsibilities.

use crate::channel_sim::SelectionPattern;
use crate::gmm_core::GmmParams;
use crate::{linalg, Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

/// Log-density of the circularly symmetric complex Gaussian
/// `N_C(x; mu, C) = pi^-N det(C)^-1 exp(-(x-mu)^H C^-1 (x-mu))`:
///
/// ```text
/// log N_C = -N log pi - log det C - (x-mu)^H C^-1 (x-mu)
/// ```
///
/// computed through a Cholesky factorization (no explicit inverse).
pub fn cgauss_logpdf(
    x: &DVector<Complex64>,
    mean: &DVector<Complex64>,
    cov: &DMatrix<Complex64>,
) -> Result<f64> {
    let n = x.len();
    if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "x length {n}, mean length {}, covariance {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = crate::linalg::cholesky(cov.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite("covariance in cgauss_logpdf".into())
    })?;
    Ok(logpdf_with(&chol.ln_determinant(), &chol, &(x - mean), n))
}

fn logpdf_with(
    ln_det: &f64,
    chol: &Cholesky<Complex64, Dyn>,
    centered: &DVector<Complex64>,
    n: usize,
) -> f64 {
    let quad = chol
        .l_dirty()
        .solve_lower_triangular(centered)
        .map(|z| z.norm_squared())
        .unwrap_or(f64::INFINITY);
    -(n as f64) * std::f64::consts::PI.ln() - ln_det - quad
}

/// A mixture viewed through the observation model `y = A h + n`: for every
/// component, the observation-space mean `A mu_k` and covariance
/// `C_{y,k} = A C_k A^H + sigma^2 I` with its Cholesky factor cached.
#[derive(Clone, Debug)]
pub struct ObservationGmm {
    log_weights: Vec<f64>,
    obs_means: Vec<DVector<Complex64>>,
    chols: Vec<Cholesky<Complex64, Dyn>>,
    ln_dets: Vec<f64>,
    obs_dim: usize,
    full_dim: usize,
}

impl ObservationGmm {
    pub fn new(gmm: &GmmParams, pattern: &SelectionPattern, noise_var: f64) -> Result<Self> {
        let n = gmm.dim();
        if pattern.total_dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "mixture dimension {n} vs pattern over {} entries",
                pattern.total_dim()
            )));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance {noise_var} must be nonnegative"
            )));
        }
        let obs = pattern.observed();
        let m = obs.len();
        let mut obs_means = Vec::with_capacity(gmm.num_components());
        let mut chols = Vec::with_capacity(gmm.num_components());
        let mut ln_dets = Vec::with_capacity(gmm.num_components());
        for (mu, c) in gmm.means().iter().zip(gmm.covariances()) {
            let mut cy = if pattern.is_full() {
                c.clone()
            } else {
                linalg::gather_mat(c, obs, obs)
            };
            for i in 0..m {
                cy[(i, i)] += Complex64::new(noise_var, 0.0);
            }
            let chol = crate::linalg::cholesky(cy).ok_or_else(|| {
                Error::NotPositiveDefinite(
                    "observation covariance A C A^H + noise_var I".into(),
                )
            })?;
            obs_means.push(if pattern.is_full() {
                mu.clone()
            } else {
                linalg::gather_vec(mu, obs)
            });
            ln_dets.push(chol.ln_determinant());
            chols.push(chol);
        }
        Ok(ObservationGmm {
            log_weights: gmm.weights().iter().map(|&w| w.ln()).collect(),
            obs_means,
            chols,
            ln_dets,
            obs_dim: m,
            full_dim: n,
        })
    }

    pub fn num_components(&self) -> usize {
        self.log_weights.len()
    }

    /// Observation dimension `M`.
    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    /// Ambient channel dimension `N`.
    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub(crate) fn obs_mean(&self, k: usize) -> &DVector<Complex64> {
        &self.obs_means[k]
    }

    pub(crate) fn chol(&self, k: usize) -> &Cholesky<Complex64, Dyn> {
        &self.chols[k]
    }

    /// Per-component log-densities `log N_C(y; A mu_k, C_{y,k})`.
    pub fn log_component_densities(&self, y: &DVector<Complex64>) -> Result<Vec<f64>> {
        if y.len() != self.obs_dim {
            return Err(Error::DimensionMismatch(format!(
                "observation length {} vs pattern size {}",
                y.len(),
                self.obs_dim
            )));
        }
        Ok((0..self.num_components())
            .map(|k| {
                logpdf_with(
                    &self.ln_dets[k],
                    &self.chols[k],
                    &(y - &self.obs_means[k]),
                    self.obs_dim,
                )
            })
            .collect())
    }

    /// Mixture log-density `log sum_k pi_k N_C(y; A mu_k, C_{y,k})`.
    pub fn log_density(&self, y: &DVector<Complex64>) -> Result<f64> {
        let dens = self.log_component_densities(y)?;
        let joint: Vec<f64> = dens
            .iter()
            .zip(&self.log_weights)
            .map(|(&d, &w)| d + w)
            .collect();
        Ok(linalg::logsumexp(&joint))
    }

    /// Posterior component probabilities for one observation, computed in the
    /// log domain with max-subtraction.
    pub fn responsibilities(&self, y: &DVector<Complex64>) -> Result<DVector<f64>> {
        let dens = self.log_component_densities(y)?;
        let joint: Vec<f64> = dens
            .iter()
            .zip(&self.log_weights)
            .map(|(&d, &w)| d + w)
            .collect();
        let lse = linalg::logsumexp(&joint);
        if !lse.is_finite() {
            return Err(Error::DegenerateResponsibilities);
        }
        let mut gamma = DVector::from_iterator(joint.len(), joint.iter().map(|&x| (x - lse).exp()));
        let total: f64 = gamma.iter().sum();
        gamma /= total;
        Ok(gamma)
    }
}

/// Responsibilities `gamma_k(y)` of an observation under a mixture view:
/// `gamma_k ∝ pi_k N_C(y; A mu_k, C_{y,k})`, normalized to sum to one.
pub fn responsibilities(
    y: &DVector<Complex64>,
    obs_gmm: &ObservationGmm,
) -> Result<DVector<f64>> {
    obs_gmm.responsibilities(y)
}

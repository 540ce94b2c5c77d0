//! Channel estimators: the GMM conditional-mean estimator and the classical
//! baselines it is compared against.
//!
//! All estimators map a pilot observation `y = A h + n` to an estimate of the
//! full channel vector `h`. The GMM estimator is the responsibility-weighted
//! combination of per-component LMMSE estimates
//!
//! ```text
//! h_hat = sum_k gamma_k(y) (mu_k + C_k A^H (A C_k A^H + sigma^2 I)^{-1} (y - A mu_k))
//! ```
//!
//! Baselines: LMMSE with a fixed mean/covariance (used by the genie and
//! global-sample-covariance estimators), least squares, and bilinear
//! interpolation over the time-frequency grid.

use crate::channel_sim::SelectionPattern;
use crate::gmm_core::{GmmParams, ObservationGmm};
use crate::linalg;
use crate::{Complex64, Error, Result};
use nalgebra::{DMatrix, DVector};

/// A mixture prepared for repeated estimation through one pattern and noise
/// level: caches the observation-space factorizations and the cross
/// covariances `C_k A^H`.
pub struct GmmEstimator {
    obs: ObservationGmm,
    means: Vec<DVector<Complex64>>,
    cross: Vec<DMatrix<Complex64>>,
}

impl GmmEstimator {
    pub fn new(gmm: &GmmParams, pattern: &SelectionPattern, noise_var: f64) -> Result<Self> {
        let obs = ObservationGmm::new(gmm, pattern, noise_var)?;
        let rows: Vec<usize> = (0..gmm.dim()).collect();
        let cross = gmm
            .covariances()
            .iter()
            .map(|c| linalg::gather_mat(c, &rows, pattern.observed()))
            .collect();
        Ok(GmmEstimator {
            obs,
            means: gmm.means().to_vec(),
            cross,
        })
    }

    /// Conditional-mean estimate of the channel given one observation.
    pub fn estimate(&self, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let gamma = self.obs.responsibilities(y)?;
        let mut h = DVector::<Complex64>::zeros(self.obs.full_dim());
        for k in 0..self.obs.num_components() {
            let g = gamma[k];
            if g == 0.0 {
                continue;
            }
            let sol = self.obs.chol(k).solve(&(y - self.obs.obs_mean(k)));
            let hk = &self.means[k] + &self.cross[k] * sol;
            h.axpy(Complex64::new(g, 0.0), &hk, Complex64::new(1.0, 0.0));
        }
        Ok(h)
    }

    /// Responsibilities and the per-component LMMSE estimates, exposed so the
    /// convex-combination structure can be inspected.
    pub fn component_estimates(
        &self,
        y: &DVector<Complex64>,
    ) -> Result<(DVector<f64>, Vec<DVector<Complex64>>)> {
        let gamma = self.obs.responsibilities(y)?;
        let comps = (0..self.obs.num_components())
            .map(|k| {
                let sol = self.obs.chol(k).solve(&(y - self.obs.obs_mean(k)));
                &self.means[k] + &self.cross[k] * sol
            })
            .collect();
        Ok((gamma, comps))
    }
}

/// GMM conditional-mean estimate (one-shot; use [`GmmEstimator`] to amortize
/// the factorizations over many observations).
pub fn estimate_gmm(
    y: &DVector<Complex64>,
    pattern: &SelectionPattern,
    noise_var: f64,
    gmm: &GmmParams,
) -> Result<DVector<Complex64>> {
    GmmEstimator::new(gmm, pattern, noise_var)?.estimate(y)
}

/// LMMSE estimate for a single Gaussian prior `N_C(mean, c)`:
/// `h_hat = mean + C A^H (A C A^H + sigma^2 I)^{-1} (y - A mean)`.
pub fn estimate_lmmse(
    y: &DVector<Complex64>,
    pattern: &SelectionPattern,
    mean: &DVector<Complex64>,
    c: &DMatrix<Complex64>,
    noise_var: f64,
) -> Result<DVector<Complex64>> {
    let n = pattern.total_dim();
    if mean.len() != n || c.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "prior dimension {}x{} vs pattern over {n} entries",
            c.nrows(),
            c.ncols()
        )));
    }
    if y.len() != pattern.num_observed() {
        return Err(Error::DimensionMismatch(format!(
            "observation length {} vs pattern size {}",
            y.len(),
            pattern.num_observed()
        )));
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidParameter("noise_var must be >= 0".into()));
    }
    let obs = pattern.observed();
    let mut cy = linalg::gather_mat(c, obs, obs);
    for i in 0..obs.len() {
        cy[(i, i)] += Complex64::new(noise_var, 0.0);
    }
    let chol = linalg::cholesky(cy).ok_or_else(|| {
        Error::NotPositiveDefinite("observation covariance A C A^H + noise_var I".into())
    })?;
    let sol = chol.solve(&(y - linalg::gather_vec(mean, obs)));
    let rows: Vec<usize> = (0..n).collect();
    let cross = linalg::gather_mat(c, &rows, obs);
    Ok(mean + cross * sol)
}

/// Least-squares estimate: the raw observation. Only defined for full
/// observation, where `A` is the identity.
pub fn estimate_ls(
    y: &DVector<Complex64>,
    pattern: &SelectionPattern,
) -> Result<DVector<Complex64>> {
    if !pattern.is_full() {
        return Err(Error::InvalidParameter(
            "least squares requires full observation".into(),
        ));
    }
    if y.len() != pattern.num_observed() {
        return Err(Error::DimensionMismatch(format!(
            "observation length {} vs pattern size {}",
            y.len(),
            pattern.num_observed()
        )));
    }
    Ok(y.clone())
}

/// Genie-aided MMSE: LMMSE with the true per-sample covariance and zero mean.
pub fn estimate_genie(
    y: &DVector<Complex64>,
    pattern: &SelectionPattern,
    noise_var: f64,
    genie_cov: Option<&DMatrix<Complex64>>,
) -> Result<DVector<Complex64>> {
    let c = genie_cov.ok_or_else(|| {
        Error::InvalidParameter("sample carries no genie covariance".into())
    })?;
    let mean = DVector::zeros(pattern.total_dim());
    estimate_lmmse(y, pattern, &mean, c, noise_var)
}

/// Bilinear interpolation of a pilot observation onto the full `N_c x N_t`
/// grid: 1-D linear interpolation along frequency within each pilot-bearing
/// slot (nearest-pilot extension beyond the outermost pilots), then 1-D
/// linear interpolation along time per carrier (again with nearest
/// extension). Observed entries pass through unchanged.
pub fn lin_interp(
    y: &DVector<Complex64>,
    pattern: &SelectionPattern,
    dims: (usize, usize),
) -> Result<DVector<Complex64>> {
    let (nc, nt) = dims;
    let n = nc * nt;
    if pattern.total_dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "pattern over {} entries vs {nc}x{nt} grid",
            pattern.total_dim()
        )));
    }
    if y.len() != pattern.num_observed() {
        return Err(Error::DimensionMismatch(format!(
            "observation length {} vs pattern size {}",
            y.len(),
            pattern.num_observed()
        )));
    }

    // Group pilots by slot; within a slot the carriers arrive sorted because
    // pattern indices are increasing and index = c + N_c * t.
    let mut slots: Vec<(usize, Vec<(usize, Complex64)>)> = Vec::new();
    for (pos, &idx) in pattern.observed().iter().enumerate() {
        let (c, t) = (idx % nc, idx / nc);
        match slots.last_mut() {
            Some((slot, entries)) if *slot == t => entries.push((c, y[pos])),
            _ => slots.push((t, vec![(c, y[pos])])),
        }
    }

    // Frequency pass: a fully interpolated column per pilot-bearing slot.
    let interp_1d = |nodes: &[(usize, Complex64)], len: usize| -> Vec<Complex64> {
        let mut out = Vec::with_capacity(len);
        let mut seg = 0usize;
        for x in 0..len {
            while seg + 1 < nodes.len() && nodes[seg + 1].0 <= x {
                seg += 1;
            }
            let v = if x <= nodes[0].0 {
                nodes[0].1
            } else if x >= nodes[nodes.len() - 1].0 {
                nodes[nodes.len() - 1].1
            } else if nodes[seg].0 == x {
                nodes[seg].1
            } else {
                let (x0, v0) = nodes[seg];
                let (x1, v1) = nodes[seg + 1];
                let w = (x - x0) as f64 / (x1 - x0) as f64;
                v0 + (v1 - v0) * Complex64::new(w, 0.0)
            };
            out.push(v);
        }
        out
    };
    let columns: Vec<(usize, Vec<Complex64>)> = slots
        .iter()
        .map(|(t, entries)| (*t, interp_1d(entries, nc)))
        .collect();

    // Time pass per carrier across the pilot-bearing slots.
    let mut h = DVector::<Complex64>::zeros(n);
    for c in 0..nc {
        let nodes: Vec<(usize, Complex64)> =
            columns.iter().map(|(t, col)| (*t, col[c])).collect();
        let row = interp_1d(&nodes, nt);
        for (t, v) in row.into_iter().enumerate() {
            h[c + nc * t] = v;
        }
    }

    // Observed entries pass through exactly.
    for (pos, &idx) in pattern.observed().iter().enumerate() {
        h[idx] = y[pos];
    }
    Ok(h)
}

/// Sample mean and floored `1/L` sample covariance of a set of (interpolated)
/// training vectors — the prior behind the global-covariance LMMSE baseline.
pub fn fit_global_sample_cov(
    samples: &[DVector<Complex64>],
) -> Result<(DVector<Complex64>, DMatrix<Complex64>)> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(
            "global sample covariance needs at least two samples".into(),
        ));
    }
    let x = crate::gmm_core::pack_samples(samples)?;
    let (mean, mut cov) = crate::gmm_core::global_mean_cov(&x);
    let floor = crate::gmm_core::power_floor(&x);
    for i in 0..cov.nrows() {
        cov[(i, i)] += Complex64::new(floor, 0.0);
    }
    Ok((mean, cov))
}

//! Spatial-scenario generation: per-sample covariances from a Laplacian
//! angular power density on a uniform linear array, and channel draws.

use super::{ChannelSample, Scenario, SpatialParams};
use crate::gmm_core::psd::psd_sqrt;
use crate::{Complex64, Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::{FRAC_PI_2, PI};

/// Steering vector of a half-wavelength ULA: `a(theta)_n = exp(j pi n sin theta)`.
fn steering(num_antennas: usize, theta: f64) -> DVector<Complex64> {
    let s = theta.sin();
    DVector::from_fn(num_antennas, |n, _| Complex64::cis(PI * n as f64 * s))
}

/// Builds the covariance for explicitly given cluster center angles.
///
/// The angular power density is an equal-weight mixture of Laplacian
/// densities with scale `params.angular_spread`, one per center, discretized
/// on `G` grid angles `theta_g = -pi/2 + g*pi/G`. The result is
/// `sum_g w_g a(theta_g) a(theta_g)^H`, rescaled to trace `N`.
pub fn spatial_covariance_at(
    params: &SpatialParams,
    centers: &[f64],
) -> Result<DMatrix<Complex64>> {
    params.validate()?;
    if centers.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one cluster center required".into(),
        ));
    }
    let n = params.num_antennas;
    let g = params.grid_points;
    let thetas: Vec<f64> = (0..g).map(|i| -FRAC_PI_2 + i as f64 * PI / g as f64).collect();

    // Accumulate per-cluster weights; each cluster is normalized on the grid
    // before averaging so all clusters carry equal power. Distances are
    // shifted by the per-cluster minimum before exponentiating so that a very
    // small spread degenerates to a point mass instead of underflowing.
    let mut weights = vec![0.0f64; g];
    for &c in centers {
        let dists: Vec<f64> = thetas.iter().map(|&t| (t - c).abs()).collect();
        let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        let u: Vec<f64> = dists
            .iter()
            .map(|&d| (-(d - dmin) / params.angular_spread).exp())
            .collect();
        let total: f64 = u.iter().sum();
        for (w, v) in weights.iter_mut().zip(u.iter()) {
            *w += v / total;
        }
    }

    let mut a = DMatrix::zeros(n, g);
    for (j, &t) in thetas.iter().enumerate() {
        a.set_column(j, &steering(n, t));
    }
    let mut cov = crate::linalg::weighted_scatter(&a, &DVector::zeros(n), &weights);

    let trace: f64 = cov.diagonal().iter().map(|v| v.re).sum();
    if !(trace > 0.0) {
        return Err(Error::InvalidParameter(
            "angular density produced a zero covariance".into(),
        ));
    }
    cov *= Complex64::new(n as f64 / trace, 0.0);
    Ok(cov)
}

/// Draws cluster center angles uniformly over the sector and builds the
/// per-sample covariance.
pub fn spatial_covariance(
    params: &SpatialParams,
    rng: &mut impl rand::Rng,
) -> Result<DMatrix<Complex64>> {
    params.validate()?;
    let sh = params.sector_halfwidth;
    let centers: Vec<f64> = (0..params.num_clusters)
        .map(|_| rng.gen_range(-sh..=sh))
        .collect();
    spatial_covariance_at(params, &centers)
}

/// Draws `h ~ N_C(0, C)` through the clamped PSD square root of `C`.
pub fn sample_spatial_channel(
    c_delta: &DMatrix<Complex64>,
    rng: &mut impl rand::Rng,
) -> Result<ChannelSample> {
    if !c_delta.is_square() {
        return Err(Error::InvalidParameter(
            "covariance must be square".into(),
        ));
    }
    let root = psd_sqrt(c_delta)?;
    let n = c_delta.nrows();
    let w = DVector::from_fn(n, |_, _| crate::rng::standard_complex(rng));
    let h = &root * &w;
    Ok(ChannelSample {
        h,
        genie_cov: Some(c_delta.clone()),
        scenario: Scenario::Spatial,
    })
}

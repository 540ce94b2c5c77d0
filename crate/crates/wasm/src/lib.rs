//! Browser bindings for the channel-estimation demos.
//!
//! Each exported function runs a small, self-contained experiment and
//! returns its result as a JSON string for the demo page to render. The
//! crate also compiles natively so the bindings are unit-testable without a
//! browser; build the browser artifact with
//! `wasm-pack build crates/wasm --target web`.

use gmce_core::adapted_em::fit_noisy;
use gmce_core::channel_sim::{
    make_diamond_pattern, observe, sample_ofdm_channel, sample_spatial_channel,
    spatial_covariance, OfdmParams, SelectionPattern, SpatialParams,
};
use gmce_core::estimators::{estimate_genie, lin_interp};
use gmce_core::eval::snr_db_to_noise_var;
use gmce_core::gmm_core::FitConfig;
use gmce_core::rng::{sample_rng, standard_complex};
use gmce_core::{Complex64, Result};
use nalgebra::DVector;
use serde::Serialize;
use std::f64::consts::PI;
use wasm_bindgen::prelude::wasm_bindgen;

fn to_json<T: Serialize>(value: &Result<T>) -> String {
    match value {
        Ok(v) => serde_json::to_string(v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(message: &str) -> String {
    serde_json::to_string(&serde_json::json!({ "error": message })).unwrap()
}

fn single_nmse(estimate: &DVector<Complex64>, truth: &DVector<Complex64>) -> f64 {
    (estimate - truth).norm_squared() / truth.norm_squared()
}

#[derive(Serialize)]
struct SpatialDemo {
    num_antennas: usize,
    snr_db: f64,
    /// Per-antenna magnitude of the true channel.
    truth_mag: Vec<f64>,
    /// Per-antenna magnitude of the raw noisy observation (the LS estimate).
    ls_mag: Vec<f64>,
    /// Per-antenna magnitude of the genie MMSE estimate.
    genie_mag: Vec<f64>,
    /// Magnitudes of the true covariance, row-major `n x n`.
    cov_mag: Vec<f64>,
    nmse_ls: f64,
    nmse_genie: f64,
}

/// One spatial-channel estimation round: draw a covariance and a channel,
/// observe it in noise, and compare the raw observation with the genie MMSE
/// estimate that knows the covariance.
#[wasm_bindgen]
pub fn spatial_demo(num_antennas: usize, snr_db: f64, angular_spread_deg: f64, seed: u64) -> String {
    let run = || -> Result<SpatialDemo> {
        let mut params = SpatialParams::new(num_antennas);
        params.angular_spread = angular_spread_deg.max(0.05) * PI / 180.0;
        let mut rng = sample_rng(seed, 0);
        let cov = spatial_covariance(&params, &mut rng)?;
        let sample = sample_spatial_channel(&cov, &mut rng)?;
        let pattern = SelectionPattern::full(num_antennas);
        let noise_var = snr_db_to_noise_var(snr_db);
        let obs = observe(&sample.h, &pattern, noise_var, &mut rng)?;
        let genie = estimate_genie(&obs.y, &pattern, noise_var, Some(&cov))?;
        let mag = |v: &DVector<Complex64>| v.iter().map(|x| x.norm()).collect::<Vec<_>>();
        Ok(SpatialDemo {
            num_antennas,
            snr_db,
            truth_mag: mag(&sample.h),
            ls_mag: mag(&obs.y),
            genie_mag: mag(&genie),
            cov_mag: (0..num_antennas)
                .flat_map(|r| (0..num_antennas).map(move |c| (r, c)))
                .map(|(r, c)| cov[(r, c)].norm())
                .collect(),
            nmse_ls: single_nmse(&obs.y, &sample.h),
            nmse_genie: single_nmse(&genie, &sample.h),
        })
    };
    to_json(&run())
}

#[derive(Serialize)]
struct OfdmDemo {
    carriers: usize,
    timeslots: usize,
    snr_db: f64,
    /// Magnitudes of the true grid, vectorized column-major
    /// (index = carrier + carriers * slot).
    truth_mag: Vec<f64>,
    /// Magnitudes of the bilinear reconstruction from the pilots.
    interp_mag: Vec<f64>,
    /// Vectorized indices of the pilot positions.
    pilot_indices: Vec<usize>,
    nmse_lin_int: f64,
}

/// One OFDM round: draw a time-frequency channel, observe a diamond pilot
/// lattice in noise, and reconstruct the full grid by bilinear interpolation.
#[wasm_bindgen]
pub fn ofdm_demo(
    carriers: usize,
    timeslots: usize,
    pilot_slots: usize,
    pilots_per_slot: usize,
    snr_db: f64,
    seed: u64,
) -> String {
    let run = || -> Result<OfdmDemo> {
        let params = OfdmParams::new(carriers, timeslots);
        let mut rng = sample_rng(seed, 0);
        let sample = sample_ofdm_channel(&params, &mut rng)?;
        let pattern = make_diamond_pattern(carriers, timeslots, pilot_slots, pilots_per_slot)?;
        let noise_var = snr_db_to_noise_var(snr_db);
        let obs = observe(&sample.h, &pattern, noise_var, &mut rng)?;
        let interp = lin_interp(&obs.y, &pattern, (carriers, timeslots))?;
        let mag = |v: &DVector<Complex64>| v.iter().map(|x| x.norm()).collect::<Vec<_>>();
        Ok(OfdmDemo {
            carriers,
            timeslots,
            snr_db,
            truth_mag: mag(&sample.h),
            interp_mag: mag(&interp),
            pilot_indices: pattern.observed().to_vec(),
            nmse_lin_int: single_nmse(&interp, &sample.h),
        })
    };
    to_json(&run())
}

#[derive(Serialize)]
struct FittedComponent {
    weight: f64,
    mean_re: f64,
    mean_im: f64,
    /// Standard deviation per real axis (components are circular in the
    /// complex plane).
    std: f64,
}

#[derive(Serialize)]
struct GmmFitDemo {
    snr_db: f64,
    /// Noisy observations as (re, im) pairs.
    points: Vec<[f64; 2]>,
    /// The true component centers as (re, im) pairs.
    true_means: Vec<[f64; 2]>,
    fitted: Vec<FittedComponent>,
    loglik_history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Noise-aware mixture fitting on a scalar complex toy problem: draw points
/// from a ring of true clusters, blur them with observation noise, and fit a
/// mixture that compensates for that noise.
#[wasm_bindgen]
pub fn gmm_fit_demo(
    components: usize,
    num_samples: usize,
    snr_db: f64,
    max_iters: usize,
    seed: u64,
) -> String {
    let run = || -> Result<GmmFitDemo> {
        let k = components.clamp(1, 8);
        let l = num_samples.clamp(k.max(10), 4000);
        let noise_var = snr_db_to_noise_var(snr_db);
        // True clusters on a circle of radius 2, with spreads that shrink as
        // more clusters share the ring.
        let spread = (0.5 / k as f64).sqrt();
        let true_means: Vec<Complex64> = (0..k)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / k as f64;
                Complex64::new(2.0 * phi.cos(), 2.0 * phi.sin())
            })
            .collect();
        let observations: Vec<DVector<Complex64>> = (0..l)
            .map(|j| {
                let mut rng = sample_rng(seed, j as u64);
                let center = true_means[j % k];
                let clean = center + standard_complex(&mut rng) * spread;
                let noisy = clean + standard_complex(&mut rng) * noise_var.sqrt();
                DVector::from_element(1, noisy)
            })
            .collect();
        let mut config = FitConfig::new(k);
        config.max_iters = max_iters.clamp(1, 200);
        config.rel_loglik_tol = 1e-8;
        let report = fit_noisy(&observations, noise_var, &config)?;
        Ok(GmmFitDemo {
            snr_db,
            points: observations.iter().map(|p| [p[0].re, p[0].im]).collect(),
            true_means: true_means.iter().map(|m| [m.re, m.im]).collect(),
            fitted: (0..k)
                .map(|i| FittedComponent {
                    weight: report.gmm.weights()[i],
                    mean_re: report.gmm.means()[i][0].re,
                    mean_im: report.gmm.means()[i][0].im,
                    std: (report.gmm.covariances()[i][(0, 0)].re.max(0.0) / 2.0).sqrt(),
                })
                .collect(),
            loglik_history: report.loglik_history.clone(),
            iterations: report.iterations,
            converged: report.converged,
        })
    };
    to_json(&run())
}

//! End-to-end evaluation harness: NMSE sweeps over SNR and pilot
//! configurations for every implemented estimator, with deterministic seeding
//! and canonical CSV reports.
//!
//! The flow per sweep point (one SNR, one pilot configuration) is: generate
//! disjoint train/test channel sets, observe both through the pilot pattern
//! at the point's noise level, fit whatever models the requested estimators
//! need from the training observations (or from perfect channel knowledge,
//! for the reference variants), then average estimation errors over the test
//! set.

mod config;

pub use config::ExperimentConfig;

use crate::adapted_em::{fit_noisy, fit_noisy_missing, StructureSpec};
use crate::channel_sim::{
    generate_ofdm_samples, generate_spatial_samples, make_diamond_pattern, observe_samples,
    ChannelSample, ObservationSet, OfdmParams, Scenario, SelectionPattern, SpatialParams,
};
use crate::estimators::{
    estimate_genie, estimate_ls, fit_global_sample_cov, lin_interp, GmmEstimator,
};
use crate::gmm_core::{em_fit_classical, FitConfig, GmmParams};
use crate::rng::derive_seed;
use crate::{Error, Result};
use nalgebra::DVector;
use num_complex::Complex64;
use std::path::Path;

/// Normalized mean squared error: `sum_l ||h_hat_l - h_l||^2 / sum_l ||h_l||^2`.
pub fn nmse(estimates: &[DVector<Complex64>], truths: &[DVector<Complex64>]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidParameter(
            "nmse needs at least one sample".into(),
        ));
    }
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates vs {} truths",
            estimates.len(),
            truths.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        if e.len() != t.len() {
            return Err(Error::DimensionMismatch(format!(
                "estimate of length {} vs truth of length {}",
                e.len(),
                t.len()
            )));
        }
        num += (e - t).norm_squared();
        den += t.norm_squared();
    }
    if !(den > 0.0) {
        return Err(Error::InvalidParameter(
            "nmse is undefined for an all-zero truth set".into(),
        ));
    }
    Ok(num / den)
}

/// The registered estimator variants, by their report/config names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EstimatorKind {
    /// Utopian MMSE with the true per-sample covariance (`genie`).
    Genie,
    /// Least squares, i.e. the raw full observation (`ls`).
    Ls,
    /// Bilinear pilot interpolation (`lin_int`).
    LinInt,
    /// LMMSE with a global sample covariance of interpolated training data
    /// (`samp_cov_lin_int`).
    SampCovLinInt,
    /// GMM fit on perfect channel knowledge (`gmm_H`).
    GmmH,
    /// GMM fit directly on noisy observations, ignoring the noise
    /// (`gmm_mismatch`).
    GmmMismatch,
    /// GMM fit on interpolated observations, ignoring noise and interpolation
    /// error (`gmm_lin_int`).
    GmmLinInt,
    /// Noise/missing-data-aware GMM fit, full covariances (`gmm_Y`).
    GmmY,
    /// Noise/missing-data-aware GMM fit, block-Toeplitz covariances
    /// (`gmm_Y_toep`).
    GmmYToep,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 9] = [
        EstimatorKind::Genie,
        EstimatorKind::Ls,
        EstimatorKind::LinInt,
        EstimatorKind::SampCovLinInt,
        EstimatorKind::GmmH,
        EstimatorKind::GmmMismatch,
        EstimatorKind::GmmLinInt,
        EstimatorKind::GmmY,
        EstimatorKind::GmmYToep,
    ];

    /// Canonical name used in config files and CSV reports.
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Genie => "genie",
            EstimatorKind::Ls => "ls",
            EstimatorKind::LinInt => "lin_int",
            EstimatorKind::SampCovLinInt => "samp_cov_lin_int",
            EstimatorKind::GmmH => "gmm_H",
            EstimatorKind::GmmMismatch => "gmm_mismatch",
            EstimatorKind::GmmLinInt => "gmm_lin_int",
            EstimatorKind::GmmY => "gmm_Y",
            EstimatorKind::GmmYToep => "gmm_Y_toep",
        }
    }

    /// Whether the estimator is defined for a scenario. The genie covariance
    /// and the raw-observation baselines only exist for spatial (fully
    /// observed) channels; the interpolation-based and grid-structured
    /// variants need the OFDM time-frequency grid.
    pub fn supports(self, scenario: Scenario) -> bool {
        match self {
            EstimatorKind::Genie | EstimatorKind::Ls | EstimatorKind::GmmMismatch => {
                scenario == Scenario::Spatial
            }
            EstimatorKind::LinInt
            | EstimatorKind::SampCovLinInt
            | EstimatorKind::GmmLinInt
            | EstimatorKind::GmmYToep => scenario == Scenario::Ofdm,
            EstimatorKind::GmmH | EstimatorKind::GmmY => true,
        }
    }

    /// True for variants that fit a model from training data (as opposed to
    /// closed-form per-sample rules).
    pub fn needs_training(self) -> bool {
        !matches!(
            self,
            EstimatorKind::Genie | EstimatorKind::Ls | EstimatorKind::LinInt
        )
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = EstimatorKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "unknown estimator '{s}' (registered: {})",
                    names.join(", ")
                ))
            })
    }
}

/// One NMSE measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub scenario: Scenario,
    pub estimator: EstimatorKind,
    pub snr_db: f64,
    pub num_pilots: usize,
    pub nmse: f64,
    pub l_test: usize,
    pub seed: u64,
}

/// CSV header shared by every report.
pub const CSV_HEADER: &str = "scenario,estimator,snr_db,num_pilots,nmse,l_test,seed";

/// A collection of NMSE measurements with canonical CSV serialization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Sorts rows by (scenario, estimator, snr, pilot count) — and by the
    /// remaining fields as tie-breakers — so any generation order serializes
    /// to the same bytes.
    pub fn sort_canonical(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.scenario.name(), a.estimator.name())
                .cmp(&(b.scenario.name(), b.estimator.name()))
                .then(a.snr_db.total_cmp(&b.snr_db))
                .then(a.num_pilots.cmp(&b.num_pilots))
                .then(a.l_test.cmp(&b.l_test))
                .then(a.seed.cmp(&b.seed))
                .then(a.nmse.total_cmp(&b.nmse))
        });
    }

    /// Serializes to CSV (header plus one line per row, trailing newline).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.scenario, r.estimator, r.snr_db, r.num_pilots, r.nmse, r.l_test, r.seed
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Parses a CSV produced by [`EvalReport::to_csv_string`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            other => {
                return Err(Error::Format(format!(
                    "{}: expected header '{CSV_HEADER}', got '{}'",
                    path.display(),
                    other.unwrap_or("")
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Format(format!(
                    "{} line {}: expected 7 fields, got {}",
                    path.display(),
                    i + 2,
                    fields.len()
                )));
            }
            let bad = |what: &str| {
                Error::Format(format!("{} line {}: bad {what}", path.display(), i + 2))
            };
            rows.push(EvalRow {
                scenario: fields[0].parse().map_err(|_| bad("scenario"))?,
                estimator: fields[1].parse().map_err(|_| bad("estimator"))?,
                snr_db: fields[2].parse().map_err(|_| bad("snr_db"))?,
                num_pilots: fields[3].parse().map_err(|_| bad("num_pilots"))?,
                nmse: fields[4].parse().map_err(|_| bad("nmse"))?,
                l_test: fields[5].parse().map_err(|_| bad("l_test"))?,
                seed: fields[6].parse().map_err(|_| bad("seed"))?,
            });
        }
        Ok(EvalReport { rows })
    }

    /// Appends another report's rows and restores the canonical order.
    pub fn merge(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
        self.sort_canonical();
    }
}

/// `sigma^2` for an SNR in dB under the `E[||h||^2] = N`, `C_n = sigma^2 I`
/// convention.
pub fn snr_db_to_noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Everything one sweep point (pilot configuration x SNR) works with.
struct SweepPoint {
    pattern: SelectionPattern,
    train_h: Vec<ChannelSample>,
    test_h: Vec<ChannelSample>,
    train_obs: ObservationSet,
    test_obs: ObservationSet,
    noise_var: f64,
    train_noise_var: f64,
    /// Interpolated training observations, filled on first use.
    interpolated: Option<Vec<DVector<Complex64>>>,
}

impl SweepPoint {
    fn interpolated(&mut self, dims: (usize, usize)) -> Result<&[DVector<Complex64>]> {
        if self.interpolated.is_none() {
            let xs = self
                .train_obs
                .samples
                .iter()
                .map(|y| lin_interp(y, &self.pattern, dims))
                .collect::<Result<Vec<_>>>()?;
            self.interpolated = Some(xs);
        }
        Ok(self.interpolated.as_deref().unwrap())
    }
}

/// Seed-stream tags; each sweep point derives four disjoint streams from the
/// master seed so sweep points are independent and reproducible.
const TAG_TRAIN_CHANNELS: u64 = 1;
const TAG_TEST_CHANNELS: u64 = 2;
const TAG_TRAIN_NOISE: u64 = 3;
const TAG_TEST_NOISE: u64 = 4;

fn sweep_stream(master: u64, tag: u64, snr_db: f64, pilots: (usize, usize)) -> u64 {
    derive_seed(
        master,
        &[tag, snr_db.to_bits(), pilots.0 as u64, pilots.1 as u64],
    )
}

fn generate_channels(config: &ExperimentConfig, count: usize, seed: u64) -> Result<Vec<ChannelSample>> {
    match config.scenario {
        Scenario::Spatial => {
            generate_spatial_samples(&SpatialParams::new(config.num_antennas), count, seed)
        }
        Scenario::Ofdm => generate_ofdm_samples(
            &OfdmParams::new(config.num_carriers, config.num_timeslots),
            count,
            seed,
        ),
    }
}

fn build_sweep_point(
    config: &ExperimentConfig,
    pilots: (usize, usize),
    pattern: SelectionPattern,
    snr_db: f64,
) -> Result<SweepPoint> {
    let noise_var = snr_db_to_noise_var(snr_db);
    let train_noise_var = config
        .train_snr_db
        .map(snr_db_to_noise_var)
        .unwrap_or(noise_var);
    let stream = |tag| sweep_stream(config.seed, tag, snr_db, pilots);
    let train_h = generate_channels(config, config.l_train, stream(TAG_TRAIN_CHANNELS))?;
    let test_h = generate_channels(config, config.l_test, stream(TAG_TEST_CHANNELS))?;
    let train_obs =
        observe_samples(&train_h, &pattern, train_noise_var, stream(TAG_TRAIN_NOISE))?;
    let test_obs = observe_samples(&test_h, &pattern, noise_var, stream(TAG_TEST_NOISE))?;
    Ok(SweepPoint {
        pattern,
        train_h,
        test_h,
        train_obs,
        test_obs,
        noise_var,
        train_noise_var,
        interpolated: None,
    })
}

/// Fits the channel-domain mixture prior a trained estimator variant uses.
fn fit_prior(
    kind: EstimatorKind,
    point: &mut SweepPoint,
    config: &ExperimentConfig,
) -> Result<GmmParams> {
    let mut fit_config = FitConfig::new(config.components);
    fit_config.max_iters = config.max_iters;
    fit_config.rel_loglik_tol = config.rel_tol;
    fit_config.seed = config.seed;
    let dims = config.dims();
    match kind {
        EstimatorKind::SampCovLinInt => {
            let (mean, cov) = fit_global_sample_cov(point.interpolated(dims)?)?;
            GmmParams::new(vec![1.0], vec![mean], vec![cov])
        }
        EstimatorKind::GmmH => {
            let channels: Vec<DVector<Complex64>> =
                point.train_h.iter().map(|s| s.h.clone()).collect();
            Ok(em_fit_classical(&channels, &fit_config)?.gmm)
        }
        // The mismatched baseline treats noisy observations as if they were
        // clean channels: a plain fit on the raw data, used directly as the
        // channel prior.
        EstimatorKind::GmmMismatch => {
            Ok(em_fit_classical(&point.train_obs.samples, &fit_config)?.gmm)
        }
        EstimatorKind::GmmLinInt => {
            Ok(em_fit_classical(point.interpolated(dims)?, &fit_config)?.gmm)
        }
        EstimatorKind::GmmY => {
            if point.pattern.is_full() {
                Ok(fit_noisy(&point.train_obs.samples, point.train_noise_var, &fit_config)?.gmm)
            } else {
                Ok(fit_noisy_missing(
                    &point.train_obs.samples,
                    &point.pattern,
                    point.train_noise_var,
                    dims,
                    StructureSpec::Full,
                    &fit_config,
                )?
                .gmm)
            }
        }
        EstimatorKind::GmmYToep => Ok(fit_noisy_missing(
            &point.train_obs.samples,
            &point.pattern,
            point.train_noise_var,
            dims,
            StructureSpec::BlockToeplitz,
            &fit_config,
        )?
        .gmm),
        EstimatorKind::Genie | EstimatorKind::Ls | EstimatorKind::LinInt => Err(
            Error::InvalidParameter(format!("estimator '{kind}' fits no model")),
        ),
    }
}

/// Evaluates one estimator variant over a sweep point's test set.
fn evaluate_estimator(
    kind: EstimatorKind,
    point: &mut SweepPoint,
    config: &ExperimentConfig,
) -> Result<f64> {
    let dims = config.dims();
    let estimates: Vec<DVector<Complex64>> = match kind {
        EstimatorKind::Genie => point
            .test_obs
            .samples
            .iter()
            .zip(&point.test_h)
            .map(|(y, s)| {
                estimate_genie(y, &point.pattern, point.noise_var, s.genie_cov.as_ref())
            })
            .collect::<Result<_>>()?,
        EstimatorKind::Ls => point
            .test_obs
            .samples
            .iter()
            .map(|y| estimate_ls(y, &point.pattern))
            .collect::<Result<_>>()?,
        EstimatorKind::LinInt => point
            .test_obs
            .samples
            .iter()
            .map(|y| lin_interp(y, &point.pattern, dims))
            .collect::<Result<_>>()?,
        _ => {
            let prior = fit_prior(kind, point, config)?;
            let estimator = GmmEstimator::new(&prior, &point.pattern, point.noise_var)?;
            point
                .test_obs
                .samples
                .iter()
                .map(|y| estimator.estimate(y))
                .collect::<Result<_>>()?
        }
    };
    let truths: Vec<DVector<Complex64>> = point.test_h.iter().map(|s| s.h.clone()).collect();
    let value = nmse(&estimates, &truths)?;
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "estimator '{kind}' produced a non-finite NMSE"
        )));
    }
    Ok(value)
}

/// Runs the full sweep described by `config`, invoking `progress` after each
/// completed measurement. Rows come back in canonical order; a rerun with the
/// same config yields an identical report.
pub fn run_experiment_traced(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&EvalRow),
) -> Result<EvalReport> {
    config.validate()?;
    // The spatial scenario observes every antenna: a single full-pattern
    // pilot point, tagged (0, 0) in the seed stream.
    let pilot_points: Vec<((usize, usize), SelectionPattern)> = match config.scenario {
        Scenario::Spatial => vec![((0, 0), SelectionPattern::full(config.num_antennas))],
        Scenario::Ofdm => config
            .pilots
            .iter()
            .map(|&(t, f)| {
                Ok((
                    (t, f),
                    make_diamond_pattern(config.num_carriers, config.num_timeslots, t, f)?,
                ))
            })
            .collect::<Result<_>>()?,
    };
    let mut report = EvalReport::default();
    for (pilots, pattern) in pilot_points {
        for &snr_db in &config.snr_db {
            let mut point = build_sweep_point(config, pilots, pattern.clone(), snr_db)?;
            for &kind in &config.estimators {
                let value = evaluate_estimator(kind, &mut point, config)?;
                let row = EvalRow {
                    scenario: config.scenario,
                    estimator: kind,
                    snr_db,
                    num_pilots: point.pattern.num_observed(),
                    nmse: value,
                    l_test: config.l_test,
                    seed: config.seed,
                };
                progress(&row);
                report.rows.push(row);
            }
        }
    }
    report.sort_canonical();
    Ok(report)
}

/// [`run_experiment_traced`] without progress reporting.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport> {
    run_experiment_traced(config, |_| {})
}

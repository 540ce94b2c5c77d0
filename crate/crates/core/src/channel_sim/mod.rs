//! Synthetic channel generation and the pilot observation model.
//!
//! Two scenarios are supported:
//!
//! * **Spatial**: a base station with an `N`-antenna uniform linear array.
//!   Each sample draws cluster center angles inside a sector, builds the
//!   per-sample covariance from a Laplacian angular power density, and draws
//!   the channel from that covariance ([`spatial_covariance`],
//!   [`sample_spatial_channel`]).
//! * **OFDM**: a doubly selective single-antenna link on an `N_c x N_t`
//!   time-frequency grid, synthesized as a sum of propagation paths with
//!   random delays, Doppler shifts, and gains ([`sample_ofdm_channel`]).
//!
//! Pilot observations follow `y = A h + n`: a selection of grid entries plus
//! circularly symmetric complex noise with per-entry variance `sigma^2`
//! ([`SelectionPattern`], [`observe`], [`make_diamond_pattern`]).
//!
//! Randomness is per-sample: each sample `i` of a batch uses an RNG derived
//! from `(stream_seed, i)`, so datasets do not depend on batching.

mod dataset;
mod ofdm;
mod pattern;
mod spatial;

pub use dataset::{read_dataset, write_dataset, Dataset};
pub use ofdm::sample_ofdm_channel;
pub use pattern::make_diamond_pattern;
pub use spatial::{sample_spatial_channel, spatial_covariance, spatial_covariance_at};

use crate::rng::sample_rng;
use crate::{Complex64, Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

/// Which generator produced a channel sample or dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Multi-antenna spatial channels.
    Spatial,
    /// Time-frequency OFDM channels.
    Ofdm,
}

impl Scenario {
    /// Canonical lowercase name used in config files and reports.
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Spatial => "spatial",
            Scenario::Ofdm => "ofdm",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(Scenario::Spatial),
            "ofdm" => Ok(Scenario::Ofdm),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected 'spatial' or 'ofdm')"
            ))),
        }
    }
}

/// Parameters of the spatial (multi-antenna) scenario.
#[derive(Clone, Debug)]
pub struct SpatialParams {
    /// Antennas in the uniform linear array (`N`).
    pub num_antennas: usize,
    /// Propagation clusters per sample; cluster centers are drawn
    /// independently and their angular densities averaged with equal weight.
    pub num_clusters: usize,
    /// Half-width of the served sector in radians; cluster center angles are
    /// uniform on `[-sector_halfwidth, +sector_halfwidth]`.
    pub sector_halfwidth: f64,
    /// Scale of the Laplacian angular power density (radians).
    pub angular_spread: f64,
    /// Number of grid angles used to discretize the density.
    pub grid_points: usize,
}

impl SpatialParams {
    /// Defaults: one cluster, 60 degree sector half-width, 2 degree spread,
    /// 256 grid points.
    pub fn new(num_antennas: usize) -> Self {
        SpatialParams {
            num_antennas,
            num_clusters: 1,
            sector_halfwidth: FRAC_PI_3,
            angular_spread: 2.0 * PI / 180.0,
            grid_points: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::InvalidParameter("num_antennas must be >= 1".into()));
        }
        if self.num_clusters == 0 {
            return Err(Error::InvalidParameter("num_clusters must be >= 1".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidParameter("grid_points must be >= 2".into()));
        }
        if !(self.sector_halfwidth > 0.0 && self.sector_halfwidth <= FRAC_PI_2) {
            return Err(Error::InvalidParameter(
                "sector_halfwidth must lie in (0, pi/2]".into(),
            ));
        }
        if !(self.angular_spread > 0.0 && self.angular_spread.is_finite()) {
            return Err(Error::InvalidParameter("angular_spread must be > 0".into()));
        }
        Ok(())
    }
}

/// Parameters of the OFDM (time-frequency) scenario.
#[derive(Clone, Debug)]
pub struct OfdmParams {
    /// Subcarriers per time slot (`N_c`).
    pub carriers: usize,
    /// Time slots (`N_t`).
    pub timeslots: usize,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing: f64,
    /// OFDM symbol duration in seconds.
    pub symbol_duration: f64,
    /// Carrier frequency in Hz (sets the Doppler scale).
    pub carrier_freq: f64,
    /// Number of propagation paths per sample (`P`).
    pub num_paths: usize,
    /// Mean of the exponential path-delay distribution in seconds; draws are
    /// clipped at five times the mean.
    pub delay_spread: f64,
    /// Terminal velocity range in km/h, sampled uniformly per sample.
    pub velocity_range: (f64, f64),
}

impl OfdmParams {
    /// Defaults: a 12 x 14 resource block at 15 kHz spacing, 2.1 GHz carrier,
    /// 20 paths with 1 microsecond delay spread, velocities 3-130 km/h.
    pub fn new(carriers: usize, timeslots: usize) -> Self {
        OfdmParams {
            carriers,
            timeslots,
            subcarrier_spacing: 15_000.0,
            symbol_duration: 1.0 / 14_000.0,
            carrier_freq: 2.1e9,
            num_paths: 20,
            delay_spread: 1e-6,
            velocity_range: (3.0, 130.0),
        }
    }

    /// Total grid dimension `N = N_c * N_t`.
    pub fn dim(&self) -> usize {
        self.carriers * self.timeslots
    }

    pub fn validate(&self) -> Result<()> {
        if self.carriers == 0 || self.timeslots == 0 {
            return Err(Error::InvalidParameter(
                "carriers and timeslots must be >= 1".into(),
            ));
        }
        if self.num_paths == 0 {
            return Err(Error::InvalidParameter("num_paths must be >= 1".into()));
        }
        for (name, v) in [
            ("subcarrier_spacing", self.subcarrier_spacing),
            ("symbol_duration", self.symbol_duration),
            ("carrier_freq", self.carrier_freq),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        if !(self.delay_spread >= 0.0 && self.delay_spread.is_finite()) {
            return Err(Error::InvalidParameter("delay_spread must be >= 0".into()));
        }
        let (lo, hi) = self.velocity_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::InvalidParameter(
                "velocity_range must satisfy 0 <= min <= max".into(),
            ));
        }
        Ok(())
    }
}

/// One ground-truth channel realization.
#[derive(Clone, Debug)]
pub struct ChannelSample {
    /// The channel vector `h` of length `N`.
    pub h: DVector<Complex64>,
    /// The per-sample covariance the channel was drawn from, kept for
    /// genie-aided baselines. Only the spatial generator provides it.
    pub genie_cov: Option<DMatrix<Complex64>>,
    pub scenario: Scenario,
}

/// An ordered selection of observed entries out of an `N`-dimensional vector
/// (the rows of the selection matrix `A`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionPattern {
    observed: Vec<usize>,
    total_dim: usize,
}

impl SelectionPattern {
    /// Builds a pattern from strictly increasing indices in `[0, total_dim)`.
    pub fn new(observed: Vec<usize>, total_dim: usize) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::InvalidParameter(
                "selection pattern must observe at least one entry".into(),
            ));
        }
        for pair in observed.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidParameter(
                    "selection indices must be strictly increasing".into(),
                ));
            }
        }
        if *observed.last().unwrap() >= total_dim {
            return Err(Error::InvalidParameter(format!(
                "selection index {} out of range for dimension {total_dim}",
                observed.last().unwrap()
            )));
        }
        Ok(SelectionPattern { observed, total_dim })
    }

    /// The pattern observing every entry.
    pub fn full(total_dim: usize) -> Self {
        SelectionPattern {
            observed: (0..total_dim).collect(),
            total_dim,
        }
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    /// The unobserved indices, in increasing order (the rows of `A-bar`).
    pub fn complement(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.total_dim - self.observed.len());
        let mut it = self.observed.iter().peekable();
        for i in 0..self.total_dim {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    pub fn is_full(&self) -> bool {
        self.observed.len() == self.total_dim
    }

    pub fn num_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Restricts `v` to the observed entries (computes `A v`).
    pub fn gather(&self, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if v.len() != self.total_dim {
            return Err(Error::DimensionMismatch(format!(
                "pattern expects dimension {}, got vector of length {}",
                self.total_dim,
                v.len()
            )));
        }
        Ok(DVector::from_iterator(
            self.observed.len(),
            self.observed.iter().map(|&i| v[i]),
        ))
    }
}

/// A noisy observation `y = A h + n` of one channel sample.
#[derive(Clone, Debug)]
pub struct PilotObservation {
    /// Observed entries plus noise, length `pattern.num_observed()`.
    pub y: DVector<Complex64>,
    pub pattern: SelectionPattern,
    /// Per-entry complex noise variance `sigma^2`.
    pub noise_var: f64,
}

/// A batch of observations sharing one pattern and noise level.
#[derive(Clone, Debug)]
pub struct ObservationSet {
    pub pattern: SelectionPattern,
    pub noise_var: f64,
    pub samples: Vec<DVector<Complex64>>,
}

/// Applies the observation model to one channel vector.
pub fn observe(
    h: &DVector<Complex64>,
    pattern: &SelectionPattern,
    noise_var: f64,
    rng: &mut impl rand::Rng,
) -> Result<PilotObservation> {
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidParameter("noise_var must be >= 0".into()));
    }
    let mut y = pattern.gather(h)?;
    if noise_var > 0.0 {
        let s = noise_var.sqrt();
        for v in y.iter_mut() {
            *v += crate::rng::standard_complex(rng) * s;
        }
    }
    Ok(PilotObservation {
        y,
        pattern: pattern.clone(),
        noise_var,
    })
}

/// Generates `count` spatial channel samples; sample `i` is a deterministic
/// function of `(stream_seed, i)`.
pub fn generate_spatial_samples(
    params: &SpatialParams,
    count: usize,
    stream_seed: u64,
) -> Result<Vec<ChannelSample>> {
    params.validate()?;
    (0..count)
        .map(|i| {
            let mut rng = sample_rng(stream_seed, i as u64);
            let cov = spatial_covariance(params, &mut rng)?;
            sample_spatial_channel(&cov, &mut rng)
        })
        .collect()
}

/// Generates `count` OFDM channel samples; sample `i` is a deterministic
/// function of `(stream_seed, i)`.
pub fn generate_ofdm_samples(
    params: &OfdmParams,
    count: usize,
    stream_seed: u64,
) -> Result<Vec<ChannelSample>> {
    params.validate()?;
    (0..count)
        .map(|i| {
            let mut rng = sample_rng(stream_seed, i as u64);
            sample_ofdm_channel(params, &mut rng)
        })
        .collect()
}

/// Observes every sample through the same pattern and noise level, with
/// per-sample noise RNGs derived from `(stream_seed, i)`.
pub fn observe_samples(
    samples: &[ChannelSample],
    pattern: &SelectionPattern,
    noise_var: f64,
    stream_seed: u64,
) -> Result<ObservationSet> {
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let mut rng = sample_rng(stream_seed, i as u64);
        out.push(observe(&s.h, pattern, noise_var, &mut rng)?.y);
    }
    Ok(ObservationSet {
        pattern: pattern.clone(),
        noise_var,
        samples: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_rejects_unsorted_and_out_of_range() {
        assert!(SelectionPattern::new(vec![0, 2, 2], 4).is_err());
        assert!(SelectionPattern::new(vec![2, 0], 4).is_err());
        assert!(SelectionPattern::new(vec![0, 4], 4).is_err());
        assert!(SelectionPattern::new(vec![], 4).is_err());
        assert!(SelectionPattern::new(vec![0, 3], 4).is_ok());
    }

    #[test]
    fn complement_partitions_indices() {
        let p = SelectionPattern::new(vec![1, 4, 5], 7).unwrap();
        assert_eq!(p.complement(), vec![0, 2, 3, 6]);
        let full = SelectionPattern::full(3);
        assert!(full.is_full());
        assert!(full.complement().is_empty());
    }

    #[test]
    fn observe_noiseless_full_is_identity() {
        let h = DVector::from_fn(5, |i, _| Complex64::new(i as f64, -(i as f64)));
        let mut rng = sample_rng(7, 0);
        let obs = observe(&h, &SelectionPattern::full(5), 0.0, &mut rng).unwrap();
        assert_eq!(obs.y, h);
    }

    #[test]
    fn observe_noiseless_singleton_picks_entry() {
        let h = DVector::from_fn(5, |i, _| Complex64::new(i as f64 + 1.0, 0.0));
        let p = SelectionPattern::new(vec![0], 5).unwrap();
        let mut rng = sample_rng(7, 0);
        let obs = observe(&h, &p, 0.0, &mut rng).unwrap();
        assert_eq!(obs.y.len(), 1);
        assert_eq!(obs.y[0], h[0]);
    }

    #[test]
    fn observe_noise_has_requested_variance() {
        // sigma^2 = 1 on a fixed vector: the empirical per-entry complex
        // variance over many repeats must come out near 1.
        let h = DVector::from_element(8, Complex64::new(1.0, 2.0));
        let p = SelectionPattern::full(8);
        let reps = 100_000usize;
        let mut acc = 0.0;
        for i in 0..reps {
            let mut rng = sample_rng(99, i as u64);
            let obs = observe(&h, &p, 1.0, &mut rng).unwrap();
            for (a, b) in obs.y.iter().zip(h.iter()) {
                acc += (a - b).norm_sqr();
            }
        }
        let var = acc / (reps * 8) as f64;
        assert!((var - 1.0).abs() < 0.05, "empirical variance {var}");
    }

    #[test]
    fn observe_is_reproducible() {
        let params = SpatialParams::new(6);
        let samples = generate_spatial_samples(&params, 4, 11).unwrap();
        let p = SelectionPattern::new(vec![0, 2, 5], 6).unwrap();
        let a = observe_samples(&samples, &p, 0.5, 13).unwrap();
        let b = observe_samples(&samples, &p, 0.5, 13).unwrap();
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn generation_is_independent_of_batching() {
        let params = SpatialParams::new(4);
        let all = generate_spatial_samples(&params, 6, 21).unwrap();
        // Regenerating a prefix must reproduce the same leading samples.
        let prefix = generate_spatial_samples(&params, 3, 21).unwrap();
        for (a, b) in prefix.iter().zip(all.iter()) {
            assert_eq!(a.h, b.h);
        }
    }
}

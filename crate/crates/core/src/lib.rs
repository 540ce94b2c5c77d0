//! Gaussian mixture models for wireless channel estimation, learned from
//! imperfect training data.
//!
//! A base station never observes clean channel vectors: training data comes
//! from pilot transmissions, so every available sample is noisy and usually
//! covers only a subset of the resource grid. This crate fits a complex
//! Gaussian mixture model (GMM) to the *channel* distribution directly from
//! such observations, and then uses the fitted mixture as a prior for MMSE
//! channel estimation.
//!
//! The pieces:
//!
//! * [`channel_sim`] — synthetic channel generators (spatial multi-antenna
//!   channels and doubly selective OFDM time-frequency channels), pilot
//!   selection patterns, noisy observation, and a binary dataset format.
//! * [`gmm_core`] — mixture parameters, complex Gaussian densities,
//!   responsibilities, classical EM, PSD projection, and block-Toeplitz
//!   covariance structure for time-frequency grids.
//! * [`adapted_em`] — EM variants that account for the observation model:
//!   noise-aware fitting from full noisy samples, and fitting from noisy,
//!   partially observed samples with per-component imputation.
//! * [`estimators`] — conditional-mean channel estimators built from a fitted
//!   mixture, plus LMMSE / least-squares / interpolation baselines.
//! * [`eval`] — Monte Carlo evaluation: experiment configuration, normalized
//!   mean squared error, and CSV reporting.
//!
//! # Conventions
//!
//! Channel vectors live in `C^N` and are represented as
//! `nalgebra::DVector<Complex64>`; covariances as `DMatrix<Complex64>`.
//! All densities are circularly symmetric complex Gaussians. Signal power is
//! normalized so that `E[||h||^2] = N`; an SNR of `s` dB therefore
//! corresponds to noise variance `10^(-s/10)` per entry.
//!
//! # Determinism
//!
//! Every randomized operation takes either an explicit RNG or an explicit
//! seed. Sample generation derives one RNG per sample index from a stream
//! seed (see [`rng`]), so datasets are reproducible and independent of
//! batching. Fits and experiment runs are deterministic functions of their
//! inputs and seeds; rerunning an experiment with the same configuration
//! produces a byte-identical CSV report.

pub mod adapted_em;
pub mod channel_sim;
mod error;
pub mod estimators;
pub mod eval;
pub mod gmm_core;
pub(crate) mod io_util;
pub(crate) mod linalg;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;

//! `gmce` — command-line harness for Gaussian mixture channel estimation:
//! dataset generation, model fitting, estimation, NMSE sweeps, and report
//! merging.
//!
//! Exit codes: 0 on success, 2 on configuration/usage errors (bad flags,
//! malformed config or input files, incompatible dimensions), 1 on runtime
//! failures.

use clap::{Args, Parser, Subcommand};
use gmce_core::adapted_em::{fit_noisy, fit_noisy_missing, StructureSpec};
use gmce_core::channel_sim::{
    generate_ofdm_samples, generate_spatial_samples, make_diamond_pattern, observe_samples,
    read_dataset, write_dataset, Dataset, ObservationSet, OfdmParams, Scenario, SelectionPattern,
    SpatialParams,
};
use gmce_core::estimators::{fit_global_sample_cov, lin_interp, GmmEstimator};
use gmce_core::eval::{
    run_experiment_traced, snr_db_to_noise_var, EstimatorKind, EvalReport, ExperimentConfig,
};
use gmce_core::gmm_core::{em_fit_classical, read_model, write_model, FitConfig, GmmParams};
use gmce_core::rng::derive_seed;
use gmce_core::{Complex64, Error, Result};
use nalgebra::DVector;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gmce",
    version,
    about = "Gaussian mixture channel estimation workbench"
)]
struct Cli {
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    /// Override the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a channel or observation dataset file.
    Generate(GenerateArgs),
    /// Fit one model variant from a dataset and write a model file.
    Fit(FitArgs),
    /// Apply a model file to an observation dataset and write the estimates.
    Estimate(EstimateArgs),
    /// Run a full NMSE experiment from a config file and write a CSV report.
    Run(RunArgs),
    /// Merge CSV reports into one canonical file.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Experiment config supplying the scenario and its parameters.
    #[arg(long)]
    config: PathBuf,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
    /// Number of samples (defaults to l_train, or l_test with --test).
    #[arg(long)]
    count: Option<usize>,
    /// Use the test-set random streams instead of the training streams.
    #[arg(long)]
    test: bool,
    /// Write noisy observations instead of ground-truth channels.
    #[arg(long)]
    observe: bool,
    /// Observation SNR in dB (required with --observe).
    #[arg(long)]
    snr_db: Option<f64>,
    /// Diamond pilot configuration TxF for OFDM observations, e.g. 3x6
    /// (omit for full observation).
    #[arg(long)]
    pilots: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    /// Experiment config supplying component count, iteration caps, and the
    /// expected grid dimensions.
    #[arg(long)]
    config: PathBuf,
    /// Input dataset (channels for gmm_H, observations otherwise).
    #[arg(long)]
    input: PathBuf,
    /// Output model path.
    #[arg(long)]
    out: PathBuf,
    /// Which model variant to train: gmm_H, gmm_mismatch, gmm_lin_int,
    /// gmm_Y, gmm_Y_toep, or samp_cov_lin_int.
    #[arg(long)]
    estimator: String,
    /// Override the noise variance implied by the observation file header.
    #[arg(long)]
    snr_db: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Model file produced by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Observation dataset to estimate from.
    #[arg(long)]
    input: PathBuf,
    /// Output dataset of channel estimates.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path (falls back to the config's `out` key).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Merged CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Input CSV files to merge.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(if e.is_usage() { 2 } else { 1 });
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => generate(args, cli.seed, cli.quiet),
        Command::Fit(args) => fit(args, cli.seed, cli.quiet),
        Command::Estimate(args) => estimate(args, cli.quiet),
        Command::Run(args) => run(args, cli.seed, cli.quiet),
        Command::Report(args) => report(args, cli.quiet),
    }
}

/// Stream tags for `generate`; disjoint from each other so channels, test
/// channels, and their observation noises never share randomness.
const TAG_TRAIN_CHANNELS: u64 = 1;
const TAG_TEST_CHANNELS: u64 = 2;
const TAG_TRAIN_NOISE: u64 = 3;
const TAG_TEST_NOISE: u64 = 4;

fn parse_pilots(value: &str) -> Result<(usize, usize)> {
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad pilot configuration '{value}' (want TxF)")))
    };
    let (t, f) = value
        .split_once('x')
        .ok_or_else(|| Error::Config(format!("bad pilot configuration '{value}' (want TxF)")))?;
    Ok((parse(t)?, parse(f)?))
}

fn generate_channels(
    config: &ExperimentConfig,
    count: usize,
    stream: u64,
) -> Result<Vec<gmce_core::channel_sim::ChannelSample>> {
    match config.scenario {
        Scenario::Spatial => {
            generate_spatial_samples(&SpatialParams::new(config.num_antennas), count, stream)
        }
        Scenario::Ofdm => generate_ofdm_samples(
            &OfdmParams::new(config.num_carriers, config.num_timeslots),
            count,
            stream,
        ),
    }
}

fn generate(args: GenerateArgs, seed: Option<u64>, quiet: bool) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let count = args
        .count
        .unwrap_or(if args.test { config.l_test } else { config.l_train });
    let (channel_tag, noise_tag) = if args.test {
        (TAG_TEST_CHANNELS, TAG_TEST_NOISE)
    } else {
        (TAG_TRAIN_CHANNELS, TAG_TRAIN_NOISE)
    };
    let samples = generate_channels(&config, count, derive_seed(config.seed, &[channel_tag]))?;
    let dims = config.dims();

    let dataset = if args.observe {
        let snr_db = args.snr_db.ok_or_else(|| {
            Error::Config("--observe needs --snr-db to set the noise level".into())
        })?;
        let pattern = match (config.scenario, &args.pilots) {
            (Scenario::Spatial, Some(_)) => {
                return Err(Error::Config(
                    "--pilots only applies to the ofdm scenario".into(),
                ))
            }
            (Scenario::Spatial, None) => SelectionPattern::full(config.num_antennas),
            (Scenario::Ofdm, Some(p)) => {
                let (t, f) = parse_pilots(p)?;
                make_diamond_pattern(config.num_carriers, config.num_timeslots, t, f)?
            }
            (Scenario::Ofdm, None) => SelectionPattern::full(dims.0 * dims.1),
        };
        let set = observe_samples(
            &samples,
            &pattern,
            snr_db_to_noise_var(snr_db),
            derive_seed(config.seed, &[noise_tag]),
        )?;
        Dataset::Observations { dims, set }
    } else {
        if args.snr_db.is_some() || args.pilots.is_some() {
            return Err(Error::Config(
                "--snr-db and --pilots require --observe".into(),
            ));
        }
        Dataset::from_channel_samples(dims, &samples)?
    };

    write_dataset(&args.out, &dataset)?;
    if !quiet {
        eprintln!(
            "wrote {} {} records to {}",
            dataset.len(),
            if args.observe { "observation" } else { "channel" },
            args.out.display()
        );
    }
    Ok(())
}

fn fit(args: FitArgs, seed: Option<u64>, quiet: bool) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let kind: EstimatorKind = args.estimator.parse()?;
    if !kind.needs_training() {
        return Err(Error::Config(format!(
            "estimator '{kind}' is a closed-form rule; nothing to fit"
        )));
    }
    let dataset = read_dataset(&args.input)?;
    if dataset.dims() != config.dims() {
        return Err(Error::Config(format!(
            "dataset grid {:?} disagrees with the config's {:?}",
            dataset.dims(),
            config.dims()
        )));
    }
    let mut fit_config = FitConfig::new(config.components);
    fit_config.max_iters = config.max_iters;
    fit_config.rel_loglik_tol = config.rel_tol;
    fit_config.seed = config.seed;
    let dims = config.dims();

    let gmm = match (&dataset, kind) {
        (Dataset::Channels { samples, .. }, EstimatorKind::GmmH) => {
            em_fit_classical(samples, &fit_config)?.gmm
        }
        (Dataset::Channels { .. }, _) => {
            return Err(Error::Config(format!(
                "estimator '{kind}' trains on observations, but {} holds channels",
                args.input.display()
            )))
        }
        (Dataset::Observations { .. }, EstimatorKind::GmmH) => {
            return Err(Error::Config(format!(
                "estimator 'gmm_H' trains on ground-truth channels, but {} holds observations",
                args.input.display()
            )))
        }
        (Dataset::Observations { set, .. }, _) => {
            let noise_var = args
                .snr_db
                .map(snr_db_to_noise_var)
                .unwrap_or(set.noise_var);
            fit_observation_model(kind, set, noise_var, dims, &fit_config)?
        }
    };
    write_model(&args.out, &gmm)?;
    if !quiet {
        eprintln!(
            "fitted {kind} ({} components over {} dims) -> {}",
            gmm.num_components(),
            gmm.dim(),
            args.out.display()
        );
    }
    Ok(())
}

fn fit_observation_model(
    kind: EstimatorKind,
    set: &ObservationSet,
    noise_var: f64,
    dims: (usize, usize),
    fit_config: &FitConfig,
) -> Result<GmmParams> {
    let interpolate = || -> Result<Vec<DVector<Complex64>>> {
        set.samples
            .iter()
            .map(|y| lin_interp(y, &set.pattern, dims))
            .collect()
    };
    match kind {
        EstimatorKind::GmmMismatch => Ok(em_fit_classical(&set.samples, fit_config)?.gmm),
        EstimatorKind::GmmLinInt => Ok(em_fit_classical(&interpolate()?, fit_config)?.gmm),
        EstimatorKind::SampCovLinInt => {
            let (mean, cov) = fit_global_sample_cov(&interpolate()?)?;
            GmmParams::new(vec![1.0], vec![mean], vec![cov])
        }
        EstimatorKind::GmmY => {
            if set.pattern.is_full() {
                Ok(fit_noisy(&set.samples, noise_var, fit_config)?.gmm)
            } else {
                Ok(fit_noisy_missing(
                    &set.samples,
                    &set.pattern,
                    noise_var,
                    dims,
                    StructureSpec::Full,
                    fit_config,
                )?
                .gmm)
            }
        }
        EstimatorKind::GmmYToep => Ok(fit_noisy_missing(
            &set.samples,
            &set.pattern,
            noise_var,
            dims,
            StructureSpec::BlockToeplitz,
            fit_config,
        )?
        .gmm),
        _ => Err(Error::Config(format!(
            "estimator '{kind}' fits no model from observations"
        ))),
    }
}

fn estimate(args: EstimateArgs, quiet: bool) -> Result<()> {
    let gmm = read_model(&args.model)?;
    let dataset = read_dataset(&args.input)?;
    let (dims, set) = match dataset {
        Dataset::Observations { dims, set } => (dims, set),
        Dataset::Channels { .. } => {
            return Err(Error::Config(format!(
                "{} holds channels; `estimate` needs an observation dataset",
                args.input.display()
            )))
        }
    };
    if gmm.dim() != dims.0 * dims.1 {
        return Err(Error::Config(format!(
            "model dimension {} disagrees with the dataset grid {:?}",
            gmm.dim(),
            dims
        )));
    }
    let estimator = GmmEstimator::new(&gmm, &set.pattern, set.noise_var)?;
    let estimates = set
        .samples
        .iter()
        .map(|y| estimator.estimate(y))
        .collect::<Result<Vec<_>>>()?;
    let scenario = if dims.1 == 1 {
        Scenario::Spatial
    } else {
        Scenario::Ofdm
    };
    let count = estimates.len();
    write_dataset(
        &args.out,
        &Dataset::Channels {
            scenario,
            dims,
            samples: estimates,
        },
    )?;
    if !quiet {
        eprintln!("wrote {count} estimates to {}", args.out.display());
    }
    Ok(())
}

fn run(args: RunArgs, seed: Option<u64>, quiet: bool) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let out = args
        .out
        .or_else(|| config.out.clone())
        .ok_or_else(|| Error::Config("no output path: pass --out or set `out` in the config".into()))?;
    let report = run_experiment_traced(&config, |row| {
        if !quiet {
            eprintln!(
                "{} {} snr={} dB pilots={} nmse={:.6}",
                row.scenario, row.estimator, row.snr_db, row.num_pilots, row.nmse
            );
        }
    })?;
    report.write_csv(&out)?;
    if !quiet {
        eprintln!("wrote {} rows to {}", report.rows.len(), out.display());
    }
    Ok(())
}

fn report(args: ReportArgs, quiet: bool) -> Result<()> {
    let mut merged = EvalReport::default();
    for path in &args.inputs {
        merged.merge(EvalReport::read_csv(path)?);
    }
    merged.write_csv(&args.out)?;
    if !quiet {
        eprintln!(
            "merged {} files ({} rows) into {}",
            args.inputs.len(),
            merged.rows.len(),
            args.out.display()
        );
    }
    Ok(())
}

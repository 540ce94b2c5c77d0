//! Experiment configuration: a flat `key = value` text format describing one
//! NMSE sweep (scenario, model sizes, SNR grid, pilot grid, estimator list).

use super::EstimatorKind;
use crate::channel_sim::{make_diamond_pattern, Scenario};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// A complete description of one experiment run.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Antennas `N` (spatial scenario).
    pub num_antennas: usize,
    /// Carriers `N_c` (OFDM scenario).
    pub num_carriers: usize,
    /// Time slots `N_t` (OFDM scenario).
    pub num_timeslots: usize,
    /// Mixture components `K`.
    pub components: usize,
    pub l_train: usize,
    pub l_test: usize,
    /// SNR grid in dB; each point maps to `sigma^2 = 10^(-snr/10)`.
    pub snr_db: Vec<f64>,
    /// Pilot grid as `(time_slots, freqs_per_slot)` pairs (OFDM only); the
    /// spatial scenario always observes every antenna.
    pub pilots: Vec<(usize, usize)>,
    pub estimators: Vec<EstimatorKind>,
    /// Master seed; every random stream of the run derives from it.
    pub seed: u64,
    /// EM iteration cap for every fitted model.
    pub max_iters: usize,
    /// EM relative log-likelihood convergence tolerance.
    pub rel_tol: f64,
    /// When set, models are trained at this SNR instead of the evaluation
    /// SNR of each sweep point.
    pub train_snr_db: Option<f64>,
    /// Default output path for the CSV report.
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Channel dimension `N` implied by the scenario parameters.
    pub fn dim(&self) -> usize {
        match self.scenario {
            Scenario::Spatial => self.num_antennas,
            Scenario::Ofdm => self.num_carriers * self.num_timeslots,
        }
    }

    /// Grid shape `(N_c, N_t)`; the spatial scenario is a degenerate
    /// `(N, 1)` grid.
    pub fn dims(&self) -> (usize, usize) {
        match self.scenario {
            Scenario::Spatial => (self.num_antennas, 1),
            Scenario::Ofdm => (self.num_carriers, self.num_timeslots),
        }
    }

    /// Checks every invariant that can be checked without running anything:
    /// sizes, SNR grid, estimator/scenario compatibility, and (for OFDM)
    /// that each pilot pair yields a valid diamond pattern.
    pub fn validate(&self) -> Result<()> {
        match self.scenario {
            Scenario::Spatial => {
                if self.num_antennas == 0 {
                    return Err(Error::Config("num_antennas must be positive".into()));
                }
                if !self.pilots.is_empty() {
                    return Err(Error::Config(
                        "pilots only apply to the ofdm scenario; the spatial scenario \
                         observes every antenna"
                            .into(),
                    ));
                }
            }
            Scenario::Ofdm => {
                if self.num_carriers == 0 || self.num_timeslots == 0 {
                    return Err(Error::Config(
                        "num_carriers and num_timeslots must be positive".into(),
                    ));
                }
                if self.pilots.is_empty() {
                    return Err(Error::Config(
                        "the ofdm scenario needs at least one pilots entry (TxF)".into(),
                    ));
                }
                for &(t, f) in &self.pilots {
                    make_diamond_pattern(self.num_carriers, self.num_timeslots, t, f).map_err(
                        |e| Error::Config(format!("pilot configuration {t}x{f}: {e}")),
                    )?;
                }
                for (i, a) in self.pilots.iter().enumerate() {
                    if self.pilots[i + 1..].contains(a) {
                        return Err(Error::Config(format!(
                            "duplicate pilot configuration {}x{}",
                            a.0, a.1
                        )));
                    }
                }
            }
        }
        if self.components == 0 {
            return Err(Error::Config("components must be positive".into()));
        }
        if self.l_test == 0 {
            return Err(Error::Config("l_test must be at least 1".into()));
        }
        if self.l_train < 2 || self.l_train < self.components {
            return Err(Error::Config(
                "l_train must be at least 2 and at least the component count".into(),
            ));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("snr_db must list at least one value".into()));
        }
        for &s in &self.snr_db {
            if !s.is_finite() {
                return Err(Error::Config("snr_db values must be finite".into()));
            }
        }
        for (i, a) in self.snr_db.iter().enumerate() {
            if self.snr_db[i + 1..].contains(a) {
                return Err(Error::Config(format!("duplicate snr_db value {a}")));
            }
        }
        if self.estimators.is_empty() {
            return Err(Error::Config(
                "estimators must list at least one estimator".into(),
            ));
        }
        for (i, a) in self.estimators.iter().enumerate() {
            if self.estimators[i + 1..].contains(a) {
                return Err(Error::Config(format!("duplicate estimator '{a}'")));
            }
        }
        for &e in &self.estimators {
            if !e.supports(self.scenario) {
                return Err(Error::Config(format!(
                    "estimator '{e}' is not defined for the {} scenario",
                    self.scenario
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::Config("rel_tol must be a positive number".into()));
        }
        if let Some(t) = self.train_snr_db {
            if !t.is_finite() {
                return Err(Error::Config("train_snr_db must be finite".into()));
            }
        }
        Ok(())
    }

    /// Parses the flat `key = value` format (one pair per line, `#` starts a
    /// comment) and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: empty key or value",
                    lineno + 1
                )));
            }
            if pairs.insert(key, (lineno + 1, value)).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }

        const KNOWN: &[&str] = &[
            "scenario",
            "num_antennas",
            "num_carriers",
            "num_timeslots",
            "components",
            "l_train",
            "l_test",
            "snr_db",
            "pilots",
            "estimators",
            "seed",
            "max_iters",
            "rel_tol",
            "train_snr_db",
            "out",
        ];
        for (&key, &(lineno, _)) in &pairs {
            if !KNOWN.contains(&key) {
                return Err(Error::Config(format!(
                    "line {lineno}: unknown key '{key}'"
                )));
            }
        }

        let lookup = |key: &str| pairs.get(key).map(|&(_, v)| v);
        let required = |key: &str| {
            lookup(key).ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
        };

        let scenario: Scenario = required("scenario")?.parse()?;
        let config = ExperimentConfig {
            scenario,
            num_antennas: match scenario {
                Scenario::Spatial => parse_num(required("num_antennas")?, "num_antennas")?,
                Scenario::Ofdm => parse_opt_num(lookup("num_antennas"), "num_antennas")?
                    .unwrap_or(0),
            },
            num_carriers: match scenario {
                Scenario::Ofdm => parse_num(required("num_carriers")?, "num_carriers")?,
                Scenario::Spatial => parse_opt_num(lookup("num_carriers"), "num_carriers")?
                    .unwrap_or(0),
            },
            num_timeslots: match scenario {
                Scenario::Ofdm => parse_num(required("num_timeslots")?, "num_timeslots")?,
                Scenario::Spatial => parse_opt_num(lookup("num_timeslots"), "num_timeslots")?
                    .unwrap_or(0),
            },
            components: parse_num(required("components")?, "components")?,
            l_train: parse_num(required("l_train")?, "l_train")?,
            l_test: parse_num(required("l_test")?, "l_test")?,
            snr_db: required("snr_db")?
                .split(',')
                .map(|s| parse_float(s.trim(), "snr_db"))
                .collect::<Result<_>>()?,
            pilots: match lookup("pilots") {
                Some(v) => v
                    .split(',')
                    .map(|s| parse_pilot_pair(s.trim()))
                    .collect::<Result<_>>()?,
                None => Vec::new(),
            },
            estimators: required("estimators")?
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<_>>()?,
            seed: parse_opt_num(lookup("seed"), "seed")?.unwrap_or(0),
            max_iters: parse_opt_num(lookup("max_iters"), "max_iters")?.unwrap_or(200),
            rel_tol: match lookup("rel_tol") {
                Some(v) => parse_float(v, "rel_tol")?,
                None => 1e-6,
            },
            train_snr_db: match lookup("train_snr_db") {
                Some(v) => Some(parse_float(v, "train_snr_db")?),
                None => None,
            },
            out: lookup("out").map(PathBuf::from),
        };
        config.validate()?;
        Ok(config)
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}' as an integer")))
}

fn parse_opt_num<T: std::str::FromStr>(value: Option<&str>, key: &str) -> Result<Option<T>> {
    value.map(|v| parse_num(v, key)).transpose()
}

fn parse_float(value: &str, key: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}' as a number")))
}

/// Parses one `TxF` pilot pair, e.g. `3x6`.
fn parse_pilot_pair(value: &str) -> Result<(usize, usize)> {
    let (t, f) = value.split_once('x').ok_or_else(|| {
        Error::Config(format!(
            "pilot entry '{value}' must look like TxF, e.g. 3x6"
        ))
    })?;
    Ok((
        parse_num(t.trim(), "pilots")?,
        parse_num(f.trim(), "pilots")?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const OFDM_CFG: &str = "\
# Fig.-2 style desk sweep
scenario = ofdm
num_carriers = 12
num_timeslots = 14
components = 4
l_train = 500
l_test = 100
snr_db = 15
pilots = 3x6
estimators = lin_int, gmm_Y_toep
seed = 7
";

    #[test]
    fn parses_a_complete_ofdm_config() {
        let cfg = ExperimentConfig::parse(OFDM_CFG).unwrap();
        assert_eq!(cfg.scenario, Scenario::Ofdm);
        assert_eq!((cfg.num_carriers, cfg.num_timeslots), (12, 14));
        assert_eq!(cfg.dim(), 168);
        assert_eq!(cfg.pilots, vec![(3, 6)]);
        assert_eq!(cfg.snr_db, vec![15.0]);
        assert_eq!(
            cfg.estimators,
            vec![EstimatorKind::LinInt, EstimatorKind::GmmYToep]
        );
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.max_iters, 200);
        assert_eq!(cfg.rel_tol, 1e-6);
        assert!(cfg.train_snr_db.is_none());
        assert!(cfg.out.is_none());
    }

    #[test]
    fn parses_a_spatial_config_with_comments_and_lists() {
        let text = "\
scenario = spatial   # one ULA sector
num_antennas = 16
components = 8
l_train = 1000
l_test = 200
snr_db = 0, 10, 20
estimators = genie, ls, gmm_H
rel_tol = 1e-5
max_iters = 40
out = results.csv
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.scenario, Scenario::Spatial);
        assert_eq!(cfg.snr_db, vec![0.0, 10.0, 20.0]);
        assert_eq!(cfg.estimators.len(), 3);
        assert_eq!(cfg.max_iters, 40);
        assert_eq!(cfg.out.as_deref(), Some(Path::new("results.csv")));
        assert_eq!(cfg.dims(), (16, 1));
    }

    #[test]
    fn rejects_malformed_input() {
        for (needle, text) in [
            ("unknown key", OFDM_CFG.replace("seed = 7", "sed = 7")),
            ("duplicate key", format!("{OFDM_CFG}seed = 8\n")),
            ("expected 'key = value'", OFDM_CFG.replace("seed = 7", "seed")),
            ("missing required key", OFDM_CFG.replace("l_test = 100", "")),
            (
                "cannot parse",
                OFDM_CFG.replace("l_test = 100", "l_test = many"),
            ),
            ("TxF", OFDM_CFG.replace("pilots = 3x6", "pilots = 3by6")),
        ] {
            let err = ExperimentConfig::parse(&text).unwrap_err();
            assert!(err.is_usage(), "{text}");
            assert!(
                err.to_string().contains(needle),
                "expected '{needle}' in '{err}'"
            );
        }
    }

    #[test]
    fn rejects_invalid_combinations() {
        for (needle, text) in [
            (
                "not defined for the ofdm",
                OFDM_CFG.replace("lin_int, gmm_Y_toep", "genie"),
            ),
            (
                "only apply to the ofdm",
                "scenario = spatial\nnum_antennas = 4\ncomponents = 2\nl_train = 100\n\
                 l_test = 10\nsnr_db = 10\npilots = 1x1\nestimators = ls\n"
                    .to_string(),
            ),
            (
                "pilot configuration",
                OFDM_CFG.replace("pilots = 3x6", "pilots = 99x99"),
            ),
            (
                "duplicate pilot configuration",
                OFDM_CFG.replace("pilots = 3x6", "pilots = 3x6, 3x6"),
            ),
            ("l_test", OFDM_CFG.replace("l_test = 100", "l_test = 0")),
            (
                "duplicate snr_db",
                OFDM_CFG.replace("snr_db = 15", "snr_db = 15, 15"),
            ),
            (
                "duplicate estimator",
                OFDM_CFG.replace("lin_int, gmm_Y_toep", "lin_int, lin_int"),
            ),
            (
                "unknown estimator",
                OFDM_CFG.replace("lin_int, gmm_Y_toep", "lin_int, cnn"),
            ),
        ] {
            let err = ExperimentConfig::parse(&text).unwrap_err();
            assert!(err.is_usage(), "{text}");
            assert!(
                err.to_string().contains(needle),
                "expected '{needle}' in '{err}'"
            );
        }
    }

    #[test]
    fn optional_train_snr_is_parsed() {
        let text = format!("{OFDM_CFG}train_snr_db = 20\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.train_snr_db, Some(20.0));
    }
}

//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. List values are
//! comma-separated. Relative paths are resolved against the directory of
//! the configuration file. Unknown keys are rejected, and a file must name
//! a `seed`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::io::MatrixFormat;
use crate::lewis::LewisConfig;
use crate::pipeline::{OneShotParams, Scheme};
use crate::regression::Activation;

const KEYS: &[&str] = &[
    "p",
    "epsilon",
    "tau",
    "seed",
    "constant_c",
    "activation",
    "constrained",
    "fp_tolerance",
    "max_iters",
    "labeled",
    "labeled_labels",
    "unlabeled",
    "oracle_labels",
    "out_dir",
    "format",
    "scheme",
    "beta",
    "seeds",
    "distortion_threshold",
    "distortion_trials",
    "guarantee_threshold",
    "report_guarantee",
    "oracle_restarts",
    "solver_starts",
    "t_values",
    "class_labels",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: f64,
    pub epsilon: f64,
    /// Query budget; derived from the sample-size bound when absent.
    pub tau: Option<usize>,
    pub seed: Option<u64>,
    pub constant_c: f64,
    pub activation: Activation,
    pub constrained: bool,
    pub fp_tolerance: f64,
    pub max_iters: usize,
    pub labeled: Vec<PathBuf>,
    pub labeled_labels: Option<PathBuf>,
    pub unlabeled: Vec<PathBuf>,
    /// One label per line for the unlabeled pool.
    pub oracle_labels: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub format: MatrixFormat,
    pub scheme: Scheme,
    /// Seeds for `verify`; a single run at `seed` when empty.
    pub seeds: Vec<u64>,
    pub distortion_threshold: f64,
    pub distortion_trials: usize,
    pub guarantee_threshold: f64,
    pub report_guarantee: bool,
    pub oracle_restarts: usize,
    pub solver_starts: usize,
    pub t_values: Vec<f64>,
    pub class_labels: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            epsilon: 0.5,
            tau: None,
            seed: None,
            constant_c: 1.0,
            activation: Activation::Identity,
            constrained: true,
            fp_tolerance: 1e-10,
            max_iters: 200,
            labeled: Vec::new(),
            labeled_labels: None,
            unlabeled: Vec::new(),
            oracle_labels: None,
            out_dir: None,
            format: MatrixFormat::Csv,
            scheme: Scheme::Iid,
            seeds: Vec::new(),
            distortion_threshold: 0.5,
            distortion_trials: 500,
            guarantee_threshold: 10.0,
            report_guarantee: false,
            oracle_restarts: crate::oracle::BRUTE_FORCE_RESTARTS,
            solver_starts: 5,
            t_values: vec![1.0, 5.0, 10.0, 25.0, 50.0, 100.0],
            class_labels: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T> {
    raw.parse().map_err(|_| Error::Config {
        path: "config".into(),
        line,
        message: format!("invalid value `{raw}` for `{key}`"),
    })
}

fn parse_bool(key: &str, raw: &str, line: usize) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config {
            path: "config".into(),
            line,
            message: format!("invalid boolean `{raw}` for `{key}`"),
        }),
    }
}

fn split_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl RunConfig {
    /// Loads a file and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let cfg = Self::parse(&text, base).map_err(|e| match e {
            Error::Config { line, message, .. } => Error::Config {
                path: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })?;
        if cfg.seed.is_none() {
            return Err(invalid(format!("{}: `seed` is required", path.display())));
        }
        Ok(cfg)
    }

    /// Parses configuration text. Does not require a seed.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut beta = None;
        let mut scheme_name = None;
        let resolve = |raw: &str| -> PathBuf {
            let p = PathBuf::from(raw);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line.split_once('=').ok_or_else(|| Error::Config {
                path: "config".into(),
                line: n,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            let raw = raw.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config {
                    path: "config".into(),
                    line: n,
                    message: format!("unknown key `{key}`"),
                });
            }
            match key {
                "p" => cfg.p = parse_value(key, raw, n)?,
                "epsilon" => cfg.epsilon = parse_value(key, raw, n)?,
                "tau" => cfg.tau = Some(parse_value(key, raw, n)?),
                "seed" => cfg.seed = Some(parse_value(key, raw, n)?),
                "constant_c" => cfg.constant_c = parse_value(key, raw, n)?,
                "activation" => cfg.activation = parse_value(key, raw, n)?,
                "constrained" => cfg.constrained = parse_bool(key, raw, n)?,
                "fp_tolerance" => cfg.fp_tolerance = parse_value(key, raw, n)?,
                "max_iters" => cfg.max_iters = parse_value(key, raw, n)?,
                "labeled" => cfg.labeled = split_list(raw).map(resolve).collect(),
                "labeled_labels" => cfg.labeled_labels = Some(resolve(raw)),
                "unlabeled" => cfg.unlabeled = split_list(raw).map(resolve).collect(),
                "oracle_labels" => cfg.oracle_labels = Some(resolve(raw)),
                "out_dir" => cfg.out_dir = Some(resolve(raw)),
                "format" => cfg.format = parse_value(key, raw, n)?,
                "scheme" => scheme_name = Some((raw.to_ascii_lowercase(), n)),
                "beta" => beta = Some(parse_value::<f64>(key, raw, n)?),
                "seeds" => {
                    cfg.seeds = split_list(raw)
                        .map(|s| parse_value(key, s, n))
                        .collect::<Result<_>>()?
                }
                "distortion_threshold" => cfg.distortion_threshold = parse_value(key, raw, n)?,
                "distortion_trials" => cfg.distortion_trials = parse_value(key, raw, n)?,
                "guarantee_threshold" => cfg.guarantee_threshold = parse_value(key, raw, n)?,
                "report_guarantee" => cfg.report_guarantee = parse_bool(key, raw, n)?,
                "oracle_restarts" => cfg.oracle_restarts = parse_value(key, raw, n)?,
                "solver_starts" => cfg.solver_starts = parse_value(key, raw, n)?,
                "t_values" => {
                    cfg.t_values = split_list(raw)
                        .map(|s| parse_value(key, s, n))
                        .collect::<Result<_>>()?
                }
                "class_labels" => cfg.class_labels = Some(resolve(raw)),
                _ => unreachable!("key list and match arms agree"),
            }
        }
        cfg.scheme = match scheme_name {
            None => Scheme::Iid,
            Some((name, n)) => match name.as_str() {
                "iid" => Scheme::Iid,
                "bernoulli" => Scheme::Bernoulli {
                    beta: beta.ok_or_else(|| invalid("scheme = bernoulli needs `beta`"))?,
                },
                other => {
                    return Err(Error::Config {
                        path: "config".into(),
                        line: n,
                        message: format!("unknown scheme `{other}` (expected iid or bernoulli)"),
                    })
                }
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.lewis().validate()?;
        if !(self.p >= 1.0) {
            return Err(invalid(format!("p must be at least 1, got {}", self.p)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.constant_c > 0.0 && self.constant_c.is_finite()) {
            return Err(invalid(format!("constant_c must be positive, got {}", self.constant_c)));
        }
        if self.tau == Some(0) {
            return Err(invalid("tau must be at least 1"));
        }
        if !(self.distortion_threshold >= 0.0) || !(self.guarantee_threshold > 0.0) {
            return Err(invalid("thresholds must be non-negative"));
        }
        if self.oracle_restarts == 0 || self.solver_starts == 0 || self.distortion_trials == 0 {
            return Err(invalid("restart, start and trial counts must be positive"));
        }
        if let Some(t) = self.t_values.iter().find(|t| !(**t > 0.0 && **t <= 100.0)) {
            return Err(invalid(format!("t values must lie in (0, 100], got {t}")));
        }
        if !self.labeled.is_empty() && self.labeled.len() != self.unlabeled.len() {
            return Err(invalid(format!(
                "{} labeled feature files for {} unlabeled ones",
                self.labeled.len(),
                self.unlabeled.len()
            )));
        }
        if self.labeled.is_empty() != self.labeled_labels.is_none() {
            return Err(invalid("`labeled` and `labeled_labels` must be given together"));
        }
        Ok(())
    }

    pub fn lewis(&self) -> LewisConfig {
        LewisConfig::new(self.p)
            .with_tolerance(self.fp_tolerance)
            .with_max_iters(self.max_iters)
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| invalid("a seed is required (config `seed` or --seed)"))
    }

    /// Pipeline parameters for a resolved budget.
    pub fn params(&self, tau: usize, seed: u64) -> OneShotParams {
        let mut params = OneShotParams::new(tau, self.epsilon, self.p, self.activation, seed);
        params.lewis = self.lewis();
        params.constrained = self.constrained;
        params.scheme = self.scheme;
        params.solver.starts = self.solver_starts;
        params
    }

    pub fn verify_seeds(&self) -> Result<Vec<u64>> {
        if self.seeds.is_empty() {
            Ok(vec![self.require_seed()?])
        } else {
            Ok(self.seeds.clone())
        }
    }
}

//! Run configuration: a flat `key = value` text file with `#` comments.
//!
//! Values are layered: command-line flags over the config file over
//! defaults.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::scene::DEFAULT_MIN_POINTS;
use crate::scoring::{EvalConfig, DEFAULT_CONFIDENCE_THRESHOLD};

pub const CONFIG_ENV: &str = "SPACEGAUGE_CONFIG";

const KEYS: [&str; 7] = ["threshold", "min_points", "benchmark", "records", "out", "parallelism", "seed"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("{key}: invalid value {value:?}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Detection confidence threshold τ, in (0, 1).
    pub threshold: f64,
    pub min_points: usize,
    pub benchmark: PathBuf,
    pub records: PathBuf,
    pub out: PathBuf,
    pub parallelism: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            min_points: DEFAULT_MIN_POINTS,
            benchmark: PathBuf::from("benchmark"),
            records: PathBuf::from("records"),
            out: PathBuf::from("results"),
            parallelism: 1,
            seed: 0,
        }
    }
}

/// A partial configuration: every field optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub threshold: Option<f64>,
    pub min_points: Option<usize>,
    pub benchmark: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub seed: Option<u64>,
}

fn invalid(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::InvalidValue { key: key.into(), value: value.into(), reason: reason.to_string() }
}

impl Overrides {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut o = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            }
            if seen.contains(&key) {
                return Err(ConfigError::DuplicateKey { line, key: key.into() });
            }
            seen.push(key);
            o.set(key, value)?;
        }
        Ok(o)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "threshold" => self.threshold = Some(value.parse().map_err(|e| invalid(key, value, e))?),
            "min_points" => self.min_points = Some(value.parse().map_err(|e| invalid(key, value, e))?),
            "parallelism" => self.parallelism = Some(value.parse().map_err(|e| invalid(key, value, e))?),
            "seed" => self.seed = Some(value.parse().map_err(|e| invalid(key, value, e))?),
            "benchmark" => self.benchmark = Some(PathBuf::from(value)),
            "records" => self.records = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => unreachable!("keys are checked by the caller"),
        }
        Ok(())
    }

    /// `self` wins over `lower` wherever it has a value.
    pub fn over(self, lower: Overrides) -> Overrides {
        Overrides {
            threshold: self.threshold.or(lower.threshold),
            min_points: self.min_points.or(lower.min_points),
            benchmark: self.benchmark.or(lower.benchmark),
            records: self.records.or(lower.records),
            out: self.out.or(lower.out),
            parallelism: self.parallelism.or(lower.parallelism),
            seed: self.seed.or(lower.seed),
        }
    }
}

impl RunConfig {
    /// Flags over file over defaults, then validated.
    pub fn resolve(flags: Overrides, file: Option<Overrides>) -> Result<Self, ConfigError> {
        let o = flags.over(file.unwrap_or_default());
        let d = Self::default();
        let cfg = Self {
            threshold: o.threshold.unwrap_or(d.threshold),
            min_points: o.min_points.unwrap_or(d.min_points),
            benchmark: o.benchmark.unwrap_or(d.benchmark),
            records: o.records.unwrap_or(d.records),
            out: o.out.unwrap_or(d.out),
            parallelism: o.parallelism.unwrap_or(d.parallelism),
            seed: o.seed.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid("threshold", &self.threshold.to_string(), "must lie in (0, 1)"));
        }
        if self.parallelism < 1 {
            return Err(invalid("parallelism", "0", "must be at least 1"));
        }
        Ok(())
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig { confidence_threshold: self.threshold, min_points: self.min_points }
    }

    /// Canonical dump, parseable by [`Overrides::parse`].
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "threshold = {}", self.threshold);
        let _ = writeln!(s, "min_points = {}", self.min_points);
        let _ = writeln!(s, "benchmark = {}", self.benchmark.display());
        let _ = writeln!(s, "records = {}", self.records.display());
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "parallelism = {}", self.parallelism);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let file = Overrides::parse("# run\nthreshold = 0.5\nseed=3\nout = a/b  # trailing\n").unwrap();
        let flags = Overrides { threshold: Some(0.4), ..Default::default() };
        let cfg = RunConfig::resolve(flags, Some(file)).unwrap();
        assert_eq!(cfg.threshold, 0.4);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.out, PathBuf::from("a/b"));
        assert_eq!(cfg.min_points, DEFAULT_MIN_POINTS);
    }

    #[test]
    fn dump_round_trips() {
        let cfg = RunConfig { threshold: 0.25, parallelism: 8, seed: 99, ..Default::default() };
        let back = RunConfig::resolve(Overrides::default(), Some(Overrides::parse(&cfg.dump()).unwrap())).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Overrides::parse("threshold"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(Overrides::parse("\ncolour = red"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(Overrides::parse("seed = 1\nseed = 2"), Err(ConfigError::DuplicateKey { .. })));
        assert!(matches!(Overrides::parse("seed = -1"), Err(ConfigError::InvalidValue { .. })));
        for t in [0.0, 1.0, -0.2, f64::NAN] {
            let o = Overrides { threshold: Some(t), ..Default::default() };
            assert!(RunConfig::resolve(o, None).is_err());
        }
        let o = Overrides { parallelism: Some(0), ..Default::default() };
        assert!(RunConfig::resolve(o, None).is_err());
    }
}

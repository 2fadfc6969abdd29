//! Sweep configuration: one TOML file, overridden field by field from the
//! command line.

use std::path::{Path, PathBuf};

use locon_core::hecke::PrecisionPolicy;
use locon_core::padic::is_odd_prime;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// `a_p = u pi^h` with `pi^e = p`; `unit` lists the digits of `u` in `pi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApSpec {
    pub e: u32,
    pub h: u32,
    #[serde(default = "default_unit")]
    pub unit: Vec<i64>,
}

fn default_unit() -> Vec<i64> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub suites: Vec<String>,
    pub primes: Vec<u64>,
    /// Restricts `b`; empty means every admissible value.
    pub b: Vec<u64>,
    pub t: Vec<u32>,
    pub s: Vec<u64>,
    pub m_max: usize,
    pub r_max: usize,
    /// Random polynomials per prime in the divisibility suite.
    pub samples: usize,
    pub seed: u64,
    pub ap: Vec<ApSpec>,
    /// `"auto"` or `"fixed:<M>"`.
    pub precision: String,
    /// Slopes for the reduction suite, as `n` or `n/d`.
    pub slopes: Vec<String>,
    pub residues: Vec<u64>,
    /// Largest literal sum cross-checked in the congruence suite.
    pub literal_r_max: u64,
    pub jsonl: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub workers: Option<usize>,
    pub timings: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            suites: Vec::new(),
            primes: vec![3, 5, 7],
            b: Vec::new(),
            t: vec![1, 2],
            s: vec![1, 2],
            m_max: 4,
            r_max: 40,
            samples: 10_000,
            seed: 1,
            ap: vec![ApSpec { e: 1, h: 1, unit: vec![3] }],
            precision: "auto".into(),
            slopes: vec!["1/2".into(), "1".into(), "3/2".into(), "2".into()],
            residues: vec![1, 2],
            literal_r_max: 2_000,
            jsonl: None,
            csv: None,
            workers: None,
            timings: false,
        }
    }
}

pub const WORKERS_ENV: &str = "LOCON_WORKERS";

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.primes.is_empty() {
            return bad("prime list is empty".into());
        }
        if let Some(p) = self.primes.iter().find(|&&p| !is_odd_prime(p)) {
            return bad(format!("{p} is not an odd prime"));
        }
        if self.t.is_empty() || self.s.is_empty() {
            return bad("t and s ranges must be nonempty".into());
        }
        if self.t.contains(&0) {
            return bad("t must be positive".into());
        }
        if self.s.contains(&0) {
            return bad("s must be positive".into());
        }
        if self.m_max == 0 || self.r_max == 0 {
            return bad("m_max and r_max must be positive".into());
        }
        if self.ap.is_empty() {
            return bad("a_p list is empty".into());
        }
        if let Some(ap) = self.ap.iter().find(|ap| ap.e == 0 || ap.h == 0 || ap.unit.is_empty()) {
            return bad(format!("invalid a_p specification {ap:?}"));
        }
        if self.slopes.is_empty() || self.residues.is_empty() {
            return bad("slope and residue lists must be nonempty".into());
        }
        for slope in &self.slopes {
            locon_core::llc::parse_ratio(slope).map_err(ConfigError::Invalid)?;
        }
        if self.workers == Some(0) {
            return bad("worker count must be positive".into());
        }
        self.precision_policy()?;
        Ok(())
    }

    pub fn precision_policy(&self) -> Result<PrecisionPolicy, ConfigError> {
        parse_precision(&self.precision)
    }

    /// Explicit setting, then the environment, then rayon's default.
    pub fn worker_count(&self) -> Result<Option<usize>, ConfigError> {
        if self.workers.is_some() {
            return Ok(self.workers);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(ConfigError::Invalid(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
            },
            Err(_) => Ok(None),
        }
    }
}

pub fn parse_precision(s: &str) -> Result<PrecisionPolicy, ConfigError> {
    let s = s.trim();
    if s == "auto" {
        return Ok(PrecisionPolicy::Auto);
    }
    s.strip_prefix("fixed:")
        .and_then(|m| m.trim().parse::<u32>().ok())
        .map(PrecisionPolicy::Fixed)
        .ok_or_else(|| ConfigError::Invalid(format!("precision must be \"auto\" or \"fixed:<M>\", got {s:?}")))
}

/// Odd primes up to `n`.
pub fn odd_primes_up_to(n: u64) -> Vec<u64> {
    (3..=n).filter(|&p| is_odd_prime(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SweepConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_toml() {
        let cfg: SweepConfig = toml::from_str(
            r#"
            primes = [5, 7]
            t = [1]
            precision = "fixed:30"
            [[ap]]
            e = 2
            h = 3
            unit = [2]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.primes, vec![5, 7]);
        assert_eq!(cfg.precision_policy().unwrap(), PrecisionPolicy::Fixed(30));
        assert_eq!(cfg.ap[0].h, 3);
        assert_eq!(cfg.s, vec![1, 2]);
    }

    #[test]
    fn rejects_bad_values() {
        let empty = SweepConfig { primes: vec![], ..Default::default() };
        assert!(empty.validate().is_err());
        let composite = SweepConfig { primes: vec![9], ..Default::default() };
        assert!(composite.validate().is_err());
        let prec = SweepConfig { precision: "fixed".into(), ..Default::default() };
        assert!(prec.validate().is_err());
        assert!(toml::from_str::<SweepConfig>("primez = [3]").is_err());
    }

    #[test]
    fn primes_up_to() {
        assert_eq!(odd_primes_up_to(13), vec![3, 5, 7, 11, 13]);
    }
}

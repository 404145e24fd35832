//! Sampling-method selection and run configuration.

use std::fmt;
use std::str::FromStr;

use crate::bart::BartSettings;
use crate::error::{Error, Result};

/// Which sub-posterior each worker targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// One chain on the whole dataset.
    Full,
    /// Shard likelihood raised to the power K, prior untouched.
    Lisa,
    /// LISA with the residual variance inflated by K during tree updates.
    ModLisa,
    /// Consensus Monte Carlo: prior raised to the power 1/K.
    Cmc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Full, Method::Lisa, Method::ModLisa, Method::Cmc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Lisa => "lisa",
            Method::ModLisa => "modlisa",
            Method::Cmc => "cmc",
        }
    }

    /// Combination rule used when none is requested.
    pub fn default_rule(self) -> CombineRule {
        match self {
            Method::Full | Method::Lisa => CombineRule::Uniform,
            Method::ModLisa | Method::Cmc => CombineRule::InverseVariance,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "full" | "single" | "singlemachine" => Ok(Method::Full),
            "lisa" => Ok(Method::Lisa),
            "modlisa" => Ok(Method::ModLisa),
            "cmc" | "consensus" => Ok(Method::Cmc),
            _ => Err(Error::invalid(format!("unknown method `{s}`"))),
        }
    }
}

/// How aligned shard draws are merged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CombineRule {
    /// Pool all shard draws as equally weighted samples.
    Uniform,
    /// Per-index precision-weighted averages.
    InverseVariance,
}

impl CombineRule {
    pub fn name(self) -> &'static str {
        match self {
            CombineRule::Uniform => "uniform",
            CombineRule::InverseVariance => "inverse-variance",
        }
    }
}

impl fmt::Display for CombineRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CombineRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "uniform" | "unif" => Ok(CombineRule::Uniform),
            "inverse-variance" | "inversevariance" | "ivw" | "weighted" => {
                Ok(CombineRule::InverseVariance)
            }
            _ => Err(Error::invalid(format!("unknown combine rule `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub k: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub bart: BartSettings,
    pub combine: CombineRule,
    /// Upper bound on concurrently running chains; `0` means one per core.
    /// Never affects results.
    pub workers: usize,
}

impl MethodConfig {
    pub fn new(
        method: Method,
        k: usize,
        iterations: usize,
        burn_in: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            method,
            k,
            iterations,
            burn_in,
            seed,
            bart: BartSettings::default(),
            combine: method.default_rule(),
            workers: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_bart(mut self, bart: BartSettings) -> Self {
        self.bart = bart;
        self
    }

    pub fn with_combine(mut self, rule: CombineRule) -> Self {
        self.combine = rule;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn retained(&self) -> usize {
        self.iterations - self.burn_in
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfiguration("K must be positive".into()));
        }
        if self.method == Method::Full && self.k != 1 {
            return Err(Error::InvalidConfiguration(format!(
                "full-data sampling uses K = 1, got K = {}",
                self.k
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfiguration(
                "iterations must be positive".into(),
            ));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfiguration(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        self.bart.validate()
    }
}

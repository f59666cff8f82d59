//! Experiment configuration, read from TOML and overridable from the command line.

use std::path::{Path, PathBuf};

use fw_core::{Precision, Schedule};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Identity,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemConfig {
    Synthetic {
        #[serde(default = "default_seed")]
        seed: u64,
        m: usize,
        n: usize,
        design: Design,
    },
    Regression {
        path: PathBuf,
        target: String,
    },
    Completion {
        path: PathBuf,
        max_users: Option<usize>,
        max_items: Option<usize>,
        #[serde(default)]
        subsample_seed: u64,
    },
}

/// Radius policy: `beta` is absolute, `beta_factor` scales `‖x_unc‖_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(default = "default_p")]
    pub p: f64,
    pub beta: Option<f64>,
    pub beta_factor: Option<f64>,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig { p: default_p(), beta: None, beta_factor: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schedules")]
    pub schedules: Vec<String>,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_reference_budget")]
    pub reference_budget: u64,
    #[serde(default = "default_precision")]
    pub precision: String,
    /// Check feasibility every this many iterations; 0 disables.
    #[serde(default = "default_stride")]
    pub membership_stride: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schedules: default_schedules(),
            horizon: default_horizon(),
            seed: default_seed(),
            out: default_out(),
            reference_budget: default_reference_budget(),
            precision: default_precision(),
            membership_stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub region: RegionConfig,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_seed() -> u64 {
    1
}

fn default_p() -> f64 {
    2.0
}

fn default_schedules() -> Vec<String> {
    vec!["fixed:2".into(), "fixed:4".into(), "logadaptive".into()]
}

fn default_horizon() -> u64 {
    10_000
}

fn default_out() -> PathBuf {
    PathBuf::from("fw-out")
}

fn default_reference_budget() -> u64 {
    10_000
}

fn default_precision() -> String {
    "f64".into()
}

fn default_stride() -> u64 {
    1
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub schedules: Option<Vec<String>>,
    pub horizon: Option<u64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub precision: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file; relative data and output paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.problem {
            ProblemConfig::Regression { path, .. } | ProblemConfig::Completion { path, .. } => fix(path),
            ProblemConfig::Synthetic { .. } => {}
        }
        fix(&mut self.run.out);
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(s) = o.schedules {
            self.run.schedules = s;
        }
        if let Some(t) = o.horizon {
            self.run.horizon = t;
        }
        if let Some(out) = o.out {
            self.run.out = out;
        }
        if let Some(seed) = o.seed {
            self.run.seed = seed;
        }
        if let Some(p) = o.precision {
            self.run.precision = p;
        }
    }

    pub fn schedules(&self) -> Result<Vec<Schedule>> {
        if self.run.schedules.is_empty() {
            return Err(HarnessError::Config("at least one schedule is required".into()));
        }
        self.run
            .schedules
            .iter()
            .map(|s| s.parse::<Schedule>().map_err(|e| HarnessError::Config(e.to_string())))
            .collect()
    }

    pub fn precision(&self) -> Result<Precision> {
        self.run.precision.parse().map_err(|e: fw_core::FwError| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.schedules()?;
        let precision = self.precision()?;
        if self.run.horizon < 10 {
            return Err(HarnessError::Config(format!("T must be at least 10, got {}", self.run.horizon)));
        }
        let r = &self.region;
        match (r.beta, r.beta_factor) {
            (Some(_), Some(_)) => {
                return Err(HarnessError::Config("set either region.beta or region.beta_factor, not both".into()))
            }
            (None, None) => return Err(HarnessError::Config("region.beta or region.beta_factor is required".into())),
            (Some(b), None) if !(b > 0.0 && b.is_finite()) => {
                return Err(HarnessError::Config(format!("region.beta must be positive, got {b}")))
            }
            (None, Some(f)) if !(f > 0.0 && f.is_finite()) => {
                return Err(HarnessError::Config(format!("region.beta_factor must be positive, got {f}")))
            }
            _ => {}
        }
        match &self.problem {
            ProblemConfig::Completion { .. } => {
                if r.beta_factor.is_some() {
                    return Err(HarnessError::Config("completion problems need an absolute region.beta".into()));
                }
                if precision == Precision::DoubleDouble {
                    return Err(HarnessError::Config("completion problems run in f64 only".into()));
                }
            }
            _ => {
                if !(r.p > 1.0 && r.p.is_finite()) {
                    return Err(HarnessError::Config(format!("region.p must satisfy 1 < p < ∞, got {}", r.p)));
                }
            }
        }
        if let ProblemConfig::Synthetic { m, n, design, .. } = &self.problem {
            if *n == 0 || m < n {
                return Err(HarnessError::Config(format!("synthetic problems need m >= n >= 1, got m={m}, n={n}")));
            }
            if *design == Design::Identity && m != n {
                return Err(HarnessError::Config("identity design needs m = n".into()));
            }
        }
        Ok(())
    }
}

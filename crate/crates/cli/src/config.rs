//! Versioned experiment config.
//!
//! ```toml
//! version = 1
//!
//! [problem]
//! seed = 0
//! agents = 20
//! lipschitz = 100.0
//! box_radius = 10000.0
//! delay_max = 20
//!
//! [schedule]
//! mode = "every-step"
//!
//! [stepsize]
//! rule = "local"
//! safety = 0.95
//!
//! [run]
//! horizon = 500
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use pabcd::{DEFAULT_SAFETY, DEFAULT_STOP_TOLERANCE};
use serde::{Deserialize, Deserializer, Serialize};

use crate::args::{Common, RuleArg};
use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub stepsize: StepsizeSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// Load this problem document instead of generating one. Relative paths
    /// resolve against the config file.
    pub file: Option<PathBuf>,
    #[serde(deserialize_with = "seed")]
    pub seed: u64,
    pub agents: usize,
    /// Overrides `agents` with explicit block sizes.
    pub block_sizes: Option<Vec<usize>>,
    pub lipschitz: f64,
    pub box_radius: f64,
    pub delay_max: u32,
    pub update_bound_max: u32,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            file: None,
            seed: 0,
            agents: 20,
            block_sizes: None,
            lipschitz: 100.0,
            box_radius: 10_000.0,
            delay_max: 20,
            update_bound_max: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub mode: pabcd::ScheduleMode,
    /// Defaults to the problem seed.
    #[serde(deserialize_with = "opt_seed")]
    pub seed: Option<u64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { mode: pabcd::ScheduleMode::EveryStep, seed: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleName {
    Local,
    Global,
    Manual,
}

impl From<RuleArg> for RuleName {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Local => RuleName::Local,
            RuleArg::Global => RuleName::Global,
            RuleArg::Manual => RuleName::Manual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepsizeSection {
    pub rule: RuleName,
    pub safety: f64,
    /// Manual stepsizes; a single entry applies to every agent.
    pub gammas: Vec<f64>,
}

impl Default for StepsizeSection {
    fn default() -> Self {
        Self { rule: RuleName::Local, safety: DEFAULT_SAFETY, gammas: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub horizon: usize,
    /// Stationarity tolerance on the unscaled residual and the disagreement.
    pub tolerance: f64,
    pub quiescence: bool,
    /// Starting point; all zeros when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { horizon: 500, tolerance: DEFAULT_STOP_TOLERANCE, quiescence: true, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub log_y: bool,
    /// Residual levels whose first hitting time goes into the reports.
    pub thresholds: Vec<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), log_y: false, thresholds: vec![1e2, 1.0, 1e-2, 1e-4, 1e-6] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub seeds: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { seeds: 50 }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            problem: ProblemSection::default(),
            schedule: ScheduleSection::default(),
            stepsize: StepsizeSection::default(),
            run: RunSection::default(),
            output: OutputSection::default(),
            verify: VerifySection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Reads `path`, resolving a relative problem file against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(file) = cfg.problem.file.as_mut() {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    /// The config a subcommand runs with: file (or defaults) plus flags.
    pub fn resolve(common: &Common) -> Result<Self, CliError> {
        let mut cfg = match &common.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        cfg.apply(common);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, common: &Common) {
        if let Some(seed) = common.seed {
            self.problem.seed = seed;
            self.schedule.seed = Some(seed);
        }
        if let Some(h) = common.horizon {
            self.run.horizon = h;
        }
        if let Some(rule) = common.rule {
            self.stepsize.rule = rule.into();
        }
        if let Some(s) = common.safety {
            self.stepsize.safety = s;
        }
        if let Some(out) = &common.out {
            self.output.dir = out.clone();
        }
        if common.log_y {
            self.output.log_y = true;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.problem;
        if p.file.is_none() {
            let agents = p.block_sizes.as_ref().map_or(p.agents, Vec::len);
            if agents == 0 {
                return Err(CliError::Config("problem needs at least one agent".into()));
            }
        }
        if !(self.stepsize.safety > 0.0) || !self.stepsize.safety.is_finite() {
            return Err(CliError::Config(format!("safety must be positive, got {}", self.stepsize.safety)));
        }
        if self.stepsize.rule == RuleName::Manual && self.stepsize.gammas.is_empty() {
            return Err(CliError::Config("manual rule needs stepsize.gammas".into()));
        }
        if !(self.run.tolerance >= 0.0) {
            return Err(CliError::Config(format!("tolerance must be nonnegative, got {}", self.run.tolerance)));
        }
        if self.verify.seeds == 0 {
            return Err(CliError::Config("verify needs at least one seed".into()));
        }
        Ok(())
    }

    pub fn schedule_seed(&self) -> u64 {
        self.schedule.seed.unwrap_or(self.problem.seed)
    }

    /// The same experiment with every seed replaced by `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.problem.seed = seed;
        cfg.schedule.seed = Some(seed);
        cfg
    }
}

/// Seeds may be written as integers or, above `i64::MAX`, as strings.
#[derive(Deserialize)]
#[serde(untagged)]
enum SeedRepr {
    Int(u64),
    Str(String),
}

impl SeedRepr {
    fn value<E: serde::de::Error>(self) -> Result<u64, E> {
        match self {
            SeedRepr::Int(v) => Ok(v),
            SeedRepr::Str(s) => s.parse().map_err(|_| E::custom(format!("invalid seed {s:?}"))),
        }
    }
}

fn seed<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    SeedRepr::deserialize(d)?.value()
}

fn opt_seed<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    Option::<SeedRepr>::deserialize(d)?.map(SeedRepr::value).transpose()
}

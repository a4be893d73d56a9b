//! The run configuration JSON.
//!
//! ```json
//! {
//!   "scenario": {"builtin": "cpap", "params": {"arms_per_cluster": 10}},
//!   "learner": "ucmd-armab",
//!   "mc_rounds": 100,
//!   "seed": 7,
//!   "solver": {"proj_tol": 1e-8, "proj_max_iters": 20000, "warm_start": true},
//!   "output": "cpap.csv"
//! }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use armab_core::omd::SolverConfig;
use armab_core::oracle::{replicate_scenario, LpConfig};
use armab_core::Scenario;
use serde::{Deserialize, Serialize};

use crate::builders::{build_cpap, build_deadline, cpap, deadline, CpapParams, DeadlineParams};
use crate::error::{BenchError, Result};
use crate::scenario_file::load_scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LearnerKind {
    #[serde(rename = "ucmd-armab")]
    UcmdArmab,
    #[serde(rename = "rmab-ucrl")]
    RmabUcrl,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "greedy")]
    Greedy,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [Self::UcmdArmab, Self::RmabUcrl, Self::Random, Self::Greedy];

    pub fn id(self) -> &'static str {
        match self {
            Self::UcmdArmab => "ucmd-armab",
            Self::RmabUcrl => "rmab-ucrl",
            Self::Random => "random",
            Self::Greedy => "greedy",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for LearnerKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.id() == s).ok_or_else(|| BenchError::Config(format!("unknown learner {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinName {
    Cpap,
    Deadline,
}

/// Either `{"builtin": name, "params": {...}}` or `{"path": file}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Builtin {
        builtin: BuiltinName,
        #[serde(default)]
        params: serde_json::Value,
    },
    File {
        path: PathBuf,
    },
}

fn params<T: serde::de::DeserializeOwned + Default>(value: &serde_json::Value) -> Result<T> {
    if value.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(value.clone()).map_err(|e| BenchError::json("scenario params", e))
}

impl ScenarioSource {
    pub fn cpap(p: &CpapParams) -> Self {
        Self::Builtin { builtin: BuiltinName::Cpap, params: serde_json::to_value(p).expect("params serialize") }
    }

    pub fn deadline(p: &DeadlineParams) -> Self {
        Self::Builtin { builtin: BuiltinName::Deadline, params: serde_json::to_value(p).expect("params serialize") }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Builtin { builtin: BuiltinName::Cpap, .. } => "cpap".into(),
            Self::Builtin { builtin: BuiltinName::Deadline, .. } => "deadline".into(),
            Self::File { path } => path.display().to_string(),
        }
    }

    pub fn reward_normalization(&self) -> &'static str {
        match self {
            Self::Builtin { builtin: BuiltinName::Cpap, .. } => cpap::REWARD_NORMALIZATION,
            Self::Builtin { builtin: BuiltinName::Deadline, .. } => deadline::REWARD_NORMALIZATION,
            Self::File { .. } => "none: rewards are taken from the scenario file as given",
        }
    }

    /// Builds or loads the scenario. Relative paths resolve against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<Scenario> {
        match self {
            Self::Builtin { builtin: BuiltinName::Cpap, params: p } => build_cpap(&params(p)?),
            Self::Builtin { builtin: BuiltinName::Deadline, params: p } => build_deadline(&params(p)?),
            Self::File { path } => load_scenario(&base_dir.join(path)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub proj_tol: f64,
    pub proj_max_iters: usize,
    pub warm_start: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self { proj_tol: c.tol, proj_max_iters: c.max_iters, warm_start: c.warm_start }
    }
}

impl SolverSpec {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.proj_tol,
            max_iters: self.proj_max_iters,
            warm_start: self.warm_start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpSpec {
    /// `None` selects `1e-5 * N * H` for the hindsight LP and `1e-3 * N * H`
    /// for `rmab-ucrl` planning.
    pub lp_tol: Option<f64>,
    pub lp_max_iters: usize,
}

impl Default for LpSpec {
    fn default() -> Self {
        Self { lp_tol: None, lp_max_iters: LpConfig::default().max_iters }
    }
}

impl LpSpec {
    pub fn config(&self) -> LpConfig {
        LpConfig { tol: self.lp_tol, max_iters: self.lp_max_iters }
    }
}

fn default_rounds() -> usize {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub scenario: ScenarioSource,
    pub learner: LearnerKind,
    #[serde(default = "default_rounds")]
    pub mc_rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub lp: LpSpec,
    /// Confidence bonus on the sample-mean rewards of `rmab-ucrl`.
    #[serde(default = "default_true")]
    pub reward_bonus: bool,
    /// Arm and budget replication factor.
    #[serde(default)]
    pub scale: Option<usize>,
    /// Relative to the spec's directory when run from the CLI.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Where to write the first round's trajectories, if anywhere.
    #[serde(default)]
    pub trajectories: Option<PathBuf>,
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| BenchError::json("run spec", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| BenchError::json(path.display().to_string(), e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_rounds == 0 {
            return Err(BenchError::Config("mc_rounds must be at least 1".into()));
        }
        if self.scale == Some(0) {
            return Err(BenchError::Config("scale must be at least 1".into()));
        }
        if self.solver.proj_tol.is_nan() || self.solver.proj_tol <= 0.0 {
            return Err(BenchError::Config("proj_tol must be positive".into()));
        }
        Ok(())
    }

    /// The scenario this spec runs, replicated by `scale`.
    pub fn build_scenario(&self, base_dir: &Path) -> Result<Scenario> {
        let scenario = self.scenario.load(base_dir)?;
        match self.scale {
            Some(rho) if rho > 1 => Ok(replicate_scenario(&scenario, rho)?),
            _ => Ok(scenario),
        }
    }
}

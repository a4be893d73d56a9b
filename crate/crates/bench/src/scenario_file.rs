//! The scenario JSON document.
//!
//! ```json
//! {
//!   "arms": [{"initial_state": 0, "transition": [[[..]], [[..]]]}],
//!   "budget": 1, "horizon": 10, "episodes": 20, "epsilon": 0.05, "eta": null,
//!   "schedule": {"kind": "coefficient", "base": [[[0, 0.5]]], "coefficients": [1.0]}
//! }
//! ```
//!
//! `transition` is indexed `[a][s][s']`. A `"tensor"` schedule instead gives
//! `"values"` indexed `[t][n][s][a]` and an optional `"passive_zero"` flag.

use std::path::Path;

use armab_core::model::NUM_ACTIONS;
use armab_core::{validate_scenario, ArmModel, RewardSchedule, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmDoc {
    pub initial_state: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleDoc {
    Tensor {
        values: Vec<Vec<Vec<Vec<f64>>>>,
        #[serde(default)]
        passive_zero: bool,
    },
    Coefficient {
        base: Vec<Vec<Vec<f64>>>,
        coefficients: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub arms: Vec<ArmDoc>,
    pub budget: usize,
    pub horizon: usize,
    pub episodes: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub eta: Option<f64>,
    pub schedule: ScheduleDoc,
}

fn flatten<T: Clone>(nested: &[Vec<T>], inner: usize, what: &str) -> Result<Vec<T>> {
    if let Some(bad) = nested.iter().find(|v| v.len() != inner) {
        return Err(BenchError::Config(format!("{what}: expected {inner} entries, found {}", bad.len())));
    }
    Ok(nested.concat())
}

impl ScenarioDoc {
    pub fn into_scenario(self) -> Result<Scenario> {
        let states = self.arms.first().map_or(0, |a| a.transition.first().map_or(0, Vec::len));
        let num_arms = self.arms.len();
        let mut arms = Vec::with_capacity(num_arms);
        for (id, arm) in self.arms.into_iter().enumerate() {
            if arm.transition.len() != NUM_ACTIONS {
                return Err(BenchError::Config(format!("arm {id}: transition needs {NUM_ACTIONS} action blocks")));
            }
            let mut flat = Vec::with_capacity(NUM_ACTIONS * states * states);
            for block in &arm.transition {
                if block.len() != states {
                    return Err(BenchError::Config(format!("arm {id}: expected {states} rows")));
                }
                flat.extend(flatten(block, states, &format!("arm {id} transition row"))?);
            }
            arms.push(ArmModel::new(id, states, flat, arm.initial_state));
        }
        let schedule = match self.schedule {
            ScheduleDoc::Tensor { values, passive_zero } => {
                let mut flat = Vec::new();
                for (t, per_arm) in values.iter().enumerate() {
                    if per_arm.len() != num_arms {
                        return Err(BenchError::Config(format!(
                            "schedule episode {}: expected {num_arms} arms",
                            t + 1
                        )));
                    }
                    for rows in per_arm {
                        if rows.len() != states {
                            return Err(BenchError::Config(format!("schedule: expected {states} states")));
                        }
                        flat.extend(flatten(rows, NUM_ACTIONS, "schedule entry")?);
                    }
                }
                RewardSchedule::from_tensor(values.len(), num_arms, states, flat, passive_zero)?
            }
            ScheduleDoc::Coefficient { base, coefficients } => {
                let mut flat = Vec::new();
                for rows in &base {
                    if rows.len() != states {
                        return Err(BenchError::Config(format!("schedule base: expected {states} states")));
                    }
                    flat.extend(flatten(rows, NUM_ACTIONS, "schedule base entry")?);
                }
                RewardSchedule::from_coefficients(num_arms, states, &flat, &coefficients)?
            }
        };
        let scenario = Scenario {
            arms,
            budget: self.budget,
            horizon: self.horizon,
            episodes: self.episodes,
            schedule,
            epsilon: self.epsilon,
            eta: self.eta,
        };
        Ok(validate_scenario(scenario)?)
    }

    /// Writes every schedule entry explicitly.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let s = scenario.num_states();
        let arms = scenario
            .arms
            .iter()
            .map(|arm| ArmDoc {
                initial_state: arm.initial_state,
                transition: arm
                    .transition
                    .chunks(s * s)
                    .map(|block| block.chunks(s).map(<[f64]>::to_vec).collect())
                    .collect(),
            })
            .collect();
        let sched = &scenario.schedule;
        let values = (1..=sched.episodes)
            .map(|t| {
                sched
                    .episode(t)
                    .chunks(s * NUM_ACTIONS)
                    .map(|arm| arm.chunks(NUM_ACTIONS).map(<[f64]>::to_vec).collect())
                    .collect()
            })
            .collect();
        Self {
            arms,
            budget: scenario.budget,
            horizon: scenario.horizon,
            episodes: scenario.episodes,
            epsilon: scenario.epsilon,
            eta: scenario.eta,
            schedule: ScheduleDoc::Tensor { values, passive_zero: sched.passive_zero },
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let doc: ScenarioDoc = serde_json::from_str(&text).map_err(|e| BenchError::json(path.display().to_string(), e))?;
    doc.into_scenario()
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&ScenarioDoc::from_scenario(scenario))
        .map_err(|e| BenchError::json("scenario", e))?;
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

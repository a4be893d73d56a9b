//! Domain types shared by every module.
//!
//! Tensors are flat, row-major `Vec<f64>`s. Episodes are numbered `1..=T`;
//! epochs, arms, states and actions are zero-based. Action `0` is passive and
//! action `1` is active.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ArmabError, Result};
use crate::math;

pub const NUM_ACTIONS: usize = 2;

/// Kernel rows may deviate from 1 by this much before they are rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

/// One arm: a two-action MDP with a fixed initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub arm_id: usize,
    pub num_states: usize,
    /// `P(s'|s,a)` laid out as `[action][state][next_state]`.
    pub transition: Vec<f64>,
    pub initial_state: usize,
}

impl ArmModel {
    pub fn new(arm_id: usize, num_states: usize, transition: Vec<f64>, initial_state: usize) -> Self {
        Self { arm_id, num_states, transition, initial_state }
    }

    /// Arm whose kernel leaves every state where it is.
    pub fn identity(arm_id: usize, num_states: usize, initial_state: usize) -> Self {
        let mut transition = vec![0.0; NUM_ACTIONS * num_states * num_states];
        for a in 0..NUM_ACTIONS {
            for s in 0..num_states {
                transition[(a * num_states + s) * num_states + s] = 1.0;
            }
        }
        Self::new(arm_id, num_states, transition, initial_state)
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (action * self.num_states + state) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.row(state, action)[next]
    }

    /// The kernel re-laid out as `[state][action][next_state]`, the layout
    /// used by confidence sets.
    pub fn transition_by_pair(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.transition.len());
        for s in 0..self.num_states {
            for a in 0..NUM_ACTIONS {
                out.extend_from_slice(self.row(s, a));
            }
        }
        out
    }

    /// Checks shape and stochasticity, renormalizing rows that are within
    /// [`ROW_SUM_TOLERANCE`] of summing to one.
    pub fn validate(&mut self) -> Result<()> {
        let s = self.num_states;
        if s == 0 {
            return Err(ArmabError::InvalidParameter(format!("arm {} has no states", self.arm_id)));
        }
        if self.transition.len() != NUM_ACTIONS * s * s {
            return Err(ArmabError::DimensionMismatch(format!(
                "arm {} kernel has {} entries, expected {}",
                self.arm_id,
                self.transition.len(),
                NUM_ACTIONS * s * s
            )));
        }
        if self.initial_state >= s {
            return Err(ArmabError::InvalidParameter(format!(
                "arm {} initial state {} out of range",
                self.arm_id, self.initial_state
            )));
        }
        for a in 0..NUM_ACTIONS {
            for state in 0..s {
                let start = (a * s + state) * s;
                let row = &mut self.transition[start..start + s];
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(ArmabError::InvalidParameter(format!(
                        "arm {} row ({state},{a}) has a negative or non-finite entry",
                        self.arm_id
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(ArmabError::RowSumOutOfTolerance { arm: self.arm_id, state, action: a, sum });
                }
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(())
    }
}

/// The adversary's pre-committed rewards `r[t][n][s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSchedule {
    pub episodes: usize,
    pub num_arms: usize,
    pub num_states: usize,
    pub values: Vec<f64>,
    /// When set, every passive reward is exactly zero.
    pub passive_zero: bool,
}

impl RewardSchedule {
    pub fn from_tensor(
        episodes: usize,
        num_arms: usize,
        num_states: usize,
        values: Vec<f64>,
        passive_zero: bool,
    ) -> Result<Self> {
        let schedule = Self { episodes, num_arms, num_states, values, passive_zero };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Expands `base[n][s][a]` scaled by one coefficient per episode.
    pub fn from_coefficients(num_arms: usize, num_states: usize, base: &[f64], coefficients: &[f64]) -> Result<Self> {
        let width = num_arms * num_states * NUM_ACTIONS;
        if base.len() != width {
            return Err(ArmabError::DimensionMismatch(format!(
                "base rewards have {} entries, expected {width}",
                base.len()
            )));
        }
        let mut values = Vec::with_capacity(width * coefficients.len());
        for &c in coefficients {
            values.extend(base.iter().map(|r| c * r));
        }
        let passive_zero = base.chunks(NUM_ACTIONS).all(|sa| sa[0] == 0.0);
        Self::from_tensor(coefficients.len(), num_arms, num_states, values, passive_zero)
    }

    #[inline]
    fn offset(&self, t: usize, n: usize, s: usize, a: usize) -> usize {
        debug_assert!(t >= 1 && t <= self.episodes);
        (((t - 1) * self.num_arms + n) * self.num_states + s) * NUM_ACTIONS + a
    }

    /// Reward of episode `t` (1-based).
    #[inline]
    pub fn reward(&self, t: usize, n: usize, s: usize, a: usize) -> f64 {
        self.values[self.offset(t, n, s, a)]
    }

    /// The `[n][s][a]` slice for episode `t`.
    pub fn episode(&self, t: usize) -> &[f64] {
        let width = self.num_arms * self.num_states * NUM_ACTIONS;
        &self.values[(t - 1) * width..t * width]
    }

    /// `sum_t r^t` as an `[n][s][a]` tensor.
    pub fn total(&self) -> Vec<f64> {
        let width = self.num_arms * self.num_states * NUM_ACTIONS;
        let mut out = vec![0.0; width];
        for chunk in self.values.chunks(width) {
            for (o, v) in out.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.episodes * self.num_arms * self.num_states * NUM_ACTIONS;
        if self.values.len() != expected {
            return Err(ArmabError::DimensionMismatch(format!(
                "schedule has {} entries, expected {expected}",
                self.values.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ArmabError::InvalidParameter(format!("reward {v} outside [0, 1]")));
        }
        if self.passive_zero && self.values.chunks(NUM_ACTIONS).any(|sa| sa[0] != 0.0) {
            return Err(ArmabError::InvalidParameter("passive_zero is set but a passive reward is non-zero".into()));
        }
        Ok(())
    }
}

/// A complete problem instance: arms, budget, horizon and the adversary's schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub arms: Vec<ArmModel>,
    pub budget: usize,
    pub horizon: usize,
    pub episodes: usize,
    pub schedule: RewardSchedule,
    pub epsilon: f64,
    /// OMD step size; `None` selects [`default_step_size`].
    pub eta: Option<f64>,
}

impl Scenario {
    #[inline]
    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.arms.first().map_or(0, |a| a.num_states)
    }

    pub fn initial_states(&self) -> Vec<usize> {
        self.arms.iter().map(|a| a.initial_state).collect()
    }

    pub fn step_size(&self) -> f64 {
        self.eta.unwrap_or_else(|| default_step_size(self.num_states(), self.episodes))
    }
}

/// `sqrt(ln(|S|^2 |A|) / T)`, capped at 1 so that `eta * r_hat <= 1` always holds.
pub fn default_step_size(num_states: usize, episodes: usize) -> f64 {
    let s = num_states.max(1) as f64;
    let eta = math::sqrt(math::ln(s * s * NUM_ACTIONS as f64) / episodes.max(1) as f64);
    eta.min(1.0)
}

/// Checks every invariant of a scenario and renormalizes near-stochastic kernel rows.
pub fn validate_scenario(mut scenario: Scenario) -> Result<Scenario> {
    if scenario.arms.is_empty() {
        return Err(ArmabError::InvalidParameter("scenario has no arms".into()));
    }
    let states = scenario.num_states();
    for (n, arm) in scenario.arms.iter_mut().enumerate() {
        if arm.num_states != states {
            return Err(ArmabError::DimensionMismatch(format!(
                "arm {n} has {} states, arm 0 has {states}",
                arm.num_states
            )));
        }
        arm.arm_id = n;
        arm.validate()?;
    }
    if scenario.budget == 0 {
        return Err(ArmabError::InvalidParameter("budget must be at least 1".into()));
    }
    if scenario.budget > scenario.arms.len() {
        return Err(ArmabError::BudgetExceedsArms { budget: scenario.budget, arms: scenario.arms.len() });
    }
    if scenario.horizon == 0 || scenario.episodes == 0 {
        return Err(ArmabError::InvalidParameter("horizon and episodes must be at least 1".into()));
    }
    if !(scenario.epsilon > 0.0 && scenario.epsilon < 1.0) {
        return Err(ArmabError::InvalidParameter(format!("epsilon {} outside (0, 1)", scenario.epsilon)));
    }
    if let Some(eta) = scenario.eta {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(ArmabError::InvalidParameter(format!("eta {eta} must be positive")));
        }
    }
    let sched = &scenario.schedule;
    if sched.episodes != scenario.episodes || sched.num_arms != scenario.arms.len() || sched.num_states != states {
        return Err(ArmabError::DimensionMismatch(format!(
            "schedule is {}x{}x{}, scenario is {}x{}x{}",
            sched.episodes,
            sched.num_arms,
            sched.num_states,
            scenario.episodes,
            scenario.arms.len(),
            states
        )));
    }
    sched.validate()?;
    Ok(scenario)
}

/// What one arm did at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub active: bool,
    /// Reward of the visited pair, revealed because the pair was visited.
    pub reward: f64,
    pub next_state: usize,
}

impl Step {
    #[inline]
    pub fn action(&self) -> usize {
        usize::from(self.active)
    }
}

/// One episode of play, stored epoch-major: `steps[h * N + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub episode: usize,
    pub num_arms: usize,
    pub horizon: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    #[inline]
    pub fn step(&self, h: usize, n: usize) -> &Step {
        &self.steps[h * self.num_arms + n]
    }

    pub fn arm(&self, n: usize) -> impl Iterator<Item = &Step> + '_ {
        (0..self.horizon).map(move |h| self.step(h, n))
    }

    /// Total reward collected over the episode, passive rewards included.
    pub fn realized_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn active_count(&self, h: usize) -> usize {
        (0..self.num_arms).filter(|&n| self.step(h, n).active).count()
    }
}

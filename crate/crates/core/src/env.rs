//! The interaction protocol: all arms start at their fixed initial state,
//! exactly `B` arms are activated at every epoch, the visited pair's reward is
//! revealed and every arm moves according to its kernel.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ArmabError, Result};
use crate::model::{Scenario, Step, Trajectory};
use crate::rng;

/// Anything that can choose the active set at an epoch.
pub trait Policy {
    /// Writes one flag per arm into `actions`; exactly `B` must be set.
    fn select(&mut self, epoch: usize, states: &[usize], actions: &mut [bool]);
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn select(&mut self, epoch: usize, states: &[usize], actions: &mut [bool]) {
        (**self).select(epoch, states, actions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub episode: usize,
    /// Number of epochs already played (0-based index of the next epoch).
    pub epoch: usize,
    pub states: Vec<usize>,
    /// Key of the episode's random stream.
    pub seed: u64,
}

impl EnvState {
    /// Places every arm at its initial state for episode `t` (1-based).
    pub fn reset(scenario: &Scenario, episode: usize, seed: u64) -> Result<Self> {
        if episode == 0 || episode > scenario.episodes {
            return Err(ArmabError::EpisodeOutOfRange { episode, episodes: scenario.episodes });
        }
        Ok(Self { episode, epoch: 0, states: scenario.initial_states(), seed })
    }

    /// Plays one epoch. Returns the reward observed on each arm; `self.states`
    /// holds the next states afterwards.
    pub fn step(&mut self, scenario: &Scenario, actions: &[bool]) -> Result<Vec<f64>> {
        let n_arms = scenario.num_arms();
        if actions.len() != n_arms {
            return Err(ArmabError::DimensionMismatch(format!("{} actions for {n_arms} arms", actions.len())));
        }
        if self.epoch >= scenario.horizon {
            return Err(ArmabError::EpochOverrun { horizon: scenario.horizon });
        }
        let active = actions.iter().filter(|&&a| a).count();
        if active != scenario.budget {
            return Err(ArmabError::BudgetViolation { active, budget: scenario.budget });
        }
        let mut rewards = vec![0.0; n_arms];
        for (n, arm) in scenario.arms.iter().enumerate() {
            let s = self.states[n];
            let a = usize::from(actions[n]);
            rewards[n] = scenario.schedule.reward(self.episode, n, s, a);
            let u = rng::uniform_at(self.seed, rng::DOMAIN_ENV, self.episode, self.epoch, n, n_arms);
            self.states[n] = rng::sample_index(arm.row(s, a), u);
        }
        self.epoch += 1;
        Ok(rewards)
    }
}

/// Plays episode `t` under `policy` and records every step.
pub fn run_episode<P: Policy + ?Sized>(
    scenario: &Scenario,
    episode: usize,
    policy: &mut P,
    seed: u64,
) -> Result<Trajectory> {
    let mut env = EnvState::reset(scenario, episode, seed)?;
    let n_arms = scenario.num_arms();
    let mut actions = vec![false; n_arms];
    let mut steps = Vec::with_capacity(n_arms * scenario.horizon);
    for h in 0..scenario.horizon {
        actions.iter_mut().for_each(|a| *a = false);
        policy.select(h, &env.states, &mut actions);
        let before = env.states.clone();
        let rewards = env.step(scenario, &actions)?;
        for n in 0..n_arms {
            steps.push(Step { state: before[n], active: actions[n], reward: rewards[n], next_state: env.states[n] });
        }
    }
    Ok(Trajectory { episode, num_arms: n_arms, horizon: scenario.horizon, steps })
}

/// Activates a fixed set of arms at every epoch.
#[derive(Debug, Clone)]
pub struct FixedPolicy(pub Vec<bool>);

impl Policy for FixedPolicy {
    fn select(&mut self, _epoch: usize, _states: &[usize], actions: &mut [bool]) {
        actions.copy_from_slice(&self.0);
    }
}

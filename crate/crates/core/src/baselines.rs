//! Comparators: a stochastic-RMAB UCRL learner built on sample-mean rewards
//! and an optimistic extended LP, a uniformly random policy and a myopic
//! greedy policy.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use crate::env::Policy;
use crate::index::top_b;
use crate::model::{Trajectory, NUM_ACTIONS};
use crate::rng;

/// Running sums and counts of observed rewards per `(n, s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeanRewards {
    pub num_arms: usize,
    pub num_states: usize,
    pub sums: Vec<f64>,
    pub counts: Vec<u64>,
}

impl SampleMeanRewards {
    pub fn new(num_arms: usize, num_states: usize) -> Self {
        let pairs = num_arms * num_states * NUM_ACTIONS;
        Self { num_arms, num_states, sums: vec![0.0; pairs], counts: vec![0; pairs] }
    }

    pub fn update(&mut self, trajectory: &Trajectory) {
        for n in 0..trajectory.num_arms {
            for step in trajectory.arm(n) {
                let i = (n * self.num_states + step.state) * NUM_ACTIONS + step.action();
                self.sums[i] += step.reward;
                self.counts[i] += 1;
            }
        }
    }

    /// Sample mean, or 1 for pairs never visited.
    #[inline]
    pub fn mean(&self, n: usize, s: usize, a: usize) -> f64 {
        let i = (n * self.num_states + s) * NUM_ACTIONS + a;
        if self.counts[i] == 0 {
            1.0
        } else {
            (self.sums[i] / self.counts[i] as f64).clamp(0.0, 1.0)
        }
    }

    /// All means as an `[n][s][a]` tensor.
    pub fn means(&self) -> Vec<f64> {
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| if c == 0 { 1.0 } else { (s / c as f64).clamp(0.0, 1.0) })
            .collect()
    }
}

/// Activates a uniformly random `B`-subset at every epoch.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    budget: usize,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    /// Draws from the stream of `(seed, episode)` reserved for this policy.
    pub fn new(budget: usize, seed: u64, episode: usize) -> Self {
        Self { budget, rng: rng::episode_stream(seed, rng::DOMAIN_RANDOM_POLICY, episode) }
    }
}

impl Policy for RandomPolicy {
    fn select(&mut self, _epoch: usize, states: &[usize], actions: &mut [bool]) {
        actions.iter_mut().for_each(|a| *a = false);
        for n in sample(&mut self.rng, states.len(), self.budget) {
            actions[n] = true;
        }
    }
}

/// Activates the `B` arms whose current state has the highest mean active
/// reward, ties by ascending arm id.
#[derive(Debug, Clone)]
pub struct GreedyPolicy<'a> {
    pub means: &'a SampleMeanRewards,
    pub budget: usize,
}

impl Policy for GreedyPolicy<'_> {
    fn select(&mut self, _epoch: usize, states: &[usize], actions: &mut [bool]) {
        let scores: Vec<f64> = states.iter().enumerate().map(|(n, &s)| self.means.mean(n, s, 1)).collect();
        top_b(&scores, self.budget, actions);
    }
}

/// Sample means plus an optional confidence bonus, capped at 1, as `[n][s][a]`.
pub fn optimistic_means(means: &SampleMeanRewards, delta: &[f64], bonus: bool) -> Vec<f64> {
    means.means().iter().zip(delta).map(|(&m, &d)| if bonus { (m + d).min(1.0) } else { m }).collect()
}

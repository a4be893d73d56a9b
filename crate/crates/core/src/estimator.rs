//! Optimistic reward estimates from one episode of bandit feedback.
//!
//! A visited pair `(s,a)` of arm `n` gets `min(r * H / c + delta, 1)`, where `c`
//! is the number of visits within the episode and `r` the reward observed on
//! that pair. Pairs never visited get 1. The estimate therefore never falls
//! below the true reward.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ArmabError, Result};
use crate::model::{Trajectory, NUM_ACTIONS};

/// Per-episode visit counts `c_n^t(s,a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeCounts {
    pub num_arms: usize,
    pub num_states: usize,
    /// `[n][s][a]`
    pub counts: Vec<u32>,
}

impl EpisodeCounts {
    pub fn from_trajectory(trajectory: &Trajectory, num_states: usize) -> Self {
        let mut counts = vec![0u32; trajectory.num_arms * num_states * NUM_ACTIONS];
        for n in 0..trajectory.num_arms {
            for step in trajectory.arm(n) {
                counts[(n * num_states + step.state) * NUM_ACTIONS + step.action()] += 1;
            }
        }
        Self { num_arms: trajectory.num_arms, num_states, counts }
    }

    #[inline]
    pub fn get(&self, n: usize, s: usize, a: usize) -> u32 {
        self.counts[(n * self.num_states + s) * NUM_ACTIONS + a]
    }

    pub fn arm_total(&self, n: usize) -> u32 {
        let w = self.num_states * NUM_ACTIONS;
        self.counts[n * w..(n + 1) * w].iter().sum()
    }
}

/// `r_hat[n][s][a]`, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardEstimate {
    pub num_arms: usize,
    pub num_states: usize,
    pub values: Vec<f64>,
}

impl RewardEstimate {
    #[inline]
    pub fn get(&self, n: usize, s: usize, a: usize) -> f64 {
        self.values[(n * self.num_states + s) * NUM_ACTIONS + a]
    }
}

/// Reward observed on each visited pair, `None` for unvisited pairs.
fn observed_rewards(trajectory: &Trajectory, num_states: usize) -> Vec<Option<f64>> {
    let mut observed = vec![None; trajectory.num_arms * num_states * NUM_ACTIONS];
    for n in 0..trajectory.num_arms {
        for step in trajectory.arm(n) {
            observed[(n * num_states + step.state) * NUM_ACTIONS + step.action()] = Some(step.reward);
        }
    }
    observed
}

fn check_counts(trajectory: &Trajectory, counts: &EpisodeCounts) -> Result<()> {
    if counts.num_arms != trajectory.num_arms {
        return Err(ArmabError::InconsistentCounts(format!(
            "{} arms counted, trajectory has {}",
            counts.num_arms, trajectory.num_arms
        )));
    }
    if EpisodeCounts::from_trajectory(trajectory, counts.num_states) != *counts {
        return Err(ArmabError::InconsistentCounts("visit counts differ".into()));
    }
    Ok(())
}

/// The capped, bonus-augmented estimator. `delta` is `[n][s][a]`.
pub fn estimate_rewards(
    trajectory: &Trajectory,
    counts: &EpisodeCounts,
    delta: &[f64],
    horizon: usize,
) -> Result<RewardEstimate> {
    check_counts(trajectory, counts)?;
    if delta.len() != counts.counts.len() {
        return Err(ArmabError::DimensionMismatch(format!("{} widths for {} pairs", delta.len(), counts.counts.len())));
    }
    let observed = observed_rewards(trajectory, counts.num_states);
    let values = observed
        .iter()
        .zip(&counts.counts)
        .zip(delta)
        .map(|((obs, &c), &d)| match obs {
            Some(r) => (r * horizon as f64 / f64::from(c.max(1)) + d).min(1.0),
            None => 1.0,
        })
        .collect();
    Ok(RewardEstimate { num_arms: counts.num_arms, num_states: counts.num_states, values })
}

/// The estimator's uncapped core `r * 1(visited) * H / max(c, 1)`, without bonus.
pub fn core_estimate(trajectory: &Trajectory, counts: &EpisodeCounts, horizon: usize) -> Result<Vec<f64>> {
    check_counts(trajectory, counts)?;
    let observed = observed_rewards(trajectory, counts.num_states);
    Ok(observed
        .iter()
        .zip(&counts.counts)
        .map(|(obs, &c)| obs.map_or(0.0, |r| r * horizon as f64 / f64::from(c.max(1))))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Step;
    use proptest::prelude::*;

    fn trajectory(arms: &[Vec<(usize, bool, f64)>]) -> Trajectory {
        let horizon = arms[0].len();
        let mut steps = Vec::new();
        for h in 0..horizon {
            for arm in arms {
                let (state, active, reward) = arm[h];
                steps.push(Step { state, active, reward, next_state: state });
            }
        }
        Trajectory { episode: 1, num_arms: arms.len(), horizon, steps }
    }

    #[test]
    fn episode_counts_per_arm() {
        let traj = trajectory(&[
            vec![(0, true, 0.1); 5],
            vec![(0, false, 0.0), (1, false, 0.0), (0, false, 0.0), (1, true, 0.3), (0, false, 0.0)],
        ]);
        let c = EpisodeCounts::from_trajectory(&traj, 2);
        assert_eq!(c.get(0, 0, 1), 5);
        assert_eq!(c.get(0, 0, 0) + c.get(0, 1, 0) + c.get(0, 1, 1), 0);
        assert_eq!((c.get(1, 0, 0), c.get(1, 1, 0), c.get(1, 1, 1)), (3, 1, 1));
        assert_eq!(c.arm_total(0), 5);
        assert_eq!(c.arm_total(1), 5);
    }

    #[test]
    fn estimator_formula_cap_and_unvisited() {
        // H = 10: pair (0,1) visited 6 times with reward 0.06; pair (1,1) visited 3 times with 0.6
        let mut arm = vec![(0, true, 0.06); 6];
        arm.extend(vec![(1, true, 0.6); 3]);
        arm.push((1, false, 0.0));
        let traj = trajectory(&[arm]);
        let counts = EpisodeCounts::from_trajectory(&traj, 2);
        let delta = [0.5, 0.02, 0.3, 0.05];
        let est = estimate_rewards(&traj, &counts, &delta, 10).unwrap();
        assert!((est.get(0, 0, 1) - 0.12).abs() < 1e-12);
        assert_eq!(est.get(0, 1, 1), 1.0);
        assert_eq!(est.get(0, 0, 0), 1.0);
        assert!((est.get(0, 1, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_counts_are_rejected() {
        let traj = trajectory(&[vec![(0, true, 0.5); 3]]);
        let mut counts = EpisodeCounts::from_trajectory(&traj, 2);
        counts.counts[1] += 1;
        assert!(matches!(estimate_rewards(&traj, &counts, &[0.1; 4], 3), Err(ArmabError::InconsistentCounts(_))));
    }

    proptest! {
        #[test]
        fn overestimates_and_stays_in_unit_interval(
            rewards in proptest::collection::vec(0.0f64..=1.0, 4),
            delta in proptest::collection::vec(0.0f64..=1.0, 4),
            bump in 0.0f64..0.5,
            path in proptest::collection::vec((0usize..2, any::<bool>()), 1..40),
        ) {
            let arm: Vec<_> = path.iter().map(|&(s, a)| (s, a, rewards[s * 2 + usize::from(a)])).collect();
            let traj = trajectory(&[arm]);
            let counts = EpisodeCounts::from_trajectory(&traj, 2);
            let h = traj.horizon;
            let est = estimate_rewards(&traj, &counts, &delta, h).unwrap();
            let bigger: Vec<f64> = delta.iter().map(|d| (d + bump).min(1.0)).collect();
            let est2 = estimate_rewards(&traj, &counts, &bigger, h).unwrap();
            for i in 0..4 {
                prop_assert!(est.values[i] >= rewards[i]);
                prop_assert!((0.0..=1.0).contains(&est.values[i]));
                prop_assert!(est2.values[i] >= est.values[i]);
            }
        }
    }
}

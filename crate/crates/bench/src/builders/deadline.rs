//! Deadline scheduling at an electric-vehicle charging station. A spot is
//! empty, `(0,0)`, or holds a vehicle needing `B` more units within `D` epochs.

use armab_core::{validate_scenario, ArmModel, RewardSchedule, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cpap::episode_coefficient;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeadlineParams {
    /// Charging spots (arms).
    pub spots: usize,
    /// Vehicles that can be charged at once (the budget).
    pub capacity: usize,
    pub horizon: usize,
    pub episodes: usize,
    pub max_deadline: usize,
    pub max_charge: usize,
    pub arrival_prob: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub eta: Option<f64>,
}

impl Default for DeadlineParams {
    fn default() -> Self {
        Self {
            spots: 20,
            capacity: 6,
            horizon: 50,
            episodes: 50,
            max_deadline: 12,
            max_charge: 9,
            arrival_prob: 0.7,
            seed: 0,
            epsilon: 0.05,
            eta: None,
        }
    }
}

/// Maps `(D, B)` to state indices: 0 is the empty spot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadlineStates {
    pub max_deadline: usize,
    pub max_charge: usize,
}

impl DeadlineStates {
    pub fn count(&self) -> usize {
        1 + self.max_deadline * self.max_charge
    }

    pub fn index(&self, deadline: usize, charge: usize) -> usize {
        if deadline == 0 || charge == 0 {
            0
        } else {
            1 + (deadline - 1) * self.max_charge + (charge - 1)
        }
    }

    pub fn pair(&self, s: usize) -> (usize, usize) {
        if s == 0 {
            (0, 0)
        } else {
            (1 + (s - 1) / self.max_charge, 1 + (s - 1) % self.max_charge)
        }
    }
}

/// Net reward of one epoch before normalization.
pub fn raw_reward(deadline: usize, charge: usize, active: bool) -> f64 {
    let a = f64::from(u8::from(active));
    if charge == 0 || deadline == 0 {
        0.0
    } else if deadline > 1 {
        0.5 * a
    } else {
        0.5 * a - 0.2 * (charge as f64 - a).powi(2)
    }
}

/// Affine map of the active raw reward into `[0, 1]`, before the episode coefficient.
pub fn normalized_active_reward(deadline: usize, charge: usize, max_charge: usize) -> f64 {
    let shift = 0.2 * (max_charge as f64).powi(2);
    ((raw_reward(deadline, charge, true) + shift) / (0.5 + shift)).clamp(0.0, 1.0)
}

fn transition_matrix(states: &DeadlineStates, arrival_prob: f64) -> Vec<f64> {
    let s_count = states.count();
    let fresh = arrival_prob / (states.max_deadline * states.max_charge) as f64;
    let mut t = vec![0.0; 2 * s_count * s_count];
    for a in 0..2 {
        for s in 0..s_count {
            let row = &mut t[(a * s_count + s) * s_count..(a * s_count + s + 1) * s_count];
            let (d, b) = states.pair(s);
            if d > 1 {
                let left = b - a.min(b);
                row[states.index(d - 1, left)] = 1.0;
            } else {
                row[0] = 1.0 - arrival_prob;
                row[1..].iter_mut().for_each(|p| *p = fresh);
            }
        }
    }
    t
}

pub fn build_deadline(params: &DeadlineParams) -> Result<Scenario> {
    let states = DeadlineStates { max_deadline: params.max_deadline, max_charge: params.max_charge };
    let s_count = states.count();
    let kernel = transition_matrix(&states, params.arrival_prob);
    let mut rng = ChaCha8Rng::seed_from_u64(armab_core::rng::mix64(params.seed ^ 0x6465_6164));
    let arms: Vec<ArmModel> = (0..params.spots)
        .map(|id| {
            let initial = if rng.random::<f64>() < params.arrival_prob { rng.random_range(1..s_count) } else { 0 };
            ArmModel::new(id, s_count, kernel.clone(), initial)
        })
        .collect();
    let per_arm: Vec<f64> = (0..s_count)
        .flat_map(|s| {
            let (d, b) = states.pair(s);
            [0.0, normalized_active_reward(d, b, params.max_charge)]
        })
        .collect();
    let base: Vec<f64> = (0..params.spots).flat_map(|_| per_arm.iter().copied()).collect();
    let coefficients: Vec<f64> = (1..=params.episodes).map(|t| episode_coefficient(t, params.episodes)).collect();
    let schedule = RewardSchedule::from_coefficients(params.spots, s_count, &base, &coefficients)?;
    let scenario = Scenario {
        arms,
        budget: params.capacity,
        horizon: params.horizon,
        episodes: params.episodes,
        schedule,
        epsilon: params.epsilon,
        eta: params.eta,
    };
    Ok(validate_scenario(scenario)?)
}

pub const REWARD_NORMALIZATION: &str =
    "r(s,1) = coeff_t * clamp((r_raw(s,1) + 0.2*Bmax^2) / (0.5 + 0.2*Bmax^2), 0, 1) \
     with coeff_t = (0.5 + (t-1)/(T-1)) / 1.5; r(s,0) = 0 (passive penalty folded into the shift)";

//! Continuous positive airway pressure therapy adherence: three adherence
//! levels, two patient clusters with their own passive dynamics, and an
//! intervention that lifts adherence.

use armab_core::model::NUM_ACTIONS;
use armab_core::{validate_scenario, ArmModel, RewardSchedule, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const NUM_STATES: usize = 3;

/// Passive kernel of cluster 1, rows are adherence levels 1..=3.
pub const CLUSTER_1: [[f64; 3]; 3] = [[0.0385, 0.0, 0.9615], [0.0, 0.0, 1.0], [0.0257, 0.0245, 0.9498]];

/// Passive kernel of cluster 2. The first row sums to 1.0003 and is
/// renormalized on validation.
pub const CLUSTER_2: [[f64; 3]; 3] = [[0.7427, 0.0741, 0.1835], [0.3399, 0.1634, 0.4967], [0.2323, 0.1020, 0.6657]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpapParams {
    pub arms_per_cluster: usize,
    pub budget: usize,
    pub horizon: usize,
    pub episodes: usize,
    /// Scale of the Dirichlet(1) noise added to each passive row.
    pub noise_scale: f64,
    /// Range of the per-arm uplift; a degenerate range fixes it.
    pub uplift_min: f64,
    pub uplift_max: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub eta: Option<f64>,
}

impl Default for CpapParams {
    fn default() -> Self {
        Self {
            arms_per_cluster: 10,
            budget: 10,
            horizon: 50,
            episodes: 50,
            noise_scale: 0.05,
            uplift_min: 0.05,
            uplift_max: 0.5,
            seed: 0,
            epsilon: 0.05,
            eta: None,
        }
    }
}

/// `(0.5 + (t-1)/(T-1)) / 1.5`, so the last episode has coefficient 1.
pub fn episode_coefficient(t: usize, episodes: usize) -> f64 {
    let ramp = if episodes > 1 { (t - 1) as f64 / (episodes - 1) as f64 } else { 0.0 };
    (0.5 + ramp) / 1.5
}

/// Moves `u` times the mass on every non-top state one level up.
pub fn uplift(row: &[f64], u: f64) -> Vec<f64> {
    let mut out = row.to_vec();
    for s in 0..row.len() - 1 {
        let moved = u * row[s];
        out[s] -= moved;
        out[s + 1] += moved;
    }
    out
}

pub fn build_cpap(params: &CpapParams) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(armab_core::rng::mix64(params.seed ^ 0x6370_6170));
    let dirichlet = Dirichlet::new([1.0; NUM_STATES]).expect("valid concentration");
    let n = 2 * params.arms_per_cluster;
    let mut arms = Vec::with_capacity(n);
    for id in 0..n {
        let base = if id < params.arms_per_cluster { &CLUSTER_1 } else { &CLUSTER_2 };
        let u = if params.uplift_max > params.uplift_min {
            rng.random_range(params.uplift_min..=params.uplift_max)
        } else {
            params.uplift_min
        };
        let mut passive = Vec::with_capacity(NUM_STATES * NUM_STATES);
        for row in base {
            let sum: f64 = row.iter().sum();
            let mut noisy: Vec<f64> = row.iter().map(|p| p / sum).collect();
            if params.noise_scale > 0.0 {
                let noise = dirichlet.sample(&mut rng);
                noisy.iter_mut().zip(noise).for_each(|(p, e)| *p += params.noise_scale * e);
                let total: f64 = noisy.iter().sum();
                noisy.iter_mut().for_each(|p| *p /= total);
            }
            passive.extend(noisy);
        }
        let active: Vec<f64> = passive.chunks(NUM_STATES).flat_map(|row| uplift(row, u)).collect();
        let initial = rng.random_range(0..NUM_STATES);
        arms.push(ArmModel::new(id, NUM_STATES, [passive, active].concat(), initial));
    }
    let base: Vec<f64> = (0..n).flat_map(|_| (0..NUM_STATES).flat_map(|s| [0.0, (s + 1) as f64 / 3.0])).collect();
    debug_assert_eq!(base.len(), n * NUM_STATES * NUM_ACTIONS);
    let coefficients: Vec<f64> = (1..=params.episodes).map(|t| episode_coefficient(t, params.episodes)).collect();
    let schedule = RewardSchedule::from_coefficients(n, NUM_STATES, &base, &coefficients)?;
    let scenario = Scenario {
        arms,
        budget: params.budget,
        horizon: params.horizon,
        episodes: params.episodes,
        schedule,
        epsilon: params.epsilon,
        eta: params.eta,
    };
    Ok(validate_scenario(scenario)?)
}

pub const REWARD_NORMALIZATION: &str =
    "r(s,1) = coeff_t * adherence(s) / 3 with coeff_t = (0.5 + (t-1)/(T-1)) / 1.5; r(s,0) = 0";

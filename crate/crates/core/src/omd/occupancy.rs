use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ArmabError, Result};
use crate::estimator::RewardEstimate;
use crate::math;
use crate::model::{Scenario, NUM_ACTIONS};

/// Smallest positive value a strictly positive occupancy entry may take.
pub const POSITIVE_FLOOR: f64 = 1e-300;

/// State-action-state occupancy `z_n(s,a,s';h)`, laid out `[n][h][s][a][s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyZ {
    pub num_arms: usize,
    pub horizon: usize,
    pub num_states: usize,
    pub data: Vec<f64>,
}

impl OccupancyZ {
    pub fn zeros(num_arms: usize, horizon: usize, num_states: usize) -> Self {
        Self {
            num_arms,
            horizon,
            num_states,
            data: vec![0.0; num_arms * horizon * num_states * NUM_ACTIONS * num_states],
        }
    }

    #[inline]
    pub fn layer_len(&self) -> usize {
        self.num_states * NUM_ACTIONS * self.num_states
    }

    #[inline]
    pub fn block_offset(&self, n: usize, h: usize, s: usize, a: usize) -> usize {
        (((n * self.horizon + h) * self.num_states + s) * NUM_ACTIONS + a) * self.num_states
    }

    #[inline]
    pub fn get(&self, n: usize, h: usize, s: usize, a: usize, next: usize) -> f64 {
        self.data[self.block_offset(n, h, s, a) + next]
    }

    #[inline]
    pub fn set(&mut self, n: usize, h: usize, s: usize, a: usize, next: usize, v: f64) {
        let i = self.block_offset(n, h, s, a) + next;
        self.data[i] = v;
    }

    /// `z_n(s,a,.;h)`
    pub fn block(&self, n: usize, h: usize, s: usize, a: usize) -> &[f64] {
        let start = self.block_offset(n, h, s, a);
        &self.data[start..start + self.num_states]
    }

    pub fn layer(&self, n: usize, h: usize) -> &[f64] {
        let start = self.block_offset(n, h, 0, 0);
        &self.data[start..start + self.layer_len()]
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.num_arms == other.num_arms && self.horizon == other.horizon && self.num_states == other.num_states
    }
}

/// `mu_n(s,a;h)`, laid out `[n][h][s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMu {
    pub num_arms: usize,
    pub horizon: usize,
    pub num_states: usize,
    pub data: Vec<f64>,
}

impl OccupancyMu {
    pub fn zeros(num_arms: usize, horizon: usize, num_states: usize) -> Self {
        Self { num_arms, horizon, num_states, data: vec![0.0; num_arms * horizon * num_states * NUM_ACTIONS] }
    }

    #[inline]
    pub fn offset(&self, n: usize, h: usize, s: usize, a: usize) -> usize {
        ((n * self.horizon + h) * self.num_states + s) * NUM_ACTIONS + a
    }

    #[inline]
    pub fn get(&self, n: usize, h: usize, s: usize, a: usize) -> f64 {
        self.data[self.offset(n, h, s, a)]
    }

    /// The `[h][s][a]` slice of one arm.
    pub fn arm(&self, n: usize) -> &[f64] {
        let w = self.horizon * self.num_states * NUM_ACTIONS;
        &self.data[n * w..(n + 1) * w]
    }

    pub fn arm_mut(&mut self, n: usize) -> &mut [f64] {
        let w = self.horizon * self.num_states * NUM_ACTIONS;
        &mut self.data[n * w..(n + 1) * w]
    }

    /// Expected number of active arms at epoch `h`.
    pub fn activation(&self, h: usize) -> f64 {
        (0..self.num_arms)
            .flat_map(|n| (0..self.num_states).map(move |s| (n, s)))
            .map(|(n, s)| self.get(n, h, s, 1))
            .sum()
    }

    /// `sum_h <mu_n(.,.;h), r_n>` summed over arms, for a time-invariant `r[n][s][a]`.
    pub fn inner(&self, reward: &[f64]) -> f64 {
        let sa = self.num_states * NUM_ACTIONS;
        let mut total = 0.0;
        for n in 0..self.num_arms {
            let r = &reward[n * sa..(n + 1) * sa];
            for layer in self.arm(n).chunks(sa) {
                total += layer.iter().zip(r).map(|(m, r)| m * r).sum::<f64>();
            }
        }
        total
    }
}

/// `mu(s,a;h) = sum_{s'} z(s,a,s';h)`.
pub fn mu_from_z(z: &OccupancyZ) -> OccupancyMu {
    let data = z.data.chunks(z.num_states).map(|block| block.iter().sum()).collect();
    OccupancyMu { num_arms: z.num_arms, horizon: z.horizon, num_states: z.num_states, data }
}

/// Occupancy of the policy that activates each arm independently with
/// probability `min(B/N, 1)`, rolled out under `p_hat` (`[n][s][a][s']`) from
/// each arm's initial state. It meets every constraint of the feasible set.
pub fn init_occupancy(scenario: &Scenario, p_hat: &[f64]) -> OccupancyZ {
    let (arms, horizon, states) = (scenario.num_arms(), scenario.horizon, scenario.num_states());
    let rho = (scenario.budget as f64 / arms as f64).min(1.0);
    let pi = [1.0 - rho, rho];
    let mut z = OccupancyZ::zeros(arms, horizon, states);
    let mut dist = vec![0.0; states];
    let mut next = vec![0.0; states];
    for (n, arm) in scenario.arms.iter().enumerate() {
        dist.iter_mut().for_each(|d| *d = 0.0);
        dist[arm.initial_state] = 1.0;
        for h in 0..horizon {
            next.iter_mut().for_each(|d| *d = 0.0);
            for s in 0..states {
                if dist[s] == 0.0 {
                    continue;
                }
                for (a, &pa) in pi.iter().enumerate() {
                    let row_start = ((n * states + s) * NUM_ACTIONS + a) * states;
                    let row = &p_hat[row_start..row_start + states];
                    let off = z.block_offset(n, h, s, a);
                    for (sp, &p) in row.iter().enumerate() {
                        let v = dist[s] * pa * p;
                        z.data[off + sp] = v;
                        next[sp] += v;
                    }
                }
            }
            core::mem::swap(&mut dist, &mut next);
        }
    }
    z
}

/// `z~ = z * exp(eta * r_hat(s,a))`, the maximizer of the linear reward term
/// minus the KL proximity term.
pub fn unconstrained_step(z_prev: &OccupancyZ, r_hat: &RewardEstimate, eta: f64) -> Result<OccupancyZ> {
    if r_hat.num_arms != z_prev.num_arms || r_hat.num_states != z_prev.num_states {
        return Err(ArmabError::DimensionMismatch(format!(
            "estimate is {}x{}, occupancy is {}x{}",
            r_hat.num_arms, r_hat.num_states, z_prev.num_arms, z_prev.num_states
        )));
    }
    if let Some(&worst) = r_hat.values.iter().find(|&&r| eta * r > 1.0 + 1e-12 || eta * r < 0.0) {
        return Err(ArmabError::StepSizeTooLarge(eta * worst));
    }
    let mut z = z_prev.clone();
    let s = z.num_states;
    for n in 0..z.num_arms {
        for h in 0..z.horizon {
            for st in 0..s {
                for a in 0..NUM_ACTIONS {
                    let factor = math::exp(eta * r_hat.get(n, st, a));
                    let off = z.block_offset(n, h, st, a);
                    for v in &mut z.data[off..off + s] {
                        if *v > 0.0 {
                            *v = (*v * factor).max(POSITIVE_FLOOR);
                        }
                    }
                }
            }
        }
    }
    Ok(z)
}

/// Unnormalized KL divergence `sum z ln(z/z_ref) - z + z_ref`.
pub fn kl_divergence(z: &OccupancyZ, z_ref: &OccupancyZ) -> f64 {
    assert!(z.same_shape(z_ref), "occupancy shapes differ");
    z.data
        .iter()
        .zip(&z_ref.data)
        .map(|(&x, &y)| if x == 0.0 { y } else { x * math::ln(x / y.max(POSITIVE_FLOOR)) - x + y })
        .sum()
}

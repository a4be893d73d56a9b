//! Finite-horizon backward induction for a single arm.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{ArmModel, NUM_ACTIONS};

/// A deterministic Markov plan for one arm and its occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPlan {
    /// `mu(s,a;h)`, `[h][s][a]`.
    pub mu: Vec<f64>,
    /// `active[h][s]`.
    pub active: Vec<bool>,
    /// Optimal value of the reward the plan was computed for.
    pub value: f64,
    /// Expected activations per epoch.
    pub activation: Vec<f64>,
}

impl ArmPlan {
    /// `sum_h <mu(.,.;h), r>` for a time-invariant `r[s][a]`.
    pub fn inner(&self, reward: &[f64]) -> f64 {
        self.mu.chunks(reward.len()).map(|layer| layer.iter().zip(reward).map(|(m, r)| m * r).sum::<f64>()).sum()
    }
}

/// Backward induction where `kernel(h, s, a, v_next, q)` writes the next-state
/// distribution to use at `(s, a, h)` given the next-epoch values. Ties go to
/// the passive action. `reward(h, s, a)` is the per-step reward.
pub fn backward_induction<R, K>(
    num_states: usize,
    horizon: usize,
    initial_state: usize,
    reward: R,
    mut kernel: K,
) -> ArmPlan
where
    R: Fn(usize, usize, usize) -> f64,
    K: FnMut(usize, usize, usize, &[f64], &mut [f64]),
{
    let sa = num_states * NUM_ACTIONS;
    // Kernel of the chosen action, `[h][s][s']`.
    let mut kernels = vec![0.0; horizon * num_states * num_states];
    let mut active = vec![false; horizon * num_states];
    let mut v_next = vec![0.0; num_states];
    let mut v = vec![0.0; num_states];
    let mut q = [vec![0.0; num_states], vec![0.0; num_states]];
    for h in (0..horizon).rev() {
        for s in 0..num_states {
            let mut values = [0.0; NUM_ACTIONS];
            for (a, value) in values.iter_mut().enumerate() {
                kernel(h, s, a, &v_next, &mut q[a]);
                *value = reward(h, s, a) + q[a].iter().zip(&v_next).map(|(p, v)| p * v).sum::<f64>();
            }
            let act = values[1] > values[0];
            active[h * num_states + s] = act;
            v[s] = values[usize::from(act)];
            let off = (h * num_states + s) * num_states;
            kernels[off..off + num_states].copy_from_slice(&q[usize::from(act)]);
        }
        core::mem::swap(&mut v, &mut v_next);
    }
    let value = v_next[initial_state];
    let mut mu = vec![0.0; horizon * sa];
    let mut activation = vec![0.0; horizon];
    let mut dist = vec![0.0; num_states];
    let mut next = vec![0.0; num_states];
    dist[initial_state] = 1.0;
    for h in 0..horizon {
        next.iter_mut().for_each(|d| *d = 0.0);
        for s in 0..num_states {
            if dist[s] == 0.0 {
                continue;
            }
            let a = usize::from(active[h * num_states + s]);
            mu[h * sa + s * NUM_ACTIONS + a] = dist[s];
            if a == 1 {
                activation[h] += dist[s];
            }
            let off = (h * num_states + s) * num_states;
            for (sp, p) in kernels[off..off + num_states].iter().enumerate() {
                next[sp] += dist[s] * p;
            }
        }
        core::mem::swap(&mut dist, &mut next);
    }
    ArmPlan { mu, active, value, activation }
}

/// Optimal plan of one arm under its true kernel for the penalized reward
/// `reward[h][s][a]`.
pub fn per_arm_dp(arm: &ArmModel, reward: &[f64], horizon: usize) -> ArmPlan {
    let s_count = arm.num_states;
    let sa = s_count * NUM_ACTIONS;
    backward_induction(
        s_count,
        horizon,
        arm.initial_state,
        |h, s, a| reward[h * sa + s * NUM_ACTIONS + a],
        |_, s, a, _, q| q.copy_from_slice(arm.row(s, a)),
    )
}

/// The distribution in `{l <= q <= u, sum q = 1}` maximizing `<q, v>`: start
/// from the lower bounds and pour the remaining mass into the highest-value
/// states first. `order` is scratch space.
pub fn optimistic_row(lower: &[f64], upper: &[f64], values: &[f64], q: &mut [f64], order: &mut Vec<usize>) {
    sort_by_value(values, order);
    pour(lower, upper, order, q);
}

fn sort_by_value(values: &[f64], order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..values.len());
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
}

fn pour(lower: &[f64], upper: &[f64], order: &[usize], q: &mut [f64]) {
    q.copy_from_slice(lower);
    let mut remaining = 1.0 - lower.iter().sum::<f64>();
    for &i in order {
        if remaining <= 0.0 {
            break;
        }
        let add = (upper[i] - lower[i]).min(remaining);
        q[i] += add;
        remaining -= add;
    }
}

/// Plan of one arm over the extended MDP whose kernels range over the box
/// `[max(p_hat - delta, 0), min(p_hat + delta, 1)]` intersected with the
/// simplex. `p_hat` is `[s][a][s']`, `delta` is `[s][a]`.
pub fn optimistic_dp(p_hat: &[f64], delta: &[f64], initial_state: usize, reward: &[f64], horizon: usize) -> ArmPlan {
    let s_count = delta.len() / NUM_ACTIONS;
    let sa = s_count * NUM_ACTIONS;
    let lower: Vec<f64> =
        p_hat.chunks(s_count).zip(delta).flat_map(|(row, &d)| row.iter().map(move |p| (p - d).max(0.0))).collect();
    let upper: Vec<f64> =
        p_hat.chunks(s_count).zip(delta).flat_map(|(row, &d)| row.iter().map(move |p| (p + d).min(1.0))).collect();
    let mut order = Vec::with_capacity(s_count);
    let mut sorted_for = usize::MAX;
    backward_induction(
        s_count,
        horizon,
        initial_state,
        |h, s, a| reward[h * sa + s * NUM_ACTIONS + a],
        |h, s, a, v_next, q| {
            if sorted_for != h {
                sort_by_value(v_next, &mut order);
                sorted_for = h;
            }
            let range = (s * NUM_ACTIONS + a) * s_count..(s * NUM_ACTIONS + a + 1) * s_count;
            pour(&lower[range.clone()], &upper[range], &order, q);
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reward_is_all_passive() {
        let arm = ArmModel::new(0, 2, vec![0.5, 0.5, 0.5, 0.5, 0.2, 0.8, 0.7, 0.3], 0);
        let plan = per_arm_dp(&arm, &[0.0; 12], 3);
        assert_eq!(plan.value, 0.0);
        assert!(plan.active.iter().all(|a| !a));
        assert!(plan.activation.iter().all(|&x| x == 0.0));
        for h in 0..3 {
            let layer: f64 = plan.mu[h * 4..(h + 1) * 4].iter().sum();
            assert!((layer - 1.0).abs() < 1e-15);
            assert_eq!(plan.mu[h * 4 + 1] + plan.mu[h * 4 + 3], 0.0);
        }
    }

    #[test]
    fn deterministic_chain_always_active() {
        // s0 -> s1 -> s1 under both actions.
        let arm = ArmModel::new(0, 2, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0], 0);
        let reward: Vec<f64> = (0..2).flat_map(|_| [0.0, 1.0, 0.0, 1.0]).collect();
        let plan = per_arm_dp(&arm, &reward, 2);
        assert_eq!(plan.value, 2.0);
        assert_eq!(plan.mu, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(plan.activation, vec![1.0, 1.0]);
    }

    #[test]
    fn optimistic_row_pours_into_best_states() {
        let mut q = [0.0; 3];
        let mut order = Vec::new();
        optimistic_row(&[0.1, 0.2, 0.0], &[0.5, 0.6, 0.3], &[1.0, 0.0, 2.0], &mut q, &mut order);
        assert!((q[2] - 0.3).abs() < 1e-15);
        assert!((q[0] - 0.5).abs() < 1e-15);
        assert!((q[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn optimistic_dp_with_zero_width_matches_true_dp() {
        let arm = ArmModel::new(0, 2, vec![0.6, 0.4, 0.3, 0.7, 0.1, 0.9, 0.8, 0.2], 1);
        let reward: Vec<f64> = (0..4).flat_map(|_| [0.0, 0.3, 0.1, 0.8]).collect();
        let truth = per_arm_dp(&arm, &reward, 4);
        let opt = optimistic_dp(&arm.transition_by_pair(), &[0.0; 4], 1, &reward, 4);
        assert!((truth.value - opt.value).abs() < 1e-12);
        let wide = optimistic_dp(&arm.transition_by_pair(), &[0.2; 4], 1, &reward, 4);
        assert!(wide.value >= truth.value - 1e-12);
    }
}

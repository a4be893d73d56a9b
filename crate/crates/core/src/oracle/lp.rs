//! The relaxed occupancy LP, solved by Dantzig-Wolfe column generation.
//!
//! The only coupling between arms is the per-epoch budget row, so the master
//! problem mixes per-arm deterministic plans and the pricing step is one
//! backward induction per arm on the budget-penalized reward.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ArmabError, Result};
use crate::model::{ArmModel, RewardSchedule, Scenario, NUM_ACTIONS};
use crate::omd::OccupancyMu;

use super::dp::{per_arm_dp, ArmPlan};
use super::simplex::{Master, MasterColumn};

const MAX_MASTER_PIVOTS: usize = 200_000;
/// Columns kept in the master, per master row.
const MAX_COLUMNS_PER_ROW: usize = 4;
/// Weight of the best-bound multipliers in the pricing point.
const SMOOTHING: f64 = 0.7;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpConfig {
    /// Absolute primal-dual gap at which to stop; `None` means `1e-5 * N * H`.
    pub tol: Option<f64>,
    pub max_iters: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self { tol: None, max_iters: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub mu_star: OccupancyMu,
    /// Primal objective `sum_n sum_h <mu_n, r_n>`.
    pub value: f64,
    /// Budget multipliers per epoch.
    pub lambda_star: Vec<f64>,
    /// Best Lagrangian upper bound seen.
    pub dual_bound: f64,
    /// `dual_bound - value`, never negative up to round-off.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Generic column generation. `price(n, lambda)` must return the plan of arm
/// `n` maximizing `sum_h <mu, r_n> - lambda_h * activation_h`, with `value`
/// equal to that maximum. `reward_bound` bounds `|r|` and is used to pick a
/// penalty large enough to make the first plans all-passive. `warm`, if
/// given, seeds the master with plans priced at those budget multipliers.
#[allow(clippy::too_many_arguments)]
pub fn column_generation<P>(
    num_arms: usize,
    num_states: usize,
    horizon: usize,
    budget: usize,
    reward_bound: f64,
    config: &LpConfig,
    warm: Option<&[f64]>,
    mut price: P,
) -> Result<LpSolution>
where
    P: FnMut(usize, &[f64]) -> ArmPlan,
{
    if num_arms == 0 || horizon == 0 || budget > num_arms {
        return Err(ArmabError::InvalidParameter(format!(
            "LP needs 1 <= B <= N and H >= 1, got N={num_arms}, B={budget}, H={horizon}"
        )));
    }
    let tol = config.tol.unwrap_or(1e-5 * (num_arms * horizon) as f64);
    let b = budget as f64;
    let big = vec![2.0 * (horizon as f64 + 1.0) * reward_bound.max(1.0) + 1.0; horizon];
    let mut plans: Vec<ArmPlan> = Vec::new();
    let mut initial = Vec::with_capacity(num_arms);
    for n in 0..num_arms {
        let mut plan = price(n, &big);
        plan.activation.iter_mut().for_each(|a| *a = 0.0);
        initial.push(MasterColumn { arm: n, cost: plan.value, activation: vec![0.0; horizon] });
        plans.push(plan);
    }
    let mut master = Master::new(b, horizon, initial);
    // Master suboptimality is at most N times the largest reduced cost.
    let opt_tol = tol / (10.0 * num_arms as f64);
    let mut best_bound = f64::INFINITY;
    // Budget multipliers with the best Lagrangian bound so far.
    let mut center: Option<Vec<f64>> = None;
    let mut lambda = vec![0.0; horizon];
    let mut at = vec![0.0; horizon];
    let mut iterations = 0;
    let mut converged = false;
    let mut candidates: Vec<(usize, ArmPlan, f64)> = Vec::with_capacity(num_arms);
    if let Some(w) = warm.filter(|w| w.len() == horizon && w.iter().all(|l| l.is_finite() && *l >= 0.0)) {
        let mut bound = b * w.iter().sum::<f64>();
        for n in 0..num_arms {
            let plan = price(n, w);
            bound += plan.value;
            master.push(MasterColumn {
                arm: n,
                cost: plan.value + dot(&plan.activation, w),
                activation: plan.activation.clone(),
            });
            plans.push(plan);
        }
        best_bound = bound;
        center = Some(w.to_vec());
    }
    while iterations < config.max_iters {
        iterations += 1;
        master.solve(MAX_MASTER_PIVOTS, opt_tol)?;
        let y = master.duals();
        let (theta, lam) = y.split_at(num_arms);
        lambda.iter_mut().zip(lam).for_each(|(l, &v)| *l = v.max(0.0));
        let primal = master.objective();
        // Price at a point pulled toward the best-bound multipliers; fall back
        // to the master duals if that yields no improving column.
        let mut alpha = if center.is_some() { SMOOTHING } else { 0.0 };
        loop {
            match &center {
                Some(c) if alpha > 0.0 => {
                    for ((a, c), l) in at.iter_mut().zip(c).zip(&lambda) {
                        *a = alpha * c + (1.0 - alpha) * l;
                    }
                }
                _ => at.copy_from_slice(&lambda),
            }
            let mut bound = b * at.iter().sum::<f64>();
            candidates.clear();
            for n in 0..num_arms {
                let plan = price(n, &at);
                bound += plan.value;
                let cost = plan.value + dot(&plan.activation, &at);
                if cost - theta[n] - dot(&plan.activation, &lambda) > opt_tol {
                    candidates.push((n, plan, cost));
                }
            }
            if bound < best_bound {
                best_bound = bound;
                center = Some(at.clone());
            }
            if !candidates.is_empty() || alpha == 0.0 {
                break;
            }
            alpha = 0.0;
        }
        if best_bound - primal <= tol || candidates.is_empty() {
            converged = true;
            break;
        }
        let keep = master.prune(num_arms, MAX_COLUMNS_PER_ROW * (num_arms + horizon));
        let mut k = 0;
        plans.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        for (n, plan, cost) in candidates.drain(..) {
            master.push(MasterColumn { arm: n, cost, activation: plan.activation.clone() });
            plans.push(plan);
        }
    }
    if !converged {
        master.solve(MAX_MASTER_PIVOTS, opt_tol)?;
    }
    let value = master.objective();
    let mut mu_star = OccupancyMu::zeros(num_arms, horizon, num_states);
    for ((w, col), plan) in master.weights().iter().zip(&master.columns).zip(&plans) {
        if *w > 0.0 {
            for (m, p) in mu_star.arm_mut(col.arm).iter_mut().zip(&plan.mu) {
                *m += w * p;
            }
        }
    }
    Ok(LpSolution {
        mu_star,
        value,
        lambda_star: center.unwrap_or(lambda),
        dual_bound: best_bound,
        gap: (best_bound - value).max(0.0),
        iterations,
        converged,
    })
}

/// `[h][s][a]` reward `r(s,a) - lambda_h * a` for one arm.
pub fn penalized_reward(reward: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(reward.len() * lambda.len());
    for &l in lambda {
        out.extend(reward.chunks(NUM_ACTIONS).flat_map(|sa| [sa[0], sa[1] - l]));
    }
    out
}

/// Solves `max sum_n sum_h <mu_n, r_n>` over relaxed-budget occupancies
/// under the true kernels. `reward` is time-invariant `[n][s][a]`.
pub fn solve_relaxed_lp(
    arms: &[ArmModel],
    reward: &[f64],
    budget: usize,
    horizon: usize,
    config: &LpConfig,
) -> Result<LpSolution> {
    let states = arms.first().map_or(0, |a| a.num_states);
    let sa = states * NUM_ACTIONS;
    if reward.len() != arms.len() * sa {
        return Err(ArmabError::DimensionMismatch(format!(
            "{} rewards for {} arms with {states} states",
            reward.len(),
            arms.len()
        )));
    }
    let bound = reward.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    column_generation(arms.len(), states, horizon, budget, bound, config, None, |n, lambda| {
        per_arm_dp(&arms[n], &penalized_reward(&reward[n * sa..(n + 1) * sa], lambda), horizon)
    })
}

/// The hindsight reference: the LP optimum for the summed schedule and its
/// value on each episode.
#[derive(Debug, Clone, PartialEq)]
pub struct HindsightBaseline {
    pub solution: LpSolution,
    /// `<mu*, r^t>` for `t = 1..=T`.
    pub per_episode: Vec<f64>,
}

impl HindsightBaseline {
    pub fn total(&self) -> f64 {
        self.per_episode.iter().sum()
    }
}

pub fn hindsight_baseline(scenario: &Scenario, config: &LpConfig) -> Result<HindsightBaseline> {
    let total = scenario.schedule.total();
    let solution = solve_relaxed_lp(&scenario.arms, &total, scenario.budget, scenario.horizon, config)?;
    let per_episode = (1..=scenario.episodes).map(|t| solution.mu_star.inner(scenario.schedule.episode(t))).collect();
    Ok(HindsightBaseline { solution, per_episode })
}

/// `rho` independent copies of every arm sharing its reward row, with budget
/// `rho * B`. Copy `r` of arm `n` gets index `r * N + n`.
pub fn replicate_scenario(scenario: &Scenario, rho: usize) -> Result<Scenario> {
    if rho == 0 {
        return Err(ArmabError::InvalidParameter("replication factor must be at least 1".into()));
    }
    let n = scenario.num_arms();
    let s = scenario.num_states();
    let sa = s * NUM_ACTIONS;
    let mut arms = Vec::with_capacity(n * rho);
    for r in 0..rho {
        for arm in &scenario.arms {
            let mut copy = arm.clone();
            copy.arm_id = r * n + arm.arm_id;
            arms.push(copy);
        }
    }
    let sched = &scenario.schedule;
    let mut values = Vec::with_capacity(sched.values.len() * rho);
    for t in 1..=sched.episodes {
        let ep = sched.episode(t);
        for _ in 0..rho {
            values.extend_from_slice(&ep[..n * sa]);
        }
    }
    let schedule = RewardSchedule::from_tensor(sched.episodes, n * rho, s, values, sched.passive_zero)?;
    Ok(Scenario { arms, budget: scenario.budget * rho, schedule, ..scenario.clone() })
}

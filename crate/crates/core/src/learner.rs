//! Episode drivers: each learner chooses a policy for episode `t` from what it
//! has seen in episodes `1..t`, plays it and learns from the trajectory.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::baselines::{optimistic_means, GreedyPolicy, RandomPolicy, SampleMeanRewards};
use crate::confidence::{ConfidenceSet, Counts, WidthParams};
use crate::env::run_episode;
use crate::error::{ArmabError, Result};
use crate::estimator::{estimate_rewards, EpisodeCounts};
use crate::index::{IndexPolicy, IndexTable};
use crate::model::{Scenario, Trajectory, NUM_ACTIONS};
use crate::omd::{
    init_occupancy, project_kl, unconstrained_step, DualVars, FeasibleSetParams, OccupancyZ, ResidualReport,
    SolverConfig,
};
use crate::oracle::{column_generation, optimistic_dp, penalized_reward, LpConfig, LpSolution};

/// What happened in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub trajectory: Trajectory,
    /// Dual iterations spent projecting (0 when no projection ran).
    pub proj_iters: usize,
    /// Gap of the planning LP, when the learner solves one.
    pub lp_gap: Option<f64>,
    /// The planning step failed and the previous plan was reused.
    pub degraded: bool,
    /// Residuals of the occupancy the policy was derived from.
    pub residuals: Option<ResidualReport>,
}

impl EpisodeOutcome {
    fn plain(trajectory: Trajectory) -> Self {
        Self { trajectory, proj_iters: 0, lp_gap: None, degraded: false, residuals: None }
    }
}

pub trait Learner {
    /// Plays episode `t` (1-based, in order) on `scenario` with the
    /// environment stream keyed by `seed`.
    fn play_episode(&mut self, scenario: &Scenario, episode: usize, seed: u64) -> Result<EpisodeOutcome>;
}

fn width_params(scenario: &Scenario) -> WidthParams {
    WidthParams {
        num_states: scenario.num_states(),
        num_actions: NUM_ACTIONS,
        num_arms: scenario.num_arms(),
        horizon: scenario.horizon,
        epsilon: scenario.epsilon,
    }
}

/// Online mirror descent over occupancy measures with the RMI activation rule.
#[derive(Debug, Clone)]
pub struct UcmdArmab {
    pub solver: SolverConfig,
    counts: Counts,
    z: Option<OccupancyZ>,
    duals: Option<DualVars>,
    last: Option<Trajectory>,
}

impl UcmdArmab {
    pub fn new(scenario: &Scenario, solver: SolverConfig) -> Self {
        Self {
            solver,
            counts: Counts::new(scenario.num_arms(), scenario.num_states()),
            z: None,
            duals: None,
            last: None,
        }
    }

    pub fn counts(&self) -> &Counts {
        &self.counts
    }

    /// Occupancy the most recent policy was derived from.
    pub fn occupancy(&self) -> Option<&OccupancyZ> {
        self.z.as_ref()
    }
}

impl Learner for UcmdArmab {
    fn play_episode(&mut self, scenario: &Scenario, episode: usize, seed: u64) -> Result<EpisodeOutcome> {
        let conf = ConfidenceSet::build(&self.counts, episode, &width_params(scenario));
        let params = FeasibleSetParams::new(&conf, scenario.budget, scenario.horizon, scenario.initial_states());
        let mut proj_iters = 0;
        let mut degraded = false;
        let mut residuals = None;
        match (self.z.take(), self.last.as_ref()) {
            (Some(z_prev), Some(last)) => {
                let counts = EpisodeCounts::from_trajectory(last, scenario.num_states());
                let r_hat = estimate_rewards(last, &counts, &conf.delta, scenario.horizon)?;
                let z_tilde = unconstrained_step(&z_prev, &r_hat, scenario.step_size())?;
                match project_kl(&z_tilde, &params, &self.solver, self.duals.as_ref()) {
                    Ok(result) => {
                        proj_iters = result.iterations;
                        residuals = Some(result.residuals);
                        self.duals = Some(result.duals);
                        self.z = Some(result.z);
                    }
                    Err(ArmabError::SolverDiverged { iterations, .. }) => {
                        proj_iters = iterations;
                        degraded = true;
                        self.z = Some(z_prev);
                    }
                    Err(e) => return Err(e),
                }
            }
            _ => {
                let z = init_occupancy(scenario, &conf.p_hat);
                residuals = Some(crate::omd::feasibility_residuals(&z, &params));
                self.z = Some(z);
            }
        }
        let table = IndexTable::from_z(self.z.as_ref().expect("occupancy set above"));
        let mut policy = IndexPolicy::new(table, scenario.budget);
        let trajectory = run_episode(scenario, episode, &mut policy, seed)?;
        self.counts.update(&trajectory);
        self.last = Some(trajectory.clone());
        Ok(EpisodeOutcome { trajectory, proj_iters, lp_gap: None, degraded, residuals })
    }
}

/// Default planning gap of [`RmabUcrl`] per arm and epoch. The plan only
/// feeds a ranking, so it is looser than the hindsight LP's.
pub const PLANNING_TOL: f64 = 1e-3;

/// UCRL for stochastic restless bandits: sample-mean rewards (plus an
/// optional confidence bonus) planned through the optimistic extended LP,
/// then played with the RMI rule.
#[derive(Debug, Clone)]
pub struct RmabUcrl {
    pub reward_bonus: bool,
    pub lp: LpConfig,
    counts: Counts,
    means: SampleMeanRewards,
    last_lambda: Option<Vec<f64>>,
}

impl RmabUcrl {
    pub fn new(scenario: &Scenario, reward_bonus: bool, lp: LpConfig) -> Self {
        Self {
            reward_bonus,
            lp,
            counts: Counts::new(scenario.num_arms(), scenario.num_states()),
            means: SampleMeanRewards::new(scenario.num_arms(), scenario.num_states()),
            last_lambda: None,
        }
    }

    /// The optimistic plan for episode `t` given the data so far.
    pub fn plan(&self, scenario: &Scenario, episode: usize) -> Result<LpSolution> {
        let conf = ConfidenceSet::build(&self.counts, episode, &width_params(scenario));
        let reward = optimistic_means(&self.means, &conf.delta, self.reward_bonus);
        let (states, horizon) = (scenario.num_states(), scenario.horizon);
        let sa = states * NUM_ACTIONS;
        let warm = self.last_lambda.as_deref();
        let lp =
            LpConfig { tol: self.lp.tol.or(Some(PLANNING_TOL * (scenario.num_arms() * horizon) as f64)), ..self.lp };
        column_generation(scenario.num_arms(), states, horizon, scenario.budget, 1.0, &lp, warm, |n, lambda| {
            optimistic_dp(
                &conf.p_hat[n * sa * states..(n + 1) * sa * states],
                &conf.delta[n * sa..(n + 1) * sa],
                scenario.arms[n].initial_state,
                &penalized_reward(&reward[n * sa..(n + 1) * sa], lambda),
                horizon,
            )
        })
    }
}

impl Learner for RmabUcrl {
    fn play_episode(&mut self, scenario: &Scenario, episode: usize, seed: u64) -> Result<EpisodeOutcome> {
        let plan = self.plan(scenario, episode)?;
        let mut policy = IndexPolicy::new(IndexTable::from_mu(&plan.mu_star), scenario.budget);
        let trajectory = run_episode(scenario, episode, &mut policy, seed)?;
        self.counts.update(&trajectory);
        self.means.update(&trajectory);
        self.last_lambda = Some(plan.lambda_star);
        Ok(EpisodeOutcome { lp_gap: Some(plan.gap), degraded: !plan.converged, ..EpisodeOutcome::plain(trajectory) })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RandomLearner;

impl Learner for RandomLearner {
    fn play_episode(&mut self, scenario: &Scenario, episode: usize, seed: u64) -> Result<EpisodeOutcome> {
        let mut policy = RandomPolicy::new(scenario.budget, seed, episode);
        run_episode(scenario, episode, &mut policy, seed).map(EpisodeOutcome::plain)
    }
}

#[derive(Debug, Clone)]
pub struct GreedyLearner {
    means: SampleMeanRewards,
}

impl GreedyLearner {
    pub fn new(scenario: &Scenario) -> Self {
        Self { means: SampleMeanRewards::new(scenario.num_arms(), scenario.num_states()) }
    }
}

impl Learner for GreedyLearner {
    fn play_episode(&mut self, scenario: &Scenario, episode: usize, seed: u64) -> Result<EpisodeOutcome> {
        let mut policy = GreedyPolicy { means: &self.means, budget: scenario.budget };
        let trajectory = run_episode(scenario, episode, &mut policy, seed)?;
        self.means.update(&trajectory);
        Ok(EpisodeOutcome::plain(trajectory))
    }
}

/// The RMI rule applied to a fixed index table, e.g. the one of the
/// hindsight LP under the true kernels.
#[derive(Debug, Clone)]
pub struct FixedIndexLearner {
    pub table: IndexTable,
}

impl Learner for FixedIndexLearner {
    fn play_episode(&mut self, scenario: &Scenario, episode: usize, seed: u64) -> Result<EpisodeOutcome> {
        let mut policy = IndexPolicy::new(self.table.clone(), scenario.budget);
        run_episode(scenario, episode, &mut policy, seed).map(EpisodeOutcome::plain)
    }
}

/// Plays all `T` episodes in order.
pub fn run_learner(scenario: &Scenario, learner: &mut dyn Learner, seed: u64) -> Result<Vec<EpisodeOutcome>> {
    (1..=scenario.episodes).map(|t| learner.play_episode(scenario, t, seed)).collect()
}

/// Boxes any learner, for callers that pick one at run time.
pub fn boxed<L: Learner + 'static>(learner: L) -> Box<dyn Learner> {
    Box::new(learner)
}

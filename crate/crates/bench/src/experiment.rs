//! Monte-Carlo rounds of one learner against the hindsight LP reference.

use std::time::Instant;

use armab_core::learner::{GreedyLearner, Learner, RandomLearner, RmabUcrl, UcmdArmab};
use armab_core::omd::{ResidualReport, SolverConfig};
use armab_core::oracle::{hindsight_baseline, HindsightBaseline, LpConfig};
use armab_core::rng::round_seed;
use armab_core::{Scenario, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{BenchError, Result};
use crate::runspec::{LearnerKind, RunSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Ok,
    Degraded,
}

/// One CSV row. `t` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretRecord {
    pub round: usize,
    pub t: usize,
    pub realized: f64,
    pub oracle: f64,
    pub cum_regret: f64,
    pub proj_iters: usize,
    pub lp_gap: f64,
    pub flag: Flag,
}

/// Everything a learner needs besides the scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSettings {
    pub kind: LearnerKind,
    pub solver: SolverConfig,
    pub lp: LpConfig,
    pub reward_bonus: bool,
}

impl LearnerSettings {
    pub fn new(kind: LearnerKind) -> Self {
        Self { kind, solver: SolverConfig::default(), lp: LpConfig::default(), reward_bonus: true }
    }

    pub fn build(&self, scenario: &Scenario) -> Box<dyn Learner + Send> {
        match self.kind {
            LearnerKind::UcmdArmab => Box::new(UcmdArmab::new(scenario, self.solver)),
            LearnerKind::RmabUcrl => Box::new(RmabUcrl::new(scenario, self.reward_bonus, self.lp)),
            LearnerKind::Random => Box::new(RandomLearner),
            LearnerKind::Greedy => Box::new(GreedyLearner::new(scenario)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub records: Vec<RegretRecord>,
    /// Residuals of each episode's planning occupancy, when there is one.
    pub residuals: Vec<Option<ResidualReport>>,
    pub trajectories: Option<Vec<Trajectory>>,
    pub seconds: f64,
}

impl RoundOutcome {
    pub fn degraded(&self) -> bool {
        self.records.iter().any(|r| r.flag == Flag::Degraded)
    }

    pub fn total_realized(&self) -> f64 {
        self.records.iter().map(|r| r.realized).sum()
    }

    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }
}

/// Plays round `round` with the environment stream `round_seed(base_seed, round)`.
pub fn run_round(
    scenario: &Scenario,
    baseline: &HindsightBaseline,
    settings: &LearnerSettings,
    round: usize,
    base_seed: u64,
    keep_trajectories: bool,
) -> Result<RoundOutcome> {
    let start = Instant::now();
    let seed = round_seed(base_seed, round as u64);
    let mut learner = settings.build(scenario);
    let mut records = Vec::with_capacity(scenario.episodes);
    let mut residuals = Vec::with_capacity(scenario.episodes);
    let mut trajectories = keep_trajectories.then(Vec::new);
    let mut cum_regret = 0.0;
    for t in 1..=scenario.episodes {
        let outcome = learner.play_episode(scenario, t, seed)?;
        let realized = outcome.trajectory.realized_reward();
        let oracle = baseline.per_episode[t - 1];
        cum_regret += oracle - realized;
        records.push(RegretRecord {
            round,
            t,
            realized,
            oracle,
            cum_regret,
            proj_iters: outcome.proj_iters,
            lp_gap: baseline.solution.gap,
            flag: if outcome.degraded { Flag::Degraded } else { Flag::Ok },
        });
        residuals.push(outcome.residuals);
        if let Some(list) = trajectories.as_mut() {
            list.push(outcome.trajectory);
        }
    }
    Ok(RoundOutcome { records, residuals, trajectories, seconds: start.elapsed().as_secs_f64() })
}

/// Runs rounds `0..rounds` on a pool of `workers` threads. The result does
/// not depend on `workers`.
pub fn run_rounds(
    scenario: &Scenario,
    baseline: &HindsightBaseline,
    settings: &LearnerSettings,
    rounds: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<RoundOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        (0..rounds)
            .into_par_iter()
            .map(|round| run_round(scenario, baseline, settings, round, base_seed, false))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub scenario: Scenario,
    pub baseline: HindsightBaseline,
    pub rounds: Vec<RoundOutcome>,
    /// Trajectories of round 0, if requested.
    pub trajectories: Option<Vec<Trajectory>>,
}

impl ExperimentOutput {
    pub fn records(&self) -> impl Iterator<Item = &RegretRecord> {
        self.rounds.iter().flat_map(|r| r.records.iter())
    }

    pub fn degraded(&self) -> bool {
        self.rounds.iter().any(RoundOutcome::degraded)
    }
}

pub fn run_experiment(spec: &RunSpec, scenario: Scenario, workers: usize) -> Result<ExperimentOutput> {
    spec.validate()?;
    let baseline = hindsight_baseline(&scenario, &spec.lp.config())?;
    let settings = LearnerSettings {
        kind: spec.learner,
        solver: spec.solver.config(),
        lp: spec.lp.config(),
        reward_bonus: spec.reward_bonus,
    };
    let rounds = run_rounds(&scenario, &baseline, &settings, spec.mc_rounds, spec.seed, workers)?;
    let trajectories = if spec.trajectories.is_some() {
        run_round(&scenario, &baseline, &settings, 0, spec.seed, true)?.trajectories
    } else {
        None
    };
    Ok(ExperimentOutput { scenario, baseline, rounds, trajectories })
}

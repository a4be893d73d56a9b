//! The relaxed LP under true kernels: the hindsight reference for regret.

mod dp;
mod lp;
mod simplex;

pub use dp::{backward_induction, optimistic_dp, optimistic_row, per_arm_dp, ArmPlan};
pub use lp::{
    column_generation, hindsight_baseline, penalized_reward, replicate_scenario, solve_relaxed_lp, HindsightBaseline,
    LpConfig, LpSolution,
};

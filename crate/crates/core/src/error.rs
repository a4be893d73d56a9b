use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = ArmabError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArmabError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("transition row (arm {arm}, state {state}, action {action}) sums to {sum}")]
    RowSumOutOfTolerance { arm: usize, state: usize, action: usize, sum: f64 },
    #[error("budget {budget} exceeds the number of arms {arms}")]
    BudgetExceedsArms { budget: usize, arms: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("episode {episode} outside 1..={episodes}")]
    EpisodeOutOfRange { episode: usize, episodes: usize },
    #[error("{active} arms activated, budget requires exactly {budget}")]
    BudgetViolation { active: usize, budget: usize },
    #[error("episode already ran all {horizon} epochs")]
    EpochOverrun { horizon: usize },
    #[error("episode counts disagree with the trajectory: {0}")]
    InconsistentCounts(String),
    #[error("step size too large: eta * r_hat = {0} > 1")]
    StepSizeTooLarge(f64),
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { solver: &'static str, iterations: usize, residual: f64 },
    #[error("confidence set is empty for arm {arm}, state {state}, action {action}")]
    InfeasibleSet { arm: usize, state: usize, action: usize },
}

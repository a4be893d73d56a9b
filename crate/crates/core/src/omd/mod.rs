//! Online mirror descent over occupancy measures.

mod feasible;
mod newton;
mod occupancy;
mod project;

pub use feasible::{feasibility_residuals, FeasibleSetParams, ResidualReport, RATIO_MASS_FLOOR};
pub use occupancy::{
    init_occupancy, kl_divergence, mu_from_z, unconstrained_step, OccupancyMu, OccupancyZ, POSITIVE_FLOOR,
};
pub use project::{box_simplex_kl, project_kl, DualVars, ProjectionResult, SolverConfig};

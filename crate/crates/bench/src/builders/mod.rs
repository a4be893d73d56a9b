//! Built-in scenarios.

pub mod cpap;
pub mod deadline;

pub use cpap::{build_cpap, CpapParams};
pub use deadline::{build_deadline, DeadlineParams};

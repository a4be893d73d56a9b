//! Scenario builders, file formats and the Monte-Carlo runner for
//! `armab-core`.

pub mod builders;
pub mod error;
pub mod experiment;
pub mod output;
pub mod runspec;
pub mod scenario_file;
pub mod stats;

pub use error::{BenchError, Result};

//! Learning in episodic adversarial restless multi-armed bandits.
//!
//! The crate is `no_std` (it needs `alloc`) and carries only the algorithms:
//!
//! - [`model`]: arms, reward schedules, scenarios and trajectories;
//! - [`env`]: the budgeted interaction loop with counter-based randomness;
//! - [`confidence`]: visit counts, empirical kernels and Hoeffding widths;
//! - [`estimator`]: the optimistic bandit-feedback reward estimator;
//! - [`omd`]: occupancy tensors, the exponential step and the KL projection;
//! - [`index`]: the reward-maximizing index and top-B activation;
//! - [`oracle`]: the relaxed occupancy LP used as the hindsight reference;
//! - [`baselines`]: sample-mean UCRL, random and greedy comparators;
//! - [`learner`]: episode drivers that tie the pieces together.
//!
//! File formats, scenario builders and the Monte-Carlo runner live in the
//! `armab-bench` crate.

#![no_std]
#![forbid(unsafe_code)]
// Dense kernels index several arrays by the same loop variable, and `!(x > 0.0)`
// deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod confidence;
pub mod env;
pub mod error;
pub mod estimator;
pub mod index;
pub mod learner;
pub(crate) mod math;
pub mod model;
pub mod omd;
pub mod oracle;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod rng;

pub use error::{ArmabError, Result};
pub use model::{validate_scenario, ArmModel, RewardSchedule, Scenario, Step, Trajectory};

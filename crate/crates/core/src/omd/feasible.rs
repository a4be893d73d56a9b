use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::confidence::ConfidenceSet;
use crate::error::{ArmabError, Result};
use crate::model::NUM_ACTIONS;

use super::occupancy::OccupancyZ;

/// Blocks with less total mass than this are ignored by the ratio check.
pub const RATIO_MASS_FLOOR: f64 = 1e-9;

/// Everything that defines the feasible set of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSetParams {
    pub num_arms: usize,
    pub num_states: usize,
    pub horizon: usize,
    /// `[n][s][a][s']`
    pub p_hat: Vec<f64>,
    /// `[n][s][a]`
    pub delta: Vec<f64>,
    pub budget: usize,
    pub initial_states: Vec<usize>,
}

impl FeasibleSetParams {
    pub fn new(conf: &ConfidenceSet, budget: usize, horizon: usize, initial_states: Vec<usize>) -> Self {
        Self {
            num_arms: conf.num_arms,
            num_states: conf.num_states,
            horizon,
            p_hat: conf.p_hat.clone(),
            delta: conf.delta.clone(),
            budget,
            initial_states,
        }
    }

    pub fn check(&self, z: &OccupancyZ) -> Result<()> {
        let pairs = self.num_arms * self.num_states * NUM_ACTIONS;
        if z.num_arms != self.num_arms
            || z.num_states != self.num_states
            || z.horizon != self.horizon
            || self.p_hat.len() != pairs * self.num_states
            || self.delta.len() != pairs
            || self.initial_states.len() != self.num_arms
        {
            return Err(ArmabError::DimensionMismatch(format!(
                "occupancy {}x{}x{} does not match feasible-set parameters {}x{}x{}",
                z.num_arms, z.horizon, z.num_states, self.num_arms, self.horizon, self.num_states
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn pair(&self, n: usize, s: usize, a: usize) -> usize {
        (n * self.num_states + s) * NUM_ACTIONS + a
    }

    pub fn p_hat_row(&self, n: usize, s: usize, a: usize) -> &[f64] {
        let start = self.pair(n, s, a) * self.num_states;
        &self.p_hat[start..start + self.num_states]
    }

    /// Entrywise bounds `[max(P^-d, 0), min(P^+d, 1)]` on the conditional
    /// next-state distribution of `(n, s, a)`.
    pub fn bounds(&self, n: usize, s: usize, a: usize, lower: &mut [f64], upper: &mut [f64]) {
        let d = self.delta[self.pair(n, s, a)];
        for ((p, l), u) in self.p_hat_row(n, s, a).iter().zip(lower.iter_mut()).zip(upper.iter_mut()) {
            *l = (p - d).max(0.0);
            *u = (p + d).min(1.0);
        }
    }
}

/// Largest absolute violation of each constraint family.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResidualReport {
    /// `|sum_{s,a,s'} z(.;h) - 1|` per arm and epoch.
    pub normalization: f64,
    /// Outflow minus inflow for `h >= 2`.
    pub flow: f64,
    /// Expected activations above `B`.
    pub budget: f64,
    /// Conditional next-state probabilities outside their confidence interval.
    pub ratio: f64,
    /// First-epoch mass away from the initial state.
    pub boundary: f64,
    pub negativity: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        [self.normalization, self.flow, self.budget, self.ratio, self.boundary, self.negativity]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Whether the report meets the tolerances used throughout the crate.
    pub fn within_tolerance(&self) -> bool {
        self.normalization <= 1e-8
            && self.boundary <= 1e-8
            && self.flow <= 1e-6
            && self.budget <= 1e-6
            && self.ratio <= 1e-6
            && self.negativity == 0.0
    }
}

pub fn feasibility_residuals(z: &OccupancyZ, params: &FeasibleSetParams) -> ResidualReport {
    let (arms, horizon, states) = (z.num_arms, z.horizon, z.num_states);
    let mut report = ResidualReport::default();
    let mut activation = vec![0.0; horizon];
    let mut inflow = vec![0.0; states];
    let mut lower = vec![0.0; states];
    let mut upper = vec![0.0; states];
    for n in 0..arms {
        inflow.iter_mut().for_each(|v| *v = 0.0);
        for h in 0..horizon {
            let layer = z.layer(n, h);
            report.normalization = report.normalization.max((layer.iter().sum::<f64>() - 1.0).abs());
            report.negativity = report.negativity.max(layer.iter().fold(0.0, |m, &v| m.max(-v)));
            let mut next_inflow = vec![0.0; states];
            for s in 0..states {
                let mut out = 0.0;
                for a in 0..NUM_ACTIONS {
                    let block = z.block(n, h, s, a);
                    let mass: f64 = block.iter().sum();
                    out += mass;
                    if a == 1 {
                        activation[h] += mass;
                    }
                    for (sp, v) in block.iter().enumerate() {
                        next_inflow[sp] += v;
                    }
                    if mass >= RATIO_MASS_FLOOR {
                        params.bounds(n, s, a, &mut lower, &mut upper);
                        for ((v, l), u) in block.iter().zip(&lower).zip(&upper) {
                            let q = v / mass;
                            report.ratio = report.ratio.max(q - u).max(l - q);
                        }
                    }
                }
                if h == 0 {
                    let target = if s == params.initial_states[n] { 1.0 } else { 0.0 };
                    report.boundary = report.boundary.max((out - target).abs());
                } else {
                    report.flow = report.flow.max((out - inflow[s]).abs());
                }
            }
            inflow = next_inflow;
        }
    }
    report.budget = activation.iter().fold(0.0, |m, &act| m.max(act - params.budget as f64));
    report
}

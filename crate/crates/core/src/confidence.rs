//! Visit counts, empirical transition kernels and Hoeffding confidence widths.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ArmabError, Result};
use crate::math;
use crate::model::{ArmModel, Trajectory, NUM_ACTIONS};

/// Cumulative counts `C_n(s,a)` and `C_n(s,a,s')` over all completed episodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    pub num_arms: usize,
    pub num_states: usize,
    /// `[n][s][a]`
    pub visits: Vec<u64>,
    /// `[n][s][a][s']`
    pub transitions: Vec<u64>,
}

impl Counts {
    pub fn new(num_arms: usize, num_states: usize) -> Self {
        let pairs = num_arms * num_states * NUM_ACTIONS;
        Self { num_arms, num_states, visits: vec![0; pairs], transitions: vec![0; pairs * num_states] }
    }

    #[inline]
    pub fn pair(&self, n: usize, s: usize, a: usize) -> usize {
        (n * self.num_states + s) * NUM_ACTIONS + a
    }

    #[inline]
    pub fn visits(&self, n: usize, s: usize, a: usize) -> u64 {
        self.visits[self.pair(n, s, a)]
    }

    pub fn transitions(&self, n: usize, s: usize, a: usize) -> &[u64] {
        let start = self.pair(n, s, a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    /// Adds one completed episode.
    pub fn update(&mut self, trajectory: &Trajectory) {
        for n in 0..trajectory.num_arms {
            for step in trajectory.arm(n) {
                let pair = self.pair(n, step.state, step.action());
                self.visits[pair] += 1;
                self.transitions[pair * self.num_states + step.next_state] += 1;
            }
        }
    }

    /// `C(s,a,s') / C(s,a)`, or the uniform row when `(s,a)` was never visited.
    pub fn empirical_transition(&self, n: usize, s: usize, a: usize) -> Vec<f64> {
        let c = self.visits(n, s, a);
        if c == 0 {
            return vec![1.0 / self.num_states as f64; self.num_states];
        }
        self.transitions(n, s, a).iter().map(|&k| k as f64 / c as f64).collect()
    }
}

/// Constants entering the width's log term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthParams {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_arms: usize,
    pub horizon: usize,
    pub epsilon: f64,
}

/// `min(1, sqrt(ln(4|S||A|N(t-1)H/eps) / (2 max(C,1))))` for episode `t >= 1`;
/// exactly 1 at `t = 1` or when the pair has no visits.
pub fn confidence_width(counts: &Counts, n: usize, s: usize, a: usize, episode: usize, params: &WidthParams) -> f64 {
    width_from_count(counts.visits(n, s, a), episode, params)
}

pub fn width_from_count(visits: u64, episode: usize, params: &WidthParams) -> f64 {
    if episode <= 1 || visits == 0 {
        return 1.0;
    }
    let arg = 4.0
        * params.num_states as f64
        * params.num_actions as f64
        * params.num_arms as f64
        * (episode - 1) as f64
        * params.horizon as f64
        / params.epsilon;
    let w = math::sqrt(math::ln(arg) / (2.0 * visits as f64));
    if w.is_nan() {
        1.0
    } else {
        w.min(1.0)
    }
}

/// Empirical kernels and widths in force during one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    pub num_arms: usize,
    pub num_states: usize,
    /// `[n][s][a][s']`
    pub p_hat: Vec<f64>,
    /// `[n][s][a]`
    pub delta: Vec<f64>,
}

impl ConfidenceSet {
    /// Confidence set for episode `t`, built from the counts of episodes `1..t`.
    pub fn build(counts: &Counts, episode: usize, params: &WidthParams) -> Self {
        let (arms, states) = (counts.num_arms, counts.num_states);
        let mut p_hat = Vec::with_capacity(arms * states * NUM_ACTIONS * states);
        let mut delta = Vec::with_capacity(arms * states * NUM_ACTIONS);
        for n in 0..arms {
            for s in 0..states {
                for a in 0..NUM_ACTIONS {
                    p_hat.extend(counts.empirical_transition(n, s, a));
                    delta.push(confidence_width(counts, n, s, a, episode, params));
                }
            }
        }
        Self { num_arms: arms, num_states: states, p_hat, delta }
    }

    pub fn row(&self, n: usize, s: usize, a: usize) -> &[f64] {
        let start = ((n * self.num_states + s) * NUM_ACTIONS + a) * self.num_states;
        &self.p_hat[start..start + self.num_states]
    }

    #[inline]
    pub fn width(&self, n: usize, s: usize, a: usize) -> f64 {
        self.delta[(n * self.num_states + s) * NUM_ACTIONS + a]
    }

    /// Whether every true probability lies within `delta` of its estimate.
    pub fn contains_truth(&self, arms: &[ArmModel]) -> Result<bool> {
        if arms.len() != self.num_arms || arms.iter().any(|a| a.num_states != self.num_states) {
            return Err(ArmabError::DimensionMismatch(format!(
                "confidence set is {}x{}, model has {} arms",
                self.num_arms,
                self.num_states,
                arms.len()
            )));
        }
        for (n, arm) in arms.iter().enumerate() {
            for s in 0..self.num_states {
                for a in 0..NUM_ACTIONS {
                    let d = self.width(n, s, a);
                    let ok = self.row(n, s, a).iter().zip(arm.row(s, a)).all(|(p_hat, p)| (p_hat - p).abs() <= d);
                    if !ok {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

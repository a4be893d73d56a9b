//! The reward-maximizing index and the top-B activation rule.

use alloc::vec::Vec;

use crate::env::Policy;
use crate::model::NUM_ACTIONS;
use crate::omd::{OccupancyMu, OccupancyZ};

/// Denominators below this give index 0.
pub const INDEX_MASS_FLOOR: f64 = 1e-12;

/// `I_n(s;h)`, laid out `[n][h][s]`. Ties in activation are broken by
/// ascending arm id.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTable {
    pub num_arms: usize,
    pub horizon: usize,
    pub num_states: usize,
    pub values: Vec<f64>,
}

impl IndexTable {
    /// Active mass over total mass of each `(n, s, h)`.
    pub fn from_mu(mu: &OccupancyMu) -> Self {
        let values = mu.data.chunks(NUM_ACTIONS).map(|sa| ratio(sa[1], sa[0] + sa[1])).collect();
        Self { num_arms: mu.num_arms, horizon: mu.horizon, num_states: mu.num_states, values }
    }

    pub fn from_z(z: &OccupancyZ) -> Self {
        let values = z
            .data
            .chunks(NUM_ACTIONS * z.num_states)
            .map(|block| {
                let (passive, active) = block.split_at(z.num_states);
                let active: f64 = active.iter().sum();
                ratio(active, active + passive.iter().sum::<f64>())
            })
            .collect();
        Self { num_arms: z.num_arms, horizon: z.horizon, num_states: z.num_states, values }
    }

    #[inline]
    pub fn get(&self, n: usize, h: usize, s: usize) -> f64 {
        self.values[(n * self.horizon + h) * self.num_states + s]
    }

    /// Activates the top-`budget` arms by their index at the current states.
    pub fn select_actions(&self, states: &[usize], h: usize, budget: usize, actions: &mut [bool]) {
        let scores: Vec<f64> = states.iter().enumerate().map(|(n, &s)| self.get(n, h, s)).collect();
        top_b(&scores, budget, actions);
    }
}

fn ratio(active: f64, total: f64) -> f64 {
    if total < INDEX_MASS_FLOOR {
        0.0
    } else {
        (active / total).clamp(0.0, 1.0)
    }
}

/// Sets exactly `budget` flags: highest scores first, ties by ascending arm id.
pub fn top_b(scores: &[f64], budget: usize, actions: &mut [bool]) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    actions.iter_mut().for_each(|a| *a = false);
    for &n in order.iter().take(budget) {
        actions[n] = true;
    }
}

/// Plays the RMI rule of a fixed index table.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexPolicy {
    pub table: IndexTable,
    pub budget: usize,
}

impl IndexPolicy {
    pub fn new(table: IndexTable, budget: usize) -> Self {
        Self { table, budget }
    }
}

impl Policy for IndexPolicy {
    fn select(&mut self, epoch: usize, states: &[usize], actions: &mut [bool]) {
        self.table.select_actions(states, epoch, self.budget, actions);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn table(values: Vec<f64>) -> IndexTable {
        IndexTable { num_arms: values.len(), horizon: 1, num_states: 1, values }
    }

    fn active_set(actions: &[bool]) -> Vec<usize> {
        actions.iter().enumerate().filter(|(_, &a)| a).map(|(n, _)| n).collect()
    }

    #[test]
    fn index_from_masses() {
        let mu = OccupancyMu { num_arms: 1, horizon: 1, num_states: 3, data: vec![0.1, 0.3, 0.5, 0.0, 0.0, 0.0] };
        let t = IndexTable::from_mu(&mu);
        assert!((t.get(0, 0, 0) - 0.75).abs() < 1e-15);
        assert_eq!(t.get(0, 0, 1), 0.0);
        assert_eq!(t.get(0, 0, 2), 0.0);
    }

    #[test]
    fn index_from_z_matches_mu() {
        let mut z = OccupancyZ::zeros(1, 1, 2);
        z.data.copy_from_slice(&[0.05, 0.05, 0.1, 0.2, 0.0, 0.0, 0.0, 0.0]);
        let t = IndexTable::from_z(&z);
        assert!((t.get(0, 0, 0) - 0.75).abs() < 1e-15);
        assert_eq!(t.get(0, 0, 1), 0.0);
    }

    #[test]
    fn top_b_examples() {
        let mut actions = vec![false; 4];
        table(vec![0.9, 0.2, 0.9, 0.5]).select_actions(&[0; 4], 0, 2, &mut actions);
        assert_eq!(active_set(&actions), vec![0, 2]);
        table(vec![0.4; 4]).select_actions(&[0; 4], 0, 2, &mut actions);
        assert_eq!(active_set(&actions), vec![0, 1]);
        table(vec![0.1, 0.7, 0.3, 0.0]).select_actions(&[0; 4], 0, 4, &mut actions);
        assert_eq!(active_set(&actions), vec![0, 1, 2, 3]);
    }

    proptest! {
        #[test]
        fn exactly_b_and_monotone_invariant(
            scores in proptest::collection::vec(0.0f64..=1.0, 1..12),
            b_frac in 0.0f64..=1.0,
        ) {
            let budget = ((scores.len() as f64) * b_frac).round() as usize;
            let mut a1 = vec![false; scores.len()];
            let mut a2 = vec![false; scores.len()];
            top_b(&scores, budget, &mut a1);
            prop_assert_eq!(a1.iter().filter(|&&a| a).count(), budget);
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            top_b(&transformed, budget, &mut a2);
            prop_assert_eq!(a1, a2);
        }
    }
}

//! Slow, independent reference solvers for tests: a row-action KL projection
//! with every constraint written out, LP vertex enumeration, and exhaustive
//! policy search.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::model::{ArmModel, NUM_ACTIONS};
use crate::omd::{FeasibleSetParams, OccupancyZ};

/// `sum_k a_k x_k <= rhs` (or `= rhs` when `equality`).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub equality: bool,
}

impl LinearConstraint {
    fn value(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let v = self.value(x) - self.rhs;
        if self.equality {
            v.abs()
        } else {
            v.max(0.0)
        }
    }
}

/// All constraints of the occupancy feasible set, one row each, over the
/// flattened `OccupancyZ::data` layout.
pub fn feasible_set_constraints(params: &FeasibleSetParams) -> Vec<LinearConstraint> {
    let (arms, horizon, states) = (params.num_arms, params.horizon, params.num_states);
    let idx = |n: usize, h: usize, s: usize, a: usize, sp: usize| {
        ((((n * horizon + h) * states + s) * NUM_ACTIONS + a) * states) + sp
    };
    let mut rows = Vec::new();
    for n in 0..arms {
        for h in 0..horizon {
            let mut norm = Vec::new();
            for s in 0..states {
                let mut out: Vec<(usize, f64)> = Vec::new();
                for a in 0..NUM_ACTIONS {
                    for sp in 0..states {
                        out.push((idx(n, h, s, a, sp), 1.0));
                        norm.push((idx(n, h, s, a, sp), 1.0));
                    }
                }
                if h == 0 {
                    let rhs = if s == params.initial_states[n] { 1.0 } else { 0.0 };
                    rows.push(LinearConstraint { coeffs: out, rhs, equality: true });
                } else {
                    for prev in 0..states {
                        for a in 0..NUM_ACTIONS {
                            out.push((idx(n, h - 1, prev, a, s), -1.0));
                        }
                    }
                    rows.push(LinearConstraint { coeffs: out, rhs: 0.0, equality: true });
                }
            }
            rows.push(LinearConstraint { coeffs: norm, rhs: 1.0, equality: true });
            let mut lower = vec![0.0; states];
            let mut upper = vec![0.0; states];
            for s in 0..states {
                for a in 0..NUM_ACTIONS {
                    params.bounds(n, s, a, &mut lower, &mut upper);
                    for sp in 0..states {
                        let mut up: Vec<(usize, f64)> = (0..states).map(|k| (idx(n, h, s, a, k), -upper[sp])).collect();
                        up[sp].1 += 1.0;
                        rows.push(LinearConstraint { coeffs: up, rhs: 0.0, equality: false });
                        let mut lo: Vec<(usize, f64)> = (0..states).map(|k| (idx(n, h, s, a, k), lower[sp])).collect();
                        lo[sp].1 -= 1.0;
                        rows.push(LinearConstraint { coeffs: lo, rhs: 0.0, equality: false });
                    }
                }
            }
        }
    }
    for h in 0..horizon {
        let mut act = Vec::new();
        for n in 0..arms {
            for s in 0..states {
                for sp in 0..states {
                    act.push((idx(n, h, s, 1, sp), 1.0));
                }
            }
        }
        rows.push(LinearConstraint { coeffs: act, rhs: params.budget as f64, equality: false });
    }
    rows
}

/// Solves `sum_k a_k x_k exp(-c a_k) = rhs` for `c`; the left side decreases in `c`.
fn row_step(row: &LinearConstraint, x: &[f64]) -> f64 {
    let g = |c: f64| -> f64 { row.coeffs.iter().map(|&(i, a)| a * x[i] * math::exp(-c * a)).sum::<f64>() - row.rhs };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) < 0.0 && lo > -1e6 {
        lo *= 2.0;
    }
    while g(hi) > 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Generalized-KL projection of `x_tilde` onto the polyhedron by Bregman's
/// row-action method with Hildreth-style dual corrections. Entries of
/// `x_tilde` that are zero stay zero.
pub fn dense_kl_projection(x_tilde: &[f64], rows: &[LinearConstraint], max_sweeps: usize, tol: f64) -> Vec<f64> {
    let mut x = x_tilde.to_vec();
    let mut duals = vec![0.0; rows.len()];
    for _ in 0..max_sweeps {
        let mut moved = 0.0f64;
        for (row, y) in rows.iter().zip(duals.iter_mut()) {
            if !row.equality && *y == 0.0 && row.value(&x) <= row.rhs {
                continue;
            }
            let mut c = row_step(row, &x);
            if !row.equality {
                c = c.max(-*y);
            }
            if c == 0.0 {
                continue;
            }
            *y += c;
            for &(i, a) in &row.coeffs {
                let before = x[i];
                x[i] *= math::exp(-c * a);
                moved = moved.max((x[i] - before).abs());
            }
        }
        let worst = rows.iter().map(|r| r.violation(&x)).fold(0.0, f64::max);
        if worst <= tol && moved <= tol {
            break;
        }
    }
    x
}

/// Dense projection of an occupancy tensor; structural first-epoch zeros
/// are imposed before projecting.
pub fn dense_project_occupancy(
    z_tilde: &OccupancyZ,
    params: &FeasibleSetParams,
    max_sweeps: usize,
    tol: f64,
) -> OccupancyZ {
    let mut start = z_tilde.clone();
    for n in 0..start.num_arms {
        for s in 0..start.num_states {
            if s != params.initial_states[n] {
                for a in 0..NUM_ACTIONS {
                    let off = start.block_offset(n, 0, s, a);
                    start.data[off..off + start.num_states].iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
    }
    let rows = feasible_set_constraints(params);
    let data = dense_kl_projection(&start.data, &rows, max_sweeps, tol);
    OccupancyZ { data, ..start }
}

/// Solves the square system `a x = b` by Gaussian elimination; `None` if singular.
fn solve_square(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))?;
        if a[p * m + c].abs() < 1e-10 {
            return None;
        }
        for k in 0..m {
            a.swap(p * m + k, c * m + k);
        }
        b.swap(p, c);
        for r in c + 1..m {
            let f = a[r * m + c] / a[c * m + c];
            for k in c..m {
                a[r * m + k] -= f * a[c * m + k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|k| a[r * m + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * m + r];
    }
    Some(x)
}

/// `max c.x` over `{A x = b, x >= 0}` by enumerating every basis.
/// `a` is row-major `m x n` with full row rank. Returns the optimum and a
/// maximizer, or `None` when no basic feasible solution exists.
pub fn lp_vertex_enumeration(a: &[f64], b: &[f64], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    let m = b.len();
    let n = c.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut basis: Vec<usize> = (0..m).collect();
    loop {
        let mut sub = vec![0.0; m * m];
        for r in 0..m {
            for (j, &col) in basis.iter().enumerate() {
                sub[r * m + j] = a[r * n + col];
            }
        }
        if let Some(xb) = solve_square(sub, b.to_vec()) {
            if xb.iter().all(|&v| v >= -1e-10) {
                let mut x = vec![0.0; n];
                for (j, &col) in basis.iter().enumerate() {
                    x[col] = xb[j].max(0.0);
                }
                let value: f64 = x.iter().zip(c).map(|(x, c)| x * c).sum();
                if best.as_ref().is_none_or(|(v, _)| value > *v) {
                    best = Some((value, x));
                }
            }
        }
        // next combination in lexicographic order
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if basis[i] < n - m + i {
                break;
            }
            if i == 0 {
                return best;
            }
        }
        basis[i] += 1;
        for k in i + 1..m {
            basis[k] = basis[k - 1] + 1;
        }
    }
}

/// The relaxed LP in standard form: variables `mu_n(h,s,a)` in
/// `[n][h][s][a]` order followed by one budget slack per epoch.
pub fn relaxed_lp_standard_form(
    arms: &[ArmModel],
    reward: &[f64],
    budget: usize,
    horizon: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n_arms = arms.len();
    let states = arms[0].num_states;
    let per_arm = horizon * states * NUM_ACTIONS;
    let cols = n_arms * per_arm + horizon;
    let var = |n: usize, h: usize, s: usize, a: usize| n * per_arm + (h * states + s) * NUM_ACTIONS + a;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for (n, arm) in arms.iter().enumerate() {
        for h in 0..horizon {
            for s in 0..states {
                let mut row = vec![0.0; cols];
                for a in 0..NUM_ACTIONS {
                    row[var(n, h, s, a)] = 1.0;
                }
                if h == 0 {
                    rhs.push(if s == arm.initial_state { 1.0 } else { 0.0 });
                } else {
                    for prev in 0..states {
                        for a in 0..NUM_ACTIONS {
                            row[var(n, h - 1, prev, a)] -= arm.prob(prev, a, s);
                        }
                    }
                    rhs.push(0.0);
                }
                rows.push(row);
            }
        }
    }
    for h in 0..horizon {
        let mut row = vec![0.0; cols];
        for n in 0..n_arms {
            for s in 0..states {
                row[var(n, h, s, 1)] = 1.0;
            }
        }
        row[n_arms * per_arm + h] = 1.0;
        rows.push(row);
        rhs.push(budget as f64);
    }
    let mut c = vec![0.0; cols];
    for n in 0..n_arms {
        for h in 0..horizon {
            for s in 0..states {
                for a in 0..NUM_ACTIONS {
                    c[var(n, h, s, a)] = reward[(n * states + s) * NUM_ACTIONS + a];
                }
            }
        }
    }
    (rows.concat(), rhs, c)
}

/// Best value over all `2^(S H)` deterministic Markov policies of one arm
/// for reward `r[h][s][a]`.
pub fn brute_force_dp(arm: &ArmModel, reward: &[f64], horizon: usize) -> f64 {
    let states = arm.num_states;
    let bits = states * horizon;
    let mut best = f64::NEG_INFINITY;
    for policy in 0u64..(1u64 << bits) {
        let mut dist = vec![0.0; states];
        dist[arm.initial_state] = 1.0;
        let mut value = 0.0;
        for h in 0..horizon {
            let mut next = vec![0.0; states];
            for s in 0..states {
                let a = ((policy >> (h * states + s)) & 1) as usize;
                value += dist[s] * reward[(h * states + s) * NUM_ACTIONS + a];
                for (sp, p) in arm.row(s, a).iter().enumerate() {
                    next[sp] += dist[s] * p;
                }
            }
            dist = next;
        }
        best = best.max(value);
    }
    best
}

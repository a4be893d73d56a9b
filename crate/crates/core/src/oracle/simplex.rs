//! Dense revised simplex for the column-generation master problem
//!
//! `max sum_k c_k w_k` subject to one convexity row per arm and one `<= B`
//! budget row per epoch, with an explicit basis inverse.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ArmabError, Result};

const REFACTOR_EVERY: usize = 100;
const DEGENERATE_BEFORE_BLAND: usize = 50;
const PIVOT_TOL: f64 = 1e-11;
const HARRIS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MasterColumn {
    pub arm: usize,
    pub cost: f64,
    /// Expected activations per epoch.
    pub activation: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Master {
    arms: usize,
    horizon: usize,
    rhs: Vec<f64>,
    pub columns: Vec<MasterColumn>,
    /// Variable index per row: `0..horizon` are slacks, then columns.
    basis: Vec<usize>,
    binv: Vec<f64>,
    pub xb: Vec<f64>,
    pivots_since_refactor: usize,
}

impl Master {
    /// `initial` must hold one column per arm with zero activation, in arm order.
    pub fn new(budget: f64, horizon: usize, initial: Vec<MasterColumn>) -> Self {
        let arms = initial.len();
        let m = arms + horizon;
        let mut rhs = vec![1.0; arms];
        rhs.extend(core::iter::repeat_n(budget, horizon));
        let mut basis = Vec::with_capacity(m);
        basis.extend((0..arms).map(|n| horizon + n));
        basis.extend(0..horizon);
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut master =
            Self { arms, horizon, xb: rhs.clone(), rhs, columns: initial, basis, binv, pivots_since_refactor: 0 };
        master.refactor();
        master
    }

    fn rows(&self) -> usize {
        self.arms + self.horizon
    }

    fn cost(&self, var: usize) -> f64 {
        if var < self.horizon {
            0.0
        } else {
            self.columns[var - self.horizon].cost
        }
    }

    fn entries(&self, var: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if var < self.horizon {
            out[self.arms + var] = 1.0;
        } else {
            let col = &self.columns[var - self.horizon];
            out[col.arm] = 1.0;
            out[self.arms..].copy_from_slice(&col.activation);
        }
    }

    fn reduced_cost(&self, var: usize, y: &[f64]) -> f64 {
        if var < self.horizon {
            -y[self.arms + var]
        } else {
            let col = &self.columns[var - self.horizon];
            let used: f64 = col.activation.iter().zip(&y[self.arms..]).map(|(a, b)| a * b).sum();
            col.cost - y[col.arm] - used
        }
    }

    /// Drops nonbasic columns beyond the first `keep_first`, keeping those with
    /// the largest reduced costs so that at most `max_columns` remain. Returns
    /// the retained flag of every old column.
    pub fn prune(&mut self, keep_first: usize, max_columns: usize) -> Vec<bool> {
        let total = self.columns.len();
        let mut keep = vec![false; total];
        if total <= max_columns {
            keep.iter_mut().for_each(|k| *k = true);
            return keep;
        }
        keep[..keep_first.min(total)].iter_mut().for_each(|k| *k = true);
        for &var in &self.basis {
            if var >= self.horizon {
                keep[var - self.horizon] = true;
            }
        }
        let y = self.duals();
        let mut rest: Vec<(f64, usize)> =
            (0..total).filter(|&k| !keep[k]).map(|k| (self.reduced_cost(self.horizon + k, &y), k)).collect();
        let room = max_columns.saturating_sub(keep.iter().filter(|&&k| k).count());
        rest.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, k) in rest.iter().take(room) {
            keep[k] = true;
        }
        let mut remap = vec![usize::MAX; total];
        let mut next = 0;
        for k in 0..total {
            if keep[k] {
                remap[k] = next;
                next += 1;
            }
        }
        let mut k = 0;
        self.columns.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        for var in &mut self.basis {
            if *var >= self.horizon {
                *var = self.horizon + remap[*var - self.horizon];
            }
        }
        keep
    }

    pub fn push(&mut self, column: MasterColumn) {
        self.columns.push(column);
    }

    /// Row duals `y = c_B B^-1`: convexity duals first, then budget duals.
    pub fn duals(&self) -> Vec<f64> {
        let m = self.rows();
        let mut y = vec![0.0; m];
        for (i, &var) in self.basis.iter().enumerate() {
            let c = self.cost(var);
            if c != 0.0 {
                for (j, yj) in y.iter_mut().enumerate() {
                    *yj += c * self.binv[i * m + j];
                }
            }
        }
        y
    }

    pub fn objective(&self) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&v, x)| self.cost(v) * x).sum()
    }

    /// Weight of every column at the current basic solution.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.columns.len()];
        for (&var, &x) in self.basis.iter().zip(&self.xb) {
            if var >= self.horizon {
                w[var - self.horizon] = x.max(0.0);
            }
        }
        w
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination.
    fn refactor(&mut self) {
        let m = self.rows();
        let mut a = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (j, &var) in self.basis.iter().enumerate() {
            self.entries(var, &mut col);
            for i in 0..m {
                a[i * m + j] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m).max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs())).unwrap_or(c);
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            if d.abs() < 1e-300 {
                continue;
            }
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            let v: f64 = (0..m).map(|j| self.binv[i * m + j] * self.rhs[j]).sum();
            self.xb[i] = if v.abs() < 1e-13 { 0.0 } else { v };
        }
        self.pivots_since_refactor = 0;
    }

    /// Runs primal simplex from the current (feasible) basis until no
    /// reduced cost exceeds `opt_tol`.
    pub fn solve(&mut self, max_pivots: usize, opt_tol: f64) -> Result<()> {
        let m = self.rows();
        let scale = self.columns.iter().map(|c| c.cost.abs()).fold(1.0, f64::max);
        let tol = opt_tol.max(1e-10 * scale);
        let mut col = vec![0.0; m];
        let mut u = vec![0.0; m];
        let mut degenerate = 0usize;
        let mut in_basis = vec![false; self.horizon + self.columns.len()];
        for &v in &self.basis {
            in_basis[v] = true;
        }
        let mut retried = false;
        if self.pivots_since_refactor > 0 {
            self.refactor();
        }
        for _ in 0..max_pivots {
            let y = self.duals();
            let bland = degenerate >= DEGENERATE_BEFORE_BLAND;
            let mut entering = None;
            let mut best = tol;
            for var in 0..self.horizon + self.columns.len() {
                if in_basis[var] {
                    continue;
                }
                let d = self.reduced_cost(var, &y);
                if d > best {
                    entering = Some(var);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(var) = entering else {
                if self.pivots_since_refactor > 0 {
                    self.refactor();
                }
                return Ok(());
            };
            self.entries(var, &mut col);
            for i in 0..m {
                u[i] = (0..m).map(|j| self.binv[i * m + j] * col[j]).sum();
            }
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let piv_tol = PIVOT_TOL.max(1e-9 * umax);
            let leave = if bland {
                let mut leave: Option<usize> = None;
                let mut ratio = f64::INFINITY;
                for i in (0..m).filter(|&i| u[i] > piv_tol) {
                    let r = self.xb[i].max(0.0) / u[i];
                    if leave.is_none_or(|l| r < ratio - 1e-14 || (r <= ratio + 1e-14 && self.basis[i] < self.basis[l]))
                    {
                        leave = Some(i);
                        ratio = r;
                    }
                }
                leave
            } else {
                // Harris: relax the bound, then take the largest pivot within it.
                let bound = (0..m)
                    .filter(|&i| u[i] > piv_tol)
                    .map(|i| (self.xb[i].max(0.0) + HARRIS_SLACK) / u[i])
                    .fold(f64::INFINITY, f64::min);
                (0..m).filter(|&i| u[i] > piv_tol && self.xb[i].max(0.0) / u[i] <= bound).max_by(|&a, &b| {
                    // Near-equal pivots: let a column leave before a slack.
                    if (u[a] - u[b]).abs() <= 1e-12 * umax {
                        (self.basis[a] >= self.horizon).cmp(&(self.basis[b] >= self.horizon))
                    } else {
                        u[a].total_cmp(&u[b])
                    }
                })
            };
            let Some(row) = leave else {
                if !retried && self.pivots_since_refactor > 0 {
                    // Drift in the basis inverse can hide the leaving row.
                    retried = true;
                    self.refactor();
                    continue;
                }
                return Err(ArmabError::SolverDiverged { solver: "lp-master", iterations: 0, residual: f64::INFINITY });
            };
            let ratio = self.xb[row].max(0.0) / u[row];
            degenerate = if ratio * best <= 1e-12 * scale { degenerate + 1 } else { 0 };
            let pivot = u[row];
            for j in 0..m {
                self.binv[row * m + j] /= pivot;
            }
            self.xb[row] = ratio;
            for i in 0..m {
                if i != row && u[i] != 0.0 {
                    let f = u[i];
                    for j in 0..m {
                        self.binv[i * m + j] -= f * self.binv[row * m + j];
                    }
                    self.xb[i] -= f * ratio;
                    if self.xb[i] < 0.0 {
                        self.xb[i] = 0.0;
                    }
                }
            }
            in_basis[self.basis[row]] = false;
            in_basis[var] = true;
            retried = false;
            self.basis[row] = var;
            self.pivots_since_refactor += 1;
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
        }
        Err(ArmabError::SolverDiverged { solver: "lp-master", iterations: max_pivots, residual: f64::NAN })
    }
}

//! Newton systems of the projection dual.
//!
//! Per arm the flow multipliers form a chain over epochs, so the Hessian in
//! `beta` is block tridiagonal with `S x S` blocks, and budget multiplier
//! `lambda_h` touches epochs `h` and `h+1` of every arm. Systems are solved by
//! block elimination along each chain and a dense Schur complement in the free
//! budget multipliers.

use alloc::vec;
use alloc::vec::Vec;

/// Dense LU factorization with partial pivoting of an `n x n` row-major matrix.
#[derive(Debug, Clone)]
pub(crate) struct Lu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    /// `None` if a pivot vanishes.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Option<Self> {
        let mut piv: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| a[x * n + c].abs().total_cmp(&a[y * n + c].abs()))?;
            if !(a[p * n + c].abs() > 0.0) {
                return None;
            }
            if p != c {
                for k in 0..n {
                    a.swap(p * n + k, c * n + k);
                }
                piv.swap(p, c);
            }
            let d = a[c * n + c];
            for r in c + 1..n {
                let f = a[r * n + c] / d;
                a[r * n + c] = f;
                if f != 0.0 {
                    for k in c + 1..n {
                        a[r * n + k] -= f * a[c * n + k];
                    }
                }
            }
        }
        Some(Self { n, a, piv })
    }

    pub fn solve(&self, b: &mut [f64], work: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            work[i] = b[self.piv[i]];
        }
        for i in 0..n {
            let mut v = work[i];
            for k in 0..i {
                v -= self.a[i * n + k] * work[k];
            }
            work[i] = v;
        }
        for i in (0..n).rev() {
            let mut v = work[i];
            for k in i + 1..n {
                v -= self.a[i * n + k] * work[k];
            }
            work[i] = v / self.a[i * n + i];
        }
        b[..n].copy_from_slice(&work[..n]);
    }
}

/// Hessian of the dual in `(beta, lambda)`.
#[derive(Debug, Clone)]
pub(crate) struct DualHessian {
    arms: usize,
    horizon: usize,
    states: usize,
    /// `[n][h][S][S]`
    diag: Vec<f64>,
    /// Coupling of epoch `h` (rows) with epoch `h+1` (columns), `[n][h][S][S]`.
    upper: Vec<f64>,
    /// `beta(n,h,.)` with `lambda_h`, `[n][h][S]`.
    lam_here: Vec<f64>,
    /// `beta(n,h+1,.)` with `lambda_h`, `[n][h][S]`.
    lam_next: Vec<f64>,
    lam_diag: Vec<f64>,
    scratch: Vec<f64>,
}

impl DualHessian {
    pub fn new(arms: usize, horizon: usize, states: usize) -> Self {
        let blocks = arms * horizon * states * states;
        Self {
            arms,
            horizon,
            states,
            diag: vec![0.0; blocks],
            upper: vec![0.0; blocks],
            lam_here: vec![0.0; arms * horizon * states],
            lam_next: vec![0.0; arms * horizon * states],
            lam_diag: vec![0.0; horizon],
            scratch: vec![0.0; states],
        }
    }

    pub fn clear(&mut self) {
        for v in [&mut self.diag, &mut self.upper, &mut self.lam_here, &mut self.lam_next, &mut self.lam_diag] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Adds the term `m = exp(phi(ln z~ + beta(.,h+1)) - beta(s,h) - lambda_h a)`
    /// of one block, where `q` is its conditional next-state distribution and
    /// `free` marks the entries of `q` strictly inside their bounds.
    pub fn add_block(&mut self, n: usize, h: usize, s: usize, active: bool, m: f64, q: &[f64], free: &[bool]) {
        let (hz, st) = (self.horizon, self.states);
        let ss = st * st;
        let here = (n * hz + h) * ss;
        self.diag[here + s * st + s] += m;
        let last = h + 1 == hz;
        if !last {
            let next = (n * hz + h + 1) * ss;
            let r: f64 = q.iter().zip(free).filter(|(_, &f)| f).map(|(v, _)| v).sum();
            let scale = if r > 0.0 { 1.0 / r } else { 0.0 };
            let qf = &mut self.scratch[..st];
            for ((f, &v), &is_free) in qf.iter_mut().zip(q).zip(free) {
                *f = if is_free { v } else { 0.0 };
            }
            for i in 0..st {
                let (a, b) = (m * q[i], m * qf[i] * scale);
                let row = &mut self.diag[next + i * st..next + (i + 1) * st];
                for ((d, &qj), &fj) in row.iter_mut().zip(q).zip(qf.iter()) {
                    *d += a * qj - b * fj;
                }
                row[i] += m * qf[i];
                self.upper[here + s * st + i] -= m * q[i];
            }
        }
        if active {
            self.lam_diag[h] += m;
            self.lam_here[(n * hz + h) * st + s] += m;
            if !last {
                for (j, &qj) in q.iter().enumerate() {
                    self.lam_next[(n * hz + h) * st + j] -= m * qj;
                }
            }
        }
    }

    /// `C^T v` for the column of `lambda_h` restricted to arm `n`, where `v`
    /// is that arm's `[h][s]` slice.
    fn lam_dot(&self, n: usize, h: usize, v: &[f64]) -> f64 {
        let st = self.states;
        let off = (n * self.horizon + h) * st;
        let mut acc: f64 = (0..st).map(|s| self.lam_here[off + s] * v[h * st + s]).sum();
        if h + 1 < self.horizon {
            acc += (0..st).map(|s| self.lam_next[off + s] * v[(h + 1) * st + s]).sum::<f64>();
        }
        acc
    }

    /// Newton direction `-(H + ridge I)^-1 grad` with `lambda_h` held fixed
    /// wherever `free_lambda[h]` is false. Returns false if a factorization
    /// breaks down.
    pub fn direction(&self, grad: &[f64], free_lambda: &[bool], ridge: f64, dir: &mut [f64]) -> bool {
        let (arms, hz, st) = (self.arms, self.horizon, self.states);
        let ss = st * st;
        let width = hz * st;
        let lam0 = arms * width;
        let free: Vec<usize> = (0..hz).filter(|&h| free_lambda[h]).collect();
        let k = free.len();
        let mut schur = vec![0.0; k * k];
        let mut rhs: Vec<f64> = free.iter().map(|&h| -grad[lam0 + h]).collect();
        // Per arm: A^-1 g_beta followed by A^-1 C for every free lambda.
        let mut solved = vec![0.0; arms * (k + 1) * width];
        let mut chain = Chain::new(hz, st);
        let mut col = vec![0.0; width];
        for n in 0..arms {
            let d = &self.diag[n * hz * ss..(n + 1) * hz * ss];
            let u = &self.upper[n * hz * ss..(n + 1) * hz * ss];
            if !chain.factor(d, u, ridge) {
                return false;
            }
            let base = n * (k + 1) * width;
            let y = &mut solved[base..base + width];
            y.copy_from_slice(&grad[n * width..(n + 1) * width]);
            chain.solve(u, y, 0);
            for (i, &h) in free.iter().enumerate() {
                rhs[i] += self.lam_dot(n, h, &solved[base..base + width]);
            }
            for (j, &h) in free.iter().enumerate() {
                col.iter_mut().for_each(|v| *v = 0.0);
                let off = (n * hz + h) * st;
                col[h * st..(h + 1) * st].copy_from_slice(&self.lam_here[off..off + st]);
                if h + 1 < hz {
                    col[(h + 1) * st..(h + 2) * st].copy_from_slice(&self.lam_next[off..off + st]);
                }
                let x = &mut solved[base + (j + 1) * width..base + (j + 2) * width];
                x.copy_from_slice(&col);
                chain.solve(u, x, h);
                for (i, &hi) in free.iter().enumerate() {
                    schur[i * k + j] -= self.lam_dot(n, hi, &solved[base + (j + 1) * width..base + (j + 2) * width]);
                }
            }
        }
        for (i, &h) in free.iter().enumerate() {
            schur[i * k + i] += self.lam_diag[h] + ridge;
        }
        let mut dlam = rhs;
        if k > 0 {
            let Some(lu) = Lu::factor(k, schur) else {
                return false;
            };
            let mut work = vec![0.0; k];
            lu.solve(&mut dlam, &mut work);
        }
        dir[lam0..].iter_mut().for_each(|v| *v = 0.0);
        for (i, &h) in free.iter().enumerate() {
            dir[lam0 + h] = dlam[i];
        }
        for n in 0..arms {
            let base = n * (k + 1) * width;
            for idx in 0..width {
                let mut v = -solved[base + idx];
                for (j, dl) in dlam.iter().enumerate() {
                    v -= solved[base + (j + 1) * width + idx] * dl;
                }
                dir[n * width + idx] = v;
            }
        }
        dir.iter().all(|v| v.is_finite())
    }
}

/// Block LU of one arm's symmetric block-tridiagonal matrix, keeping the
/// inverse pivot blocks `S_h^-1` and `G_h = S_h^-1 U_h`.
struct Chain {
    horizon: usize,
    states: usize,
    inv: Vec<f64>,
    gain: Vec<f64>,
    work: Vec<f64>,
    tmp: Vec<f64>,
}

impl Chain {
    fn new(horizon: usize, states: usize) -> Self {
        let ss = states * states;
        Self {
            horizon,
            states,
            inv: vec![0.0; horizon * ss],
            gain: vec![0.0; horizon * ss],
            work: vec![0.0; states],
            tmp: vec![0.0; states],
        }
    }

    /// `S_h = D_h + ridge I - U_{h-1}^T G_{h-1}`.
    fn factor(&mut self, diag: &[f64], upper: &[f64], ridge: f64) -> bool {
        let st = self.states;
        let ss = st * st;
        for h in 0..self.horizon {
            let mut s_h = diag[h * ss..(h + 1) * ss].to_vec();
            for i in 0..st {
                s_h[i * st + i] += ridge;
            }
            if h > 0 {
                let u_prev = &upper[(h - 1) * ss..h * ss];
                let g_prev = &self.gain[(h - 1) * ss..h * ss];
                for r in 0..st {
                    for i in 0..st {
                        let u = u_prev[r * st + i];
                        if u != 0.0 {
                            let row = &mut s_h[i * st..(i + 1) * st];
                            for (v, g) in row.iter_mut().zip(&g_prev[r * st..(r + 1) * st]) {
                                *v -= u * g;
                            }
                        }
                    }
                }
            }
            let Some(lu) = Lu::factor(st, s_h) else {
                return false;
            };
            let inv = &mut self.inv[h * ss..(h + 1) * ss];
            for j in 0..st {
                self.tmp.iter_mut().for_each(|v| *v = 0.0);
                self.tmp[j] = 1.0;
                lu.solve(&mut self.tmp, &mut self.work);
                for i in 0..st {
                    inv[i * st + j] = self.tmp[i];
                }
            }
            if h + 1 < self.horizon {
                let u_h = &upper[h * ss..(h + 1) * ss];
                let gain = &mut self.gain[h * ss..(h + 1) * ss];
                gain.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..st {
                    for r in 0..st {
                        let a = inv[i * st + r];
                        for (g, u) in gain[i * st..(i + 1) * st].iter_mut().zip(&u_h[r * st..(r + 1) * st]) {
                            *g += a * u;
                        }
                    }
                }
            }
        }
        inv_finite(&self.inv)
    }

    /// Overwrites the `[h][s]` vector `x` with `A^-1 x`, given that `x` is zero
    /// on epochs before `first`.
    fn solve(&mut self, upper: &[f64], x: &mut [f64], first: usize) {
        let st = self.states;
        let ss = st * st;
        for h in first..self.horizon {
            if h > first {
                let u_prev = &upper[(h - 1) * ss..h * ss];
                let (prev, cur) = x[(h - 1) * st..(h + 1) * st].split_at_mut(st);
                for (r, &p) in prev.iter().enumerate() {
                    for (c, u) in cur.iter_mut().zip(&u_prev[r * st..(r + 1) * st]) {
                        *c -= u * p;
                    }
                }
            }
            let inv = &self.inv[h * ss..(h + 1) * ss];
            let cur = &x[h * st..(h + 1) * st];
            for (i, w) in self.work.iter_mut().enumerate() {
                *w = inv[i * st..(i + 1) * st].iter().zip(cur).map(|(a, b)| a * b).sum();
            }
            x[h * st..(h + 1) * st].copy_from_slice(&self.work);
        }
        // Back-substitute x_h = z_h - G_h x_{h+1}.
        for h in (0..self.horizon.saturating_sub(1)).rev() {
            let gain = &self.gain[h * ss..(h + 1) * ss];
            let (cur, next) = x[h * st..(h + 2) * st].split_at_mut(st);
            for (i, c) in cur.iter_mut().enumerate() {
                *c -= gain[i * st..(i + 1) * st].iter().zip(next.iter()).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
}

fn inv_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(h: &DualHessian, ridge: f64) -> (usize, Vec<f64>) {
        let (arms, hz, st) = (h.arms, h.horizon, h.states);
        let width = hz * st;
        let dim = arms * width + hz;
        let mut a = vec![0.0; dim * dim];
        for n in 0..arms {
            for t in 0..hz {
                for i in 0..st {
                    for j in 0..st {
                        let r = n * width + t * st + i;
                        a[r * dim + n * width + t * st + j] += h.diag[((n * hz + t) * st + i) * st + j];
                        if t + 1 < hz {
                            let c = n * width + (t + 1) * st + j;
                            let v = h.upper[((n * hz + t) * st + i) * st + j];
                            a[r * dim + c] += v;
                            a[c * dim + r] += v;
                        }
                    }
                    let r = n * width + t * st + i;
                    let l = arms * width + t;
                    let v = h.lam_here[(n * hz + t) * st + i];
                    a[r * dim + l] += v;
                    a[l * dim + r] += v;
                    if t + 1 < hz {
                        let r = n * width + (t + 1) * st + i;
                        let v = h.lam_next[(n * hz + t) * st + i];
                        a[r * dim + l] += v;
                        a[l * dim + r] += v;
                    }
                }
            }
        }
        for t in 0..hz {
            let l = arms * width + t;
            a[l * dim + l] += h.lam_diag[t];
        }
        for i in 0..dim {
            a[i * dim + i] += ridge;
        }
        (dim, a)
    }

    #[test]
    fn direction_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (arms, hz, st) = (2, 4, 3);
        let mut h = DualHessian::new(arms, hz, st);
        for n in 0..arms {
            for t in 0..hz {
                for s in 0..st {
                    for a in [false, true] {
                        let mut q: Vec<f64> = (0..st).map(|_| rng.random::<f64>() + 0.05).collect();
                        let z: f64 = q.iter().sum();
                        q.iter_mut().for_each(|v| *v /= z);
                        let free: Vec<bool> = (0..st).map(|_| rng.random::<f64>() < 0.7).collect();
                        h.add_block(n, t, s, a, rng.random::<f64>() + 0.1, &q, &free);
                    }
                }
            }
        }
        let ridge = 1e-9;
        let (dim, a) = dense(&h, ridge);
        let grad: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let free_lambda = [true, false, true, true];
        let mut dir = vec![0.0; dim];
        assert!(h.direction(&grad, &free_lambda, ridge, &mut dir));

        // dense reference with fixed lambdas removed
        let keep: Vec<usize> = (0..dim).filter(|&i| i < arms * hz * st || free_lambda[i - arms * hz * st]).collect();
        let m = keep.len();
        let sub: Vec<f64> =
            keep.iter().flat_map(|&i| keep.iter().map(move |&j| (i, j))).map(|(i, j)| a[i * dim + j]).collect();
        let lu = Lu::factor(m, sub).unwrap();
        let mut b: Vec<f64> = keep.iter().map(|&i| -grad[i]).collect();
        lu.solve(&mut b, &mut vec![0.0; m]);
        for (k, &i) in keep.iter().enumerate() {
            assert!((dir[i] - b[k]).abs() < 1e-8 * (1.0 + b[k].abs()), "{i}: {} vs {}", dir[i], b[k]);
        }
        assert_eq!(dir[arms * hz * st + 1], 0.0);
    }
}

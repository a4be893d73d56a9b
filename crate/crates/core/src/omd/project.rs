//! KL projection onto the budget- and confidence-constrained occupancy set.
//!
//! The ratio constraints are eliminated block by block: for fixed flow
//! multipliers `beta` and budget multipliers `lambda`, the best conditional
//! next-state distribution of a block is the KL projection of the tilted
//! distribution onto a box-constrained simplex, which has a closed form up to
//! a scalar found by a breakpoint sweep. The remaining smooth convex dual in
//! `(beta, lambda >= 0)` is minimized by projected Newton, after which the
//! primal is rebuilt by rolling the implied policy and kernels forward so that
//! the flow, boundary and budget constraints hold to machine precision.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ArmabError, Result};
use crate::math;
use crate::model::NUM_ACTIONS;

use super::feasible::{feasibility_residuals, FeasibleSetParams, ResidualReport};
use super::newton::DualHessian;
use super::occupancy::{kl_divergence, OccupancyZ};

const ARMIJO: f64 = 1e-4;
/// Relative summation noise of the dual objective; within it a step is judged by the gradient.
const ROUNDOFF: f64 = 1e-10;
const MAX_BACKTRACKS: usize = 60;
const NEWTON_RIDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop when the projected dual gradient has sup-norm at most this.
    pub tol: f64,
    pub max_iters: usize,
    /// Start from the previous episode's multipliers when available.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 20_000, warm_start: true }
    }
}

/// Lagrange multipliers of the projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVars {
    pub num_arms: usize,
    pub horizon: usize,
    pub num_states: usize,
    /// Flow and boundary multipliers, `[n][h][s]`.
    pub beta: Vec<f64>,
    /// Budget multipliers, `[h]`, all nonnegative.
    pub lambda: Vec<f64>,
    /// Multipliers of `z <= u * mu`, `[n][h][s][a][s']`, in log scale.
    pub mu_plus: Vec<f64>,
    /// Multipliers of `z >= l * mu`, same layout.
    pub mu_minus: Vec<f64>,
}

impl DualVars {
    pub fn zeros(num_arms: usize, horizon: usize, num_states: usize) -> Self {
        let blocks = num_arms * horizon * num_states * NUM_ACTIONS;
        Self {
            num_arms,
            horizon,
            num_states,
            beta: vec![0.0; num_arms * horizon * num_states],
            lambda: vec![0.0; horizon],
            mu_plus: vec![0.0; blocks * num_states],
            mu_minus: vec![0.0; blocks * num_states],
        }
    }

    fn fits(&self, arms: usize, horizon: usize, states: usize) -> bool {
        self.num_arms == arms
            && self.horizon == horizon
            && self.num_states == states
            && self.beta.len() == arms * horizon * states
            && self.lambda.len() == horizon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub z: OccupancyZ,
    pub duals: DualVars,
    pub iterations: usize,
    pub converged: bool,
    /// Residuals of the returned occupancy.
    pub residuals: ResidualReport,
    /// Final sup-norm of the projected dual gradient.
    pub dual_residual: f64,
    /// `KL(z || z~)`.
    pub divergence: f64,
}

/// `min KL(q || p)` over `{l <= q <= u, sum q = 1}`.
///
/// `p` must be a probability vector. Writes the minimizer into `q` and returns
/// the minimum together with the scale `t` in `q_i = clamp(t p_i, l_i, u_i)`,
/// or `None` when the set is empty on the support of `p`.
pub fn box_simplex_kl(
    p: &[f64],
    lower: &[f64],
    upper: &[f64],
    q: &mut [f64],
    events: &mut Vec<(f64, usize, bool)>,
) -> Option<(f64, f64)> {
    if p.iter().zip(lower).zip(upper).all(|((p, l), u)| l <= p && p <= u) {
        q.copy_from_slice(p);
        return Some((0.0, 1.0));
    }
    events.clear();
    let mut base = 0.0;
    for (i, ((&pi, &li), &ui)) in p.iter().zip(lower).zip(upper).enumerate() {
        if pi > 0.0 {
            base += li;
            events.push((li / pi, i, false));
            events.push((ui / pi, i, true));
        } else if li > 0.0 {
            return None;
        }
    }
    if base > 1.0 + 1e-12 {
        return None;
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let mut slope = 0.0;
    let mut t_prev = 0.0;
    let mut scale = None;
    for &(tk, i, is_upper) in events.iter() {
        if slope > 0.0 {
            let target = (1.0 - base) / slope;
            if target <= tk {
                scale = Some(target.max(t_prev));
                break;
            }
        } else if base >= 1.0 {
            scale = Some(t_prev);
            break;
        }
        if is_upper {
            slope -= p[i];
            base += upper[i];
        } else {
            base -= lower[i];
            slope += p[i];
        }
        t_prev = tk;
    }
    let t = match scale {
        Some(t) => t,
        None if base >= 1.0 - 1e-9 => t_prev,
        None => return None,
    };
    let mut sum = 0.0;
    for (i, qi) in q.iter_mut().enumerate() {
        *qi = if p[i] > 0.0 { (p[i] * t).clamp(lower[i], upper[i]) } else { 0.0 };
        sum += *qi;
    }
    let mut kl = 0.0;
    for (qi, &pi) in q.iter_mut().zip(p) {
        *qi /= sum;
        if *qi > 0.0 {
            kl += *qi * math::ln(*qi / pi);
        }
    }
    Some((kl.max(0.0), t))
}

/// Primal quantities of one dual evaluation.
struct Primal {
    /// Block masses `mu(s,a;h)`, `[n][h][s][a]`.
    mass: Vec<f64>,
    /// Conditional next-state distributions, `[n][h][s][a][s']`; NaN where undefined.
    cond: Vec<f64>,
    /// Multipliers of the ratio constraints, `[n][h][s][a][s']`.
    mu_plus: Vec<f64>,
    mu_minus: Vec<f64>,
}

struct Dual<'a> {
    params: &'a FeasibleSetParams,
    arms: usize,
    horizon: usize,
    states: usize,
    /// `ln z~`, `-inf` on zeros, laid out like `OccupancyZ::data`.
    log_zt: Vec<f64>,
    /// Blocks that may carry mass.
    live: Vec<bool>,
    /// Box bounds per pair, `[n][s][a][s']`.
    lower: Vec<f64>,
    upper: Vec<f64>,
    scratch_w: Vec<f64>,
    scratch_p: Vec<f64>,
    scratch_q: Vec<f64>,
    scratch_free: Vec<bool>,
    events: Vec<(f64, usize, bool)>,
}

impl<'a> Dual<'a> {
    fn new(z_tilde: &OccupancyZ, params: &'a FeasibleSetParams) -> Self {
        let (arms, horizon, states) = (z_tilde.num_arms, z_tilde.horizon, z_tilde.num_states);
        let log_zt = z_tilde.data.iter().map(|&v| if v > 0.0 { math::ln(v) } else { f64::NEG_INFINITY }).collect();
        let mut live = vec![false; arms * horizon * states * NUM_ACTIONS];
        for n in 0..arms {
            for h in 0..horizon {
                for s in 0..states {
                    if h == 0 && s != params.initial_states[n] {
                        continue;
                    }
                    for a in 0..NUM_ACTIONS {
                        let b = ((n * horizon + h) * states + s) * NUM_ACTIONS + a;
                        live[b] = z_tilde.block(n, h, s, a).iter().any(|&v| v > 0.0);
                    }
                }
            }
        }
        let pairs = arms * states * NUM_ACTIONS;
        let mut lower = vec![0.0; pairs * states];
        let mut upper = vec![0.0; pairs * states];
        for n in 0..arms {
            for s in 0..states {
                for a in 0..NUM_ACTIONS {
                    let off = params.pair(n, s, a) * states;
                    params.bounds(n, s, a, &mut lower[off..off + states], &mut upper[off..off + states]);
                }
            }
        }
        Self {
            params,
            arms,
            horizon,
            states,
            log_zt,
            live,
            lower,
            upper,
            scratch_w: vec![0.0; states],
            scratch_p: vec![0.0; states],
            scratch_q: vec![0.0; states],
            scratch_free: vec![false; states],
            events: Vec::with_capacity(2 * states),
        }
    }

    fn dim(&self) -> usize {
        self.arms * self.horizon * self.states + self.horizon
    }

    fn lambda_start(&self) -> usize {
        self.arms * self.horizon * self.states
    }

    #[inline]
    fn beta_index(&self, n: usize, h: usize, s: usize) -> usize {
        (n * self.horizon + h) * self.states + s
    }

    /// Dual objective and gradient at `x = (beta, lambda)`.
    fn eval(
        &mut self,
        x: &[f64],
        grad: &mut [f64],
        mut primal: Option<&mut Primal>,
        mut hess: Option<&mut DualHessian>,
    ) -> f64 {
        let (arms, horizon, states) = (self.arms, self.horizon, self.states);
        let lam0 = self.lambda_start();
        grad.iter_mut().for_each(|g| *g = 0.0);
        if let Some(hs) = hess.as_deref_mut() {
            hs.clear();
        }
        let mut f = 0.0;
        for n in 0..arms {
            let s0 = self.params.initial_states[n];
            let i0 = self.beta_index(n, 0, s0);
            f += x[i0];
            grad[i0] += 1.0;
            for h in 0..horizon {
                for s in 0..states {
                    let beta_sh = x[self.beta_index(n, h, s)];
                    for a in 0..NUM_ACTIONS {
                        let b = ((n * horizon + h) * states + s) * NUM_ACTIONS + a;
                        if let Some(pr) = primal.as_deref_mut() {
                            pr.mass[b] = 0.0;
                            pr.cond[b * states..(b + 1) * states].iter_mut().for_each(|v| *v = f64::NAN);
                        }
                        if !self.live[b] {
                            continue;
                        }
                        let log_block = &self.log_zt[b * states..(b + 1) * states];
                        let mut mx = f64::NEG_INFINITY;
                        for sp in 0..states {
                            let next_beta = if h + 1 < horizon { x[self.beta_index(n, h + 1, sp)] } else { 0.0 };
                            let w = log_block[sp] + next_beta;
                            self.scratch_w[sp] = w;
                            mx = mx.max(w);
                        }
                        if !mx.is_finite() {
                            continue;
                        }
                        let mut sum = 0.0;
                        for sp in 0..states {
                            let e = math::exp(self.scratch_w[sp] - mx);
                            self.scratch_p[sp] = e;
                            sum += e;
                        }
                        let lse = mx + math::ln(sum);
                        self.scratch_p.iter_mut().for_each(|p| *p /= sum);
                        let pair = (n * states + s) * NUM_ACTIONS + a;
                        let bounds = pair * states..(pair + 1) * states;
                        let Some((kstar, t)) = box_simplex_kl(
                            &self.scratch_p,
                            &self.lower[bounds.clone()],
                            &self.upper[bounds],
                            &mut self.scratch_q,
                            &mut self.events,
                        ) else {
                            continue;
                        };
                        let lam = if a == 1 { x[lam0 + h] } else { 0.0 };
                        let m = math::exp(lse - kstar - beta_sh - lam);
                        f += m;
                        grad[self.beta_index(n, h, s)] -= m;
                        if h + 1 < horizon {
                            for sp in 0..states {
                                grad[self.beta_index(n, h + 1, sp)] += m * self.scratch_q[sp];
                            }
                        }
                        if a == 1 {
                            grad[lam0 + h] -= m;
                        }
                        if let Some(hs) = hess.as_deref_mut() {
                            for sp in 0..states {
                                let tp = t * self.scratch_p[sp];
                                let (l, u) = (self.lower[pair * states + sp], self.upper[pair * states + sp]);
                                self.scratch_free[sp] = self.scratch_p[sp] > 0.0 && tp > l && tp < u;
                            }
                            hs.add_block(n, h, s, a == 1, m, &self.scratch_q, &self.scratch_free);
                        }
                        if let Some(pr) = primal.as_deref_mut() {
                            pr.mass[b] = m;
                            pr.cond[b * states..(b + 1) * states].copy_from_slice(&self.scratch_q);
                            for sp in 0..states {
                                let tp = t * self.scratch_p[sp];
                                let (l, u) = (self.lower[pair * states + sp], self.upper[pair * states + sp]);
                                let i = b * states + sp;
                                pr.mu_plus[i] = if tp > u { math::ln(tp / u) } else { 0.0 };
                                pr.mu_minus[i] = if tp > 0.0 && tp < l { math::ln(l / tp) } else { 0.0 };
                            }
                        }
                    }
                }
            }
        }
        let budget = self.params.budget as f64;
        for h in 0..horizon {
            f += budget * x[lam0 + h];
            grad[lam0 + h] += budget;
        }
        f
    }

    fn projected_gradient_norm(&self, x: &[f64], grad: &[f64]) -> f64 {
        let lam0 = self.lambda_start();
        grad.iter()
            .enumerate()
            .map(|(i, &g)| if i >= lam0 && x[i] <= 0.0 { (-g).max(0.0) } else { g.abs() })
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Outcome {
    iterations: usize,
    converged: bool,
    dual_residual: f64,
}

/// Projected Newton on `lambda >= 0` with an Armijo line search; budget
/// multipliers at zero with a positive gradient are held fixed.
fn minimize(dual: &mut Dual<'_>, x: &mut [f64], config: &SolverConfig) -> Outcome {
    let dim = dual.dim();
    let lam0 = dual.lambda_start();
    let (arms, horizon, states) = (dual.arms, dual.horizon, dual.states);
    let mut hess = DualHessian::new(arms, horizon, states);
    let mut hess_new = hess.clone();
    let mut grad = vec![0.0; dim];
    let mut f = dual.eval(x, &mut grad, None, Some(&mut hess));
    let mut dir = vec![0.0; dim];
    let mut x_new = vec![0.0; dim];
    let mut grad_new = vec![0.0; dim];
    let mut free_lambda = vec![true; horizon];
    let mut pg = dual.projected_gradient_norm(x, &grad);
    let mut iterations = 0;
    while iterations < config.max_iters && pg > config.tol {
        iterations += 1;
        for (h, free) in free_lambda.iter_mut().enumerate() {
            *free = !(x[lam0 + h] <= 0.0 && grad[lam0 + h] > 0.0);
        }
        let mut newton = hess.direction(&grad, &free_lambda, NEWTON_RIDGE, &mut dir) && dot(&dir, &grad) < 0.0;
        let mut accepted = None;
        let mut hess_fresh = false;
        for attempt in 0..2 {
            if !newton {
                for (i, d) in dir.iter_mut().enumerate() {
                    let fixed = i >= lam0 && !free_lambda[i - lam0];
                    *d = if fixed { 0.0 } else { -grad[i] };
                }
            }
            let mut step = 1.0;
            for trial in 0..MAX_BACKTRACKS {
                for i in 0..dim {
                    let v = x[i] + step * dir[i];
                    x_new[i] = if i >= lam0 { v.max(0.0) } else { v };
                }
                // Only the full step is likely to be accepted, so only it assembles the Hessian.
                let hess_slot = (trial == 0).then_some(&mut hess_new);
                hess_fresh = trial == 0;
                let f_try = dual.eval(&x_new, &mut grad_new, None, hess_slot);
                if f_try.is_finite() {
                    let decrease: f64 =
                        grad.iter().zip(x_new.iter().zip(x.iter())).map(|(g, (a, b))| g * (a - b)).sum();
                    if f_try <= f + ARMIJO * decrease {
                        accepted = Some(f_try);
                        break;
                    }
                    let roundoff = ROUNDOFF * f.abs().max(1.0);
                    if f_try <= f + roundoff && dual.projected_gradient_norm(&x_new, &grad_new) < pg {
                        accepted = Some(f_try);
                        break;
                    }
                }
                step *= 0.5;
            }
            if accepted.is_some() || attempt == 1 || !newton {
                break;
            }
            newton = false;
        }
        let Some(f_new) = accepted else {
            break;
        };
        if !hess_fresh {
            dual.eval(&x_new, &mut grad_new, None, Some(&mut hess_new));
        }
        x.copy_from_slice(&x_new);
        grad.copy_from_slice(&grad_new);
        core::mem::swap(&mut hess, &mut hess_new);
        f = f_new;
        pg = dual.projected_gradient_norm(x, &grad);
    }
    Outcome { iterations, converged: pg <= config.tol, dual_residual: pg }
}

fn raw_occupancy(primal: &Primal, arms: usize, horizon: usize, states: usize) -> OccupancyZ {
    let mut z = OccupancyZ::zeros(arms, horizon, states);
    for (b, &m) in primal.mass.iter().enumerate() {
        if m > 0.0 {
            for sp in 0..states {
                z.data[b * states + sp] = m * primal.cond[b * states + sp];
            }
        }
    }
    z
}

/// Rolls the policy and kernels implied by `primal` forward from the initial
/// states, scaling activation down where the budget would be exceeded.
fn repair(primal: &Primal, params: &FeasibleSetParams) -> OccupancyZ {
    let (arms, horizon, states) = (params.num_arms, params.horizon, params.num_states);
    let budget = params.budget as f64;
    let mut z = OccupancyZ::zeros(arms, horizon, states);
    let mut dist = vec![0.0; arms * states];
    for n in 0..arms {
        dist[n * states + params.initial_states[n]] = 1.0;
    }
    let mut active_prob = vec![0.0; arms * states];
    let mut next = vec![0.0; arms * states];
    for h in 0..horizon {
        let mut activation = 0.0;
        for n in 0..arms {
            for s in 0..states {
                let b = ((n * horizon + h) * states + s) * NUM_ACTIONS;
                let (m0, m1) = (primal.mass[b], primal.mass[b + 1]);
                let pi1 = if m0 + m1 > 0.0 { m1 / (m0 + m1) } else { 0.0 };
                active_prob[n * states + s] = pi1;
                activation += dist[n * states + s] * pi1;
            }
        }
        let shrink = if activation > budget { budget / activation } else { 1.0 };
        next.iter_mut().for_each(|v| *v = 0.0);
        for n in 0..arms {
            for s in 0..states {
                let d = dist[n * states + s];
                if d == 0.0 {
                    continue;
                }
                let pi1 = active_prob[n * states + s] * shrink;
                for (a, pa) in [(0, 1.0 - pi1), (1, pi1)] {
                    let mass = d * pa;
                    if mass == 0.0 {
                        continue;
                    }
                    let b = ((n * horizon + h) * states + s) * NUM_ACTIONS + a;
                    let cond = &primal.cond[b * states..(b + 1) * states];
                    let off = z.block_offset(n, h, s, a);
                    for sp in 0..states {
                        let q = if cond[0].is_nan() { params.p_hat_row(n, s, a)[sp] } else { cond[sp] };
                        let v = mass * q;
                        z.data[off + sp] = v;
                        next[n * states + sp] += v;
                    }
                }
            }
        }
        core::mem::swap(&mut dist, &mut next);
    }
    z
}

/// KL projection of `z_tilde` onto the feasible set described by `params`.
///
/// Fails with `SolverDiverged` only when the dual iteration stops short of
/// `config.tol` and the unrepaired primal still violates flow, boundary or
/// budget constraints by more than `1e-6`.
pub fn project_kl(
    z_tilde: &OccupancyZ,
    params: &FeasibleSetParams,
    config: &SolverConfig,
    warm: Option<&DualVars>,
) -> Result<ProjectionResult> {
    params.check(z_tilde)?;
    if let Some(bad) = z_tilde.data.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(ArmabError::InvalidParameter(format!("occupancy entry {bad} is not a nonnegative number")));
    }
    if !(config.tol > 0.0) {
        return Err(ArmabError::InvalidParameter(format!("tolerance {} must be positive", config.tol)));
    }
    let (arms, horizon, states) = (z_tilde.num_arms, z_tilde.horizon, z_tilde.num_states);
    for (n, &s0) in params.initial_states.iter().enumerate() {
        if s0 >= states {
            return Err(ArmabError::DimensionMismatch(format!("initial state {s0} of arm {n} out of range")));
        }
        if (0..NUM_ACTIONS).all(|a| z_tilde.block(n, 0, s0, a).iter().all(|&v| v == 0.0)) {
            return Err(ArmabError::InfeasibleSet { arm: n, state: s0, action: 0 });
        }
    }
    let mut dual = Dual::new(z_tilde, params);
    let mut x = vec![0.0; dual.dim()];
    if let Some(w) = warm.filter(|w| config.warm_start && w.fits(arms, horizon, states)) {
        let lam0 = dual.lambda_start();
        x[..lam0].copy_from_slice(&w.beta);
        for (xi, l) in x[lam0..].iter_mut().zip(&w.lambda) {
            *xi = l.max(0.0);
        }
    }
    let outcome = minimize(&mut dual, &mut x, config);

    let blocks = arms * horizon * states * NUM_ACTIONS;
    let mut primal = Primal {
        mass: vec![0.0; blocks],
        cond: vec![0.0; blocks * states],
        mu_plus: vec![0.0; blocks * states],
        mu_minus: vec![0.0; blocks * states],
    };
    let mut grad = vec![0.0; dual.dim()];
    dual.eval(&x, &mut grad, Some(&mut primal), None);

    if !outcome.converged {
        let raw = feasibility_residuals(&raw_occupancy(&primal, arms, horizon, states), params);
        let worst = raw.flow.max(raw.boundary).max(raw.budget);
        if worst > 1e-6 || !worst.is_finite() {
            return Err(ArmabError::SolverDiverged {
                solver: "kl-projection",
                iterations: outcome.iterations,
                residual: worst,
            });
        }
    }

    let z = repair(&primal, params);
    let residuals = feasibility_residuals(&z, params);
    let lam0 = dual.lambda_start();
    let duals = DualVars {
        num_arms: arms,
        horizon,
        num_states: states,
        beta: x[..lam0].to_vec(),
        lambda: x[lam0..].to_vec(),
        mu_plus: primal.mu_plus,
        mu_minus: primal.mu_minus,
    };
    Ok(ProjectionResult {
        divergence: kl_divergence(&z, z_tilde),
        z,
        duals,
        iterations: outcome.iterations,
        converged: outcome.converged,
        residuals,
        dual_residual: outcome.dual_residual,
    })
}

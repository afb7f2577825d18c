//! The primal step: mix the previous occupancy with the uniform one, tilt it
//! by `exp(-eta * phi)`, and take the KL projection onto the optimistic
//! occupancy domain.
//!
//! The projection is solved through its dual. For multipliers `beta` on flow
//! conservation and `mu+`, `mu-` on the two sides of the confidence condition,
//!
//! ```text
//! B(x,a,x') = beta(x') - beta(x) + eta phi(x,a)
//!           + (1 - eps) mu+(x,a,x') - (1 + eps) mu-(x,a,x')
//!           + sum_y pbar(y|x,a) (mu-(x,a,y) - mu+(x,a,y))
//! Z_l       = sum_{layer l} qmix(x,a,x') exp(-B(x,a,x'))
//! ```
//!
//! and the dual minimizes `sum_l ln Z_l`; the primal is recovered as the
//! per-layer softmax `qmix exp(-B) / Z_l`.
//!
//! The formula above eliminates the per-triple slack of the L1 condition by
//! requiring `mu+(x,a,x') + mu-(x,a,x')` to be the same for every `x'` of a
//! pair. The solver keeps that tie: it works with `c(x,a) = mu+ + mu-` and
//! `w(x,a,x') = mu+ - mu-` on the cone `|w| <= c`, where the formula is the
//! exact Lagrange dual of the projection. [`dual_objective`] itself accepts
//! arbitrary non-negative `mu+`, `mu-`.

use serde::{Deserialize, Serialize};

use crate::confidence::OccupancyDomain;
use crate::error::{Error, Result};
use crate::occupancy::{occupancy_from_policy, policy_of, transition_of, Occupancy, DENOMINATOR_FLOOR};
use crate::space::{Kernel, LayeredSpace, RewardTable, StateActionTable};

/// `(1 - theta) q(x,a) + theta / (|X_l| |A|)`, spread over `x'` with `q`'s own
/// conditionals (uniform where `q(x,a)` vanishes). `theta = 0` returns `q`.
pub fn mixing_step(q: &Occupancy, theta: f64) -> Result<Occupancy> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("mixing weight {theta} outside [0, 1]")));
    }
    if theta == 0.0 {
        return Ok(q.clone());
    }
    let s = q.space();
    let mut out = s.zero_triples();
    for l in 0..s.horizon() {
        let next = s.layer_size(l + 1);
        let floor = theta / s.pair_len(l) as f64;
        for (src, dst) in q.layers()[l].chunks(next).zip(out[l].chunks_mut(next)) {
            let total: f64 = src.iter().sum();
            let mixed = (1.0 - theta) * total + floor;
            if total < DENOMINATOR_FLOOR {
                dst.fill(mixed / next as f64);
            } else {
                for (d, v) in dst.iter_mut().zip(src) {
                    *d = mixed * (v / total);
                }
            }
        }
    }
    Ok(Occupancy::from_raw(s.clone(), out))
}

/// `qmix(x,a,x') exp(-eta phi(x,a))`, unnormalized.
pub fn exp_step(mixed: &Occupancy, phi: &StateActionTable, eta: f64) -> Result<Occupancy> {
    check_phi(mixed.space(), phi, eta)?;
    let s = mixed.space();
    let mut out = mixed.layers().to_vec();
    for l in 0..s.horizon() {
        let next = s.layer_size(l + 1);
        for (i, row) in out[l].chunks_mut(next).enumerate() {
            let f = (-eta * phi.layers()[l][i]).exp();
            for v in row.iter_mut() {
                *v *= f;
            }
        }
    }
    Ok(Occupancy::from_raw(s.clone(), out))
}

fn check_phi(space: &LayeredSpace, phi: &StateActionTable, eta: f64) -> Result<()> {
    if phi.space() != space {
        return Err(Error::ShapeMismatch("loss table does not match the occupancy".into()));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {eta} must be positive")));
    }
    if phi.layers().iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("loss table has non-finite entries".into()));
    }
    Ok(())
}

/// Min-player loss `V (qhat2 . r) + lambda g`.
pub fn min_player_loss(q2: &Occupancy, r: &RewardTable, g: &StateActionTable, lambda: f64, v: f64) -> StateActionTable {
    r.contract_max(&q2.pair_marginals())
        .map(|x| v * x)
        .add_scaled(lambda, g)
}

/// Max-player loss `-V (qhat1 . r) + lambda h`; the max-player also minimizes.
pub fn max_player_loss(q1: &Occupancy, r: &RewardTable, h: &StateActionTable, lambda: f64, v: f64) -> StateActionTable {
    r.contract_min(&q1.pair_marginals())
        .map(|x| -v * x)
        .add_scaled(lambda, h)
}

/// Multipliers of the projection dual. `beta` has one row per layer including
/// the end layers, whose entries stay zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDuals {
    pub beta: Vec<Vec<f64>>,
    pub mu_plus: Vec<Vec<f64>>,
    pub mu_minus: Vec<Vec<f64>>,
}

impl ProjectionDuals {
    pub fn zeros(space: &LayeredSpace) -> Self {
        ProjectionDuals {
            beta: space.layer_sizes().iter().map(|&n| vec![0.0; n]).collect(),
            mu_plus: space.zero_triples(),
            mu_minus: space.zero_triples(),
        }
    }

    fn to_tied(&self, space: &LayeredSpace) -> Tied {
        let mut c = space.zero_pairs();
        let mut w = space.zero_triples();
        for l in 0..space.horizon() {
            let next = space.layer_size(l + 1);
            for i in 0..space.pair_len(l) {
                let mut ci: f64 = 0.0;
                for j in 0..next {
                    let k = i * next + j;
                    let (p, m) = (self.mu_plus[l][k].max(0.0), self.mu_minus[l][k].max(0.0));
                    w[l][k] = p - m;
                    ci = ci.max(p + m);
                }
                c[l][i] = ci;
            }
        }
        let mut beta = self.beta.clone();
        beta[0][0] = 0.0;
        beta[space.horizon()][0] = 0.0;
        Tied { beta, c, w }
    }
}

/// Gradient of [`dual_objective`], laid out like [`ProjectionDuals`].
#[derive(Clone, Debug, PartialEq)]
pub struct DualGradient {
    pub beta: Vec<Vec<f64>>,
    pub mu_plus: Vec<Vec<f64>>,
    pub mu_minus: Vec<Vec<f64>>,
}

/// One player's projection: the log of the mixed occupancy, the tilt
/// `eta * phi`, and the domain.
#[derive(Clone, Debug)]
pub struct ProjectionProblem<'a> {
    space: LayeredSpace,
    log_mixed: Vec<Vec<f64>>,
    tilt: Vec<Vec<f64>>,
    domain: &'a OccupancyDomain,
}

impl<'a> ProjectionProblem<'a> {
    pub fn new(mixed: &Occupancy, phi: &StateActionTable, eta: f64, domain: &'a OccupancyDomain) -> Result<Self> {
        check_phi(mixed.space(), phi, eta)?;
        if &domain.space != mixed.space() {
            return Err(Error::ShapeMismatch("domain does not match the occupancy".into()));
        }
        if mixed.layers().iter().flatten().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter("mixed occupancy has negative entries".into()));
        }
        Ok(ProjectionProblem {
            space: mixed.space().clone(),
            log_mixed: mixed
                .layers()
                .iter()
                .map(|r| r.iter().map(|v| v.ln()).collect())
                .collect(),
            tilt: phi
                .layers()
                .iter()
                .map(|r| r.iter().map(|v| eta * v).collect())
                .collect(),
            domain,
        })
    }

    pub fn space(&self) -> &LayeredSpace {
        &self.space
    }

    pub fn domain(&self) -> &OccupancyDomain {
        self.domain
    }

    /// The tilted target `qmix exp(-eta phi)`.
    pub fn target(&self) -> Occupancy {
        let s = &self.space;
        let mut out = s.zero_triples();
        for l in 0..s.horizon() {
            let next = s.layer_size(l + 1);
            for (k, v) in out[l].iter_mut().enumerate() {
                *v = (self.log_mixed[l][k] - self.tilt[l][k / next]).exp();
            }
        }
        Occupancy::from_raw(s.clone(), out)
    }

    /// Unnormalized KL divergence `sum q ln(q / target) - q + target`.
    pub fn primal_objective(&self, q: &Occupancy) -> f64 {
        let s = &self.space;
        let mut total = 0.0;
        for l in 0..s.horizon() {
            let next = s.layer_size(l + 1);
            for (k, &v) in q.layers()[l].iter().enumerate() {
                let log_t = self.log_mixed[l][k] - self.tilt[l][k / next];
                let t = log_t.exp();
                if v > 0.0 {
                    total += v * (v.ln() - log_t) - v + t;
                } else if v == 0.0 {
                    total += t;
                } else {
                    return f64::INFINITY;
                }
            }
        }
        total
    }

    /// Value of the Lagrange dual function when `sum_l ln Z_l` equals
    /// `log_partition`: `sum_l (sum target_l - 1 - ln Z_l)`.
    pub fn dual_function(&self, log_partition: f64) -> f64 {
        let mass: f64 = self.target().layers().iter().flatten().sum();
        mass - self.space.horizon() as f64 - log_partition
    }

    fn exponents(&self, beta: &[Vec<f64>], b_extra: impl Fn(usize, usize, usize) -> f64) -> Vec<Vec<f64>> {
        let s = &self.space;
        let na = s.actions();
        let mut out = s.zero_triples();
        for l in 0..s.horizon() {
            let next = s.layer_size(l + 1);
            for i in 0..s.pair_len(l) {
                let x = i / na;
                for j in 0..next {
                    let k = i * next + j;
                    let b = beta[l + 1][j] - beta[l][x] + self.tilt[l][i] + b_extra(l, i, j);
                    out[l][k] = self.log_mixed[l][k] - b;
                }
            }
        }
        out
    }
}

/// Per-layer softmax of the exponents; returns `sum_l ln Z_l`.
fn softmax_layers(exponents: &[Vec<f64>], rho: &mut [Vec<f64>]) -> f64 {
    let mut value = 0.0;
    for (e, r) in exponents.iter().zip(rho.iter_mut()) {
        let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (ri, &ei) in r.iter_mut().zip(e) {
            *ri = (ei - m).exp();
            z += *ri;
        }
        for ri in r.iter_mut() {
            *ri /= z;
        }
        value += m + z.ln();
    }
    value
}

/// `sum_l ln Z_l` and its gradient at arbitrary multipliers (`mu` must be
/// non-negative).
pub fn dual_objective(duals: &ProjectionDuals, problem: &ProjectionProblem) -> Result<(f64, DualGradient)> {
    let s = &problem.space;
    let dom = problem.domain;
    let exps = problem.exponents(&duals.beta, |l, i, j| {
        let next = s.layer_size(l + 1);
        let eps = dom.eps[l][i];
        let row = &dom.p_bar[l][i * next..(i + 1) * next];
        let mp = &duals.mu_plus[l][i * next..(i + 1) * next];
        let mm = &duals.mu_minus[l][i * next..(i + 1) * next];
        let pull: f64 = row.iter().zip(mp.iter().zip(mm)).map(|(p, (a, b))| p * (b - a)).sum();
        (1.0 - eps) * mp[j] - (1.0 + eps) * mm[j] + pull
    });
    let mut rho = s.zero_triples();
    let value = softmax_layers(&exps, &mut rho);
    if !value.is_finite() {
        return Err(Error::DivergedDuals);
    }
    let (out, inflow, pair) = flows(s, &rho);
    let mut g_beta: Vec<Vec<f64>> = s.layer_sizes().iter().map(|&n| vec![0.0; n]).collect();
    for l in 1..s.horizon() {
        for x in 0..s.layer_size(l) {
            g_beta[l][x] = out[l][x] - inflow[l][x];
        }
    }
    let mut g_plus = s.zero_triples();
    let mut g_minus = s.zero_triples();
    for l in 0..s.horizon() {
        let next = s.layer_size(l + 1);
        for i in 0..s.pair_len(l) {
            let eps = dom.eps[l][i];
            for j in 0..next {
                let k = i * next + j;
                let pulled = dom.p_bar[l][k] * pair[l][i];
                g_plus[l][k] = pulled - (1.0 - eps) * rho[l][k];
                g_minus[l][k] = (1.0 + eps) * rho[l][k] - pulled;
            }
        }
    }
    Ok((
        value,
        DualGradient {
            beta: g_beta,
            mu_plus: g_plus,
            mu_minus: g_minus,
        },
    ))
}

type Table = Vec<Vec<f64>>;

/// Outflow and inflow per state (rows for layers `0..=L`) and pair marginals.
fn flows(s: &LayeredSpace, rho: &[Vec<f64>]) -> (Table, Table, Table) {
    let mut out: Vec<Vec<f64>> = s.layer_sizes().iter().map(|&n| vec![0.0; n]).collect();
    let mut inflow = out.clone();
    let mut pair = s.zero_pairs();
    let na = s.actions();
    for l in 0..s.horizon() {
        let next = s.layer_size(l + 1);
        for (i, row) in rho[l].chunks(next).enumerate() {
            let m: f64 = row.iter().sum();
            pair[l][i] = m;
            out[l][i / na] += m;
            for (j, &v) in row.iter().enumerate() {
                inflow[l + 1][j] += v;
            }
        }
    }
    (out, inflow, pair)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub initial_step: f64,
    /// Scale each multiplier block by the inverse mass it controls.
    pub precondition: bool,
    /// Keep the objective value after every accepted step.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 5000,
            grad_tol: 1e-8,
            armijo: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            precondition: true,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    /// Infinity norm of the projected gradient at the returned multipliers.
    pub residual: f64,
    /// `sum_l ln Z_l` at the returned multipliers.
    pub dual_value: f64,
    /// Objective after each accepted step (only with `record_trace`).
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub q: Occupancy,
    pub duals: ProjectionDuals,
    pub diagnostics: SolverDiagnostics,
}

/// Multipliers with `mu+ + mu-` tied per pair: `c = mu+ + mu-`, `w = mu+ - mu-`.
#[derive(Clone, Debug)]
struct Tied {
    beta: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
}

impl Tied {
    fn into_duals(self) -> ProjectionDuals {
        let mut mu_plus = self.w.clone();
        let mut mu_minus = self.w.clone();
        for l in 0..self.w.len() {
            let next = self.w[l].len() / self.c[l].len();
            for (k, &w) in self.w[l].iter().enumerate() {
                let c = self.c[l][k / next];
                mu_plus[l][k] = 0.5 * (c + w);
                mu_minus[l][k] = 0.5 * (c - w);
            }
        }
        ProjectionDuals {
            beta: self.beta,
            mu_plus,
            mu_minus,
        }
    }
}

struct Eval {
    value: f64,
    rho: Vec<Vec<f64>>,
}

struct Grad {
    beta: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    /// Diagonal scaling for `beta` and per-pair scaling for `(c, w)`.
    scale_beta: Vec<Vec<f64>>,
    scale_pair: Vec<Vec<f64>>,
}

const MASS_FLOOR: f64 = 1e-200;

impl ProjectionProblem<'_> {
    fn evaluate(&self, z: &Tied) -> Eval {
        let s = &self.space;
        let dom = self.domain;
        let exps = self.exponents(&z.beta, |l, i, j| {
            let next = s.layer_size(l + 1);
            let row = &dom.p_bar[l][i * next..(i + 1) * next];
            let w = &z.w[l][i * next..(i + 1) * next];
            let pull: f64 = row.iter().zip(w).map(|(p, w)| p * w).sum();
            w[j] - dom.eps[l][i] * z.c[l][i] - pull
        });
        let mut rho = s.zero_triples();
        let value = softmax_layers(&exps, &mut rho);
        Eval { value, rho }
    }

    fn gradient(&self, rho: &[Vec<f64>], precondition: bool) -> Grad {
        let s = &self.space;
        let dom = self.domain;
        let (out, inflow, pair) = flows(s, rho);
        let mut beta: Vec<Vec<f64>> = s.layer_sizes().iter().map(|&n| vec![0.0; n]).collect();
        let mut scale_beta = beta.clone();
        for l in 1..s.horizon() {
            for x in 0..s.layer_size(l) {
                beta[l][x] = out[l][x] - inflow[l][x];
                scale_beta[l][x] = if precondition {
                    1.0 / (out[l][x] + inflow[l][x]).max(MASS_FLOOR)
                } else {
                    1.0
                };
            }
        }
        let mut c = s.zero_pairs();
        let mut w = s.zero_triples();
        let mut scale_pair = s.zero_pairs();
        for l in 0..s.horizon() {
            let next = s.layer_size(l + 1);
            for i in 0..s.pair_len(l) {
                c[l][i] = dom.eps[l][i] * pair[l][i];
                scale_pair[l][i] = if precondition {
                    1.0 / pair[l][i].max(MASS_FLOOR)
                } else {
                    1.0
                };
                for j in 0..next {
                    let k = i * next + j;
                    w[l][k] = dom.p_bar[l][k] * pair[l][i] - rho[l][k];
                }
            }
        }
        Grad {
            beta,
            c,
            w,
            scale_beta,
            scale_pair,
        }
    }

    /// `Proj(z - step * D g)`; with `step = 1` and no scaling this gives the
    /// projected-gradient residual.
    fn step(&self, z: &Tied, g: &Grad, step: f64, scaled: bool) -> Tied {
        let s = &self.space;
        let mut beta = z.beta.clone();
        for l in 1..s.horizon() {
            for x in 0..s.layer_size(l) {
                let d = if scaled { g.scale_beta[l][x] } else { 1.0 };
                beta[l][x] -= step * d * g.beta[l][x];
            }
        }
        let mut c = z.c.clone();
        let mut w = z.w.clone();
        let mut buf = Vec::new();
        for l in 0..s.horizon() {
            let next = s.layer_size(l + 1);
            for i in 0..s.pair_len(l) {
                let d = step * if scaled { g.scale_pair[l][i] } else { 1.0 };
                let c0 = z.c[l][i] - d * g.c[l][i];
                let block = &mut w[l][i * next..(i + 1) * next];
                for (j, wj) in block.iter_mut().enumerate() {
                    *wj -= d * g.w[l][i * next + j];
                }
                c[l][i] = project_cone(c0, block, &mut buf);
            }
        }
        Tied { beta, c, w }
    }

    fn residual(&self, z: &Tied, g: &Grad) -> f64 {
        let probe = self.step(z, g, 1.0, false);
        let mut r: f64 = 0.0;
        for (a, b) in probe.beta.iter().flatten().zip(z.beta.iter().flatten()) {
            r = r.max((a - b).abs());
        }
        for (a, b) in probe.c.iter().flatten().zip(z.c.iter().flatten()) {
            r = r.max((a - b).abs());
        }
        for (a, b) in probe.w.iter().flatten().zip(z.w.iter().flatten()) {
            r = r.max((a - b).abs());
        }
        r
    }

    fn inner(g: &Grad, from: &Tied, to: &Tied) -> f64 {
        let mut acc = 0.0;
        for (gl, (a, b)) in g.beta.iter().zip(from.beta.iter().zip(&to.beta)) {
            for (gv, (x, y)) in gl.iter().zip(a.iter().zip(b)) {
                acc += gv * (y - x);
            }
        }
        for (gl, (a, b)) in g.c.iter().zip(from.c.iter().zip(&to.c)) {
            for (gv, (x, y)) in gl.iter().zip(a.iter().zip(b)) {
                acc += gv * (y - x);
            }
        }
        for (gl, (a, b)) in g.w.iter().zip(from.w.iter().zip(&to.w)) {
            for (gv, (x, y)) in gl.iter().zip(a.iter().zip(b)) {
                acc += gv * (y - x);
            }
        }
        acc
    }
}

/// Euclidean projection of `(c0, w)` onto `{|w_i| <= c}`; `w` is updated in
/// place and the new `c` returned.
fn project_cone(c0: f64, w: &mut [f64], buf: &mut Vec<f64>) -> f64 {
    if w.iter().all(|v| v.abs() <= c0) {
        return c0;
    }
    buf.clear();
    buf.extend(w.iter().map(|v| v.abs()));
    buf.sort_unstable_by(|a, b| b.total_cmp(a));
    let n = buf.len();
    let mut sum = 0.0;
    let mut c = (c0 + buf.iter().sum::<f64>()) / (n + 1) as f64;
    for k in 1..=n {
        sum += buf[k - 1];
        let ck = (c0 + sum) / (k + 1) as f64;
        if (k == n || buf[k] <= ck) && buf[k - 1] >= ck {
            c = ck;
            break;
        }
    }
    let c = c.max(0.0);
    for v in w.iter_mut() {
        *v = v.signum() * v.abs().min(c);
    }
    c
}

/// KL projection of the problem's target onto its domain.
///
/// Runs projected gradient descent with Armijo backtracking on the tied dual,
/// then rebuilds the primal from the softmax weights: their policy, and their
/// conditionals pulled into the confidence balls, are rolled forward so the
/// output is an exact member of the domain.
pub fn kl_project(
    problem: &ProjectionProblem,
    warm_start: Option<&ProjectionDuals>,
    options: &SolverOptions,
) -> Result<Projection> {
    let s = &problem.space;
    let mut z = match warm_start {
        Some(d) => d.to_tied(s),
        None => ProjectionDuals::zeros(s).to_tied(s),
    };
    let mut eval = problem.evaluate(&z);
    if !eval.value.is_finite() {
        if warm_start.is_some() {
            z = ProjectionDuals::zeros(s).to_tied(s);
            eval = problem.evaluate(&z);
        }
        if !eval.value.is_finite() {
            return Err(Error::DivergedDuals);
        }
    }
    let mut trace = Vec::new();
    if options.record_trace {
        trace.push(eval.value);
    }
    let mut grad = problem.gradient(&eval.rho, options.precondition);
    let mut residual = problem.residual(&z, &grad);
    let mut iterations = 0;
    while residual > options.grad_tol && iterations < options.max_iters {
        iterations += 1;
        let mut step = options.initial_step;
        let mut accepted = None;
        for _ in 0..80 {
            let cand = problem.step(&z, &grad, step, true);
            let decrease = ProjectionProblem::inner(&grad, &z, &cand);
            let cand_eval = problem.evaluate(&cand);
            if cand_eval.value.is_finite() && cand_eval.value <= eval.value + options.armijo * decrease {
                accepted = Some((cand, cand_eval));
                break;
            }
            step *= options.shrink;
        }
        let Some((cand, cand_eval)) = accepted else {
            break;
        };
        z = cand;
        eval = cand_eval;
        if options.record_trace {
            trace.push(eval.value);
        }
        grad = problem.gradient(&eval.rho, options.precondition);
        residual = problem.residual(&z, &grad);
    }
    if residual > 100.0 * options.grad_tol {
        return Err(Error::NonConverged { iterations, residual });
    }
    let rho = Occupancy::from_raw(s.clone(), eval.rho);
    let q = polish(&rho, problem.domain);
    Ok(Projection {
        q,
        duals: z.into_duals(),
        diagnostics: SolverDiagnostics {
            iterations,
            residual,
            dual_value: eval.value,
            trace,
        },
    })
}

/// Forward recursion with the policy of `rho` and its conditionals pulled
/// radially toward `p_bar` until they sit inside the confidence balls.
fn polish(rho: &Occupancy, domain: &OccupancyDomain) -> Occupancy {
    let s = rho.space();
    let policy = policy_of(rho);
    let kernel = transition_of(rho);
    let mut p = kernel.layers().to_vec();
    for l in 0..s.horizon() {
        let next = s.layer_size(l + 1);
        for (i, row) in p[l].chunks_mut(next).enumerate() {
            let center = &domain.p_bar[l][i * next..(i + 1) * next];
            let center_mass: f64 = center.iter().sum();
            if center_mass < 0.5 {
                // Unvisited pair: the ball around a zero row holds every distribution.
                continue;
            }
            let dist: f64 = row.iter().zip(center).map(|(a, b)| (a - b).abs()).sum();
            let eps = domain.eps[l][i];
            if dist > eps {
                let t = eps / dist;
                for (v, c) in row.iter_mut().zip(center) {
                    *v = c + t * (*v - c);
                }
            }
        }
    }
    let kernel = Kernel::from_raw(s.clone(), p);
    occupancy_from_policy(&policy, &kernel).expect("spaces agree")
}

/// Options and step sizes of one primal update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub v: f64,
    pub eta: f64,
    pub theta: f64,
}

/// Result of one player's primal step.
#[derive(Clone, Debug, PartialEq)]
pub struct PlayerUpdate {
    pub q: Occupancy,
    pub duals: ProjectionDuals,
    pub diagnostics: SolverDiagnostics,
}

/// Mix, tilt by `phi` and project one player's previous iterate.
pub fn player_update(
    previous: &Occupancy,
    phi: &StateActionTable,
    steps: StepSizes,
    domain: &OccupancyDomain,
    warm_start: Option<&ProjectionDuals>,
    options: &SolverOptions,
) -> Result<PlayerUpdate> {
    let mixed = mixing_step(previous, steps.theta)?;
    let problem = ProjectionProblem::new(&mixed, phi, steps.eta, domain)?;
    let proj = kl_project(&problem, warm_start, options)?;
    Ok(PlayerUpdate {
        q: proj.q,
        duals: proj.duals,
        diagnostics: proj.diagnostics,
    })
}

/// Inputs to the joint primal step.
pub struct PrimalInputs<'a> {
    pub q1: &'a Occupancy,
    pub q2: &'a Occupancy,
    pub r: &'a RewardTable,
    pub g: &'a StateActionTable,
    pub h: &'a StateActionTable,
    /// Multipliers applied to the min- and max-player utilities (equal in the
    /// coupled mode).
    pub lambda: (f64, f64),
    pub steps: StepSizes,
    pub domain1: &'a OccupancyDomain,
    pub domain2: &'a OccupancyDomain,
    pub warm1: Option<&'a ProjectionDuals>,
    pub warm2: Option<&'a ProjectionDuals>,
    pub options: &'a SolverOptions,
}

/// Both players' updates; each uses the opponent's previous iterate.
pub fn primal_update(inp: &PrimalInputs) -> Result<(PlayerUpdate, PlayerUpdate)> {
    let phi1 = min_player_loss(inp.q2, inp.r, inp.g, inp.lambda.0, inp.steps.v);
    let phi2 = max_player_loss(inp.q1, inp.r, inp.h, inp.lambda.1, inp.steps.v);
    let u1 = player_update(inp.q1, &phi1, inp.steps, inp.domain1, inp.warm1, inp.options)?;
    let u2 = player_update(inp.q2, &phi2, inp.steps, inp.domain2, inp.warm2, inp.options)?;
    Ok((u1, u2))
}

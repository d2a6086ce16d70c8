//! Regularised logistic regression, written from scratch.
//!
//! Objective: weighted mean of `log(1 + exp(-y (w·x + b)))` plus a penalty on
//! `w` (never on the bias): `λ/2 ||w||²` for L2, `λ ||w||₁` for L1.
//!
//! Solvers, all monotone in the objective:
//! * L2, Newton: damped Newton steps with Armijo backtracking.
//! * L2, gradient descent: steepest descent with Armijo backtracking.
//! * L1, proximal Newton: coordinate descent on the penalised quadratic
//!   model, then a backtracking line search on the composite objective.
//! * L1, gradient descent: proximal gradient (soft-threshold) with the
//!   standard sufficient-decrease backtracking.
//!
//! Termination is on the optimality residual: the gradient norm for L2, the
//! minimum-norm subgradient for L1.

use serde::{Deserialize, Serialize};

use super::features::Dataset;
use crate::sampling::{NEG, POS};
use crate::{Error, Result};

/// Scores within this distance of zero count as ties and are classified
/// negative.
pub const TIE_TOL: f64 = 1e-12;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub kind: Penalty,
    pub strength: f64,
}

impl Regularization {
    pub fn l1(strength: f64) -> Self {
        Self { kind: Penalty::L1, strength }
    }

    pub fn l2(strength: f64) -> Self {
        Self { kind: Penalty::L2, strength }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strength.is_finite() && self.strength >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("regularization strength {} is not a finite non-negative number", self.strength)))
        }
    }
}

impl Default for Regularization {
    /// Weak ridge penalty, for conditioning only.
    fn default() -> Self {
        Self::l2(1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Newton for L2, proximal Newton for L1.
    #[default]
    Auto,
    /// Gradient descent for L2, proximal gradient for L1.
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub solver: Solver,
    /// Keep the objective value of every iterate in the diagnostics.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 5000, solver: Solver::Auto, record_trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub final_objective: f64,
    /// Optimality residual at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub reg: Regularization,
    pub diagnostics: Diagnostics,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// `sign(w·x + b)`, with ties going to -1.
    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.score(x) > TIE_TOL {
            POS
        } else {
            NEG
        }
    }

    /// Weighted fraction of misclassified rows.
    pub fn zero_one_risk(&self, data: &Dataset) -> f64 {
        let total = data.total_weight();
        if total == 0.0 {
            return 0.0;
        }
        let wrong: f64 = (0..data.len())
            .filter(|&i| (self.predict(data.row(i)) == POS) != (data.label(i) > 0.0))
            .map(|i| data.weight(i))
            .sum();
        wrong / total
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// log(1 + exp(-m)) without overflow.
fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// 1 / (1 + exp(m)).
fn sigmoid_neg(m: f64) -> f64 {
    if m > 0.0 {
        let e = (-m).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + m.exp())
    }
}

/// Parameters are `[w_0, .., w_{p-1}, b]`.
fn margins(data: &Dataset, theta: &[f64]) -> Vec<f64> {
    let p = data.dim();
    (0..data.len()).map(|i| data.label(i) * (dot(&theta[..p], data.row(i)) + theta[p])).collect()
}

/// Smooth part of the objective (mean logistic loss) and its gradient.
fn smooth(data: &Dataset, theta: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
    let p = data.dim();
    let total = data.total_weight();
    let mut loss = 0.0;
    let mut grad = if want_grad { vec![0.0; p + 1] } else { Vec::new() };
    for (i, m) in margins(data, theta).into_iter().enumerate() {
        let w = data.weight(i);
        loss += w * softplus_neg(m);
        if want_grad {
            let c = -w * data.label(i) * sigmoid_neg(m);
            for (g, &x) in grad[..p].iter_mut().zip(data.row(i)) {
                *g += c * x;
            }
            grad[p] += c;
        }
    }
    loss /= total;
    grad.iter_mut().for_each(|g| *g /= total);
    (loss, grad)
}

/// Hessian of the smooth part, dense `(p+1) x (p+1)` row-major.
fn smooth_hessian(data: &Dataset, theta: &[f64]) -> Vec<f64> {
    let n = data.dim() + 1;
    let total = data.total_weight();
    let mut h = vec![0.0; n * n];
    let mut xt = vec![1.0; n];
    for (i, m) in margins(data, theta).into_iter().enumerate() {
        let s = sigmoid_neg(m);
        let c = data.weight(i) * s * (1.0 - s) / total;
        if c == 0.0 {
            continue;
        }
        xt[..n - 1].copy_from_slice(data.row(i));
        for a in 0..n {
            if xt[a] == 0.0 {
                continue;
            }
            let ca = c * xt[a];
            for b in a..n {
                h[a * n + b] += ca * xt[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            h[a * n + b] = h[b * n + a];
        }
    }
    h
}

fn penalty(reg: Regularization, w: &[f64]) -> f64 {
    match reg.kind {
        Penalty::L2 => 0.5 * reg.strength * w.iter().map(|x| x * x).sum::<f64>(),
        Penalty::L1 => reg.strength * w.iter().map(|x| x.abs()).sum::<f64>(),
    }
}

/// Full objective (mean logistic loss plus penalty) at `[w, b]`.
pub fn logistic_objective(data: &Dataset, theta: &[f64], reg: Regularization) -> f64 {
    smooth(data, theta, false).0 + penalty(reg, &theta[..data.dim()])
}

/// Objective and gradient at `[w, b]` of the differentiable part: the mean
/// logistic loss, plus the ridge term when `reg` is L2 (the L1 term is left
/// out).
pub fn logistic_objective_and_gradient(data: &Dataset, theta: &[f64], reg: Regularization) -> (f64, Vec<f64>) {
    let (mut f, mut g) = smooth(data, theta, true);
    if reg.kind == Penalty::L2 {
        let p = data.dim();
        f += penalty(reg, &theta[..p]);
        for j in 0..p {
            g[j] += reg.strength * theta[j];
        }
    }
    (f, g)
}

/// Cholesky solve of `a x = b` for a symmetric positive definite `a`.
fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s = b[i] - (0..i).map(|k| l[i * n + k] * y[k]).sum::<f64>();
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s = y[i] - (i + 1..n).map(|k| l[k * n + i] * x[k]).sum::<f64>();
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

fn l1_residual(grad: &[f64], w: &[f64], lambda: f64) -> f64 {
    let p = w.len();
    let mut r2 = grad[p] * grad[p];
    for j in 0..p {
        let r = if w[j] != 0.0 {
            grad[j] + lambda * w[j].signum()
        } else {
            (grad[j].abs() - lambda).max(0.0)
        };
        r2 += r * r;
    }
    r2.sqrt()
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Fits a logistic model. With only one label present the constant
/// classifier for that label is returned (zero weights, bias ±1).
pub fn train_logistic(data: &Dataset, reg: Regularization, opts: &SolverOptions) -> Result<LinearModel> {
    reg.validate()?;
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.max_iter == 0 {
        return Err(Error::InvalidArgument("solver needs tol > 0 and max_iter >= 1".into()));
    }
    if data.is_empty() || data.total_weight() <= 0.0 {
        return Err(Error::Empty("training data"));
    }
    let p = data.dim();
    let (pos, neg) = data.label_weights();
    if pos == 0.0 || neg == 0.0 {
        let bias = if pos > 0.0 { 1.0 } else { -1.0 };
        let mut theta = vec![0.0; p + 1];
        theta[p] = bias;
        return Ok(LinearModel {
            weights: vec![0.0; p],
            bias,
            reg,
            diagnostics: Diagnostics {
                final_objective: logistic_objective(data, &theta, reg),
                residual: 0.0,
                iterations: 0,
                converged: true,
                trace: Vec::new(),
            },
        });
    }
    let theta0 = vec![0.0; p + 1];
    let (theta, diagnostics) = match (reg.kind, opts.solver) {
        (Penalty::L2, Solver::Auto) => newton_l2(data, theta0, reg, opts),
        (Penalty::L2, Solver::GradientDescent) => gradient_descent_l2(data, theta0, reg, opts),
        (Penalty::L1, Solver::Auto) => prox_newton_l1(data, theta0, reg, opts),
        (Penalty::L1, Solver::GradientDescent) => ista_l1(data, theta0, reg, opts),
    };
    Ok(LinearModel { weights: theta[..p].to_vec(), bias: theta[p], reg, diagnostics })
}

/// Warm-started variant used by the L1 path.
pub(crate) fn train_logistic_from(
    data: &Dataset,
    reg: Regularization,
    opts: &SolverOptions,
    start: &LinearModel,
) -> Result<LinearModel> {
    reg.validate()?;
    let p = data.dim();
    let mut theta0 = start.weights.clone();
    theta0.push(start.bias);
    if theta0.len() != p + 1 {
        return train_logistic(data, reg, opts);
    }
    let (theta, diagnostics) = match (reg.kind, opts.solver) {
        (Penalty::L2, Solver::Auto) => newton_l2(data, theta0, reg, opts),
        (Penalty::L2, Solver::GradientDescent) => gradient_descent_l2(data, theta0, reg, opts),
        (Penalty::L1, Solver::Auto) => prox_newton_l1(data, theta0, reg, opts),
        (Penalty::L1, Solver::GradientDescent) => ista_l1(data, theta0, reg, opts),
    };
    Ok(LinearModel { weights: theta[..p].to_vec(), bias: theta[p], reg, diagnostics })
}

struct Tracker {
    record: bool,
    trace: Vec<f64>,
}

impl Tracker {
    fn new(opts: &SolverOptions) -> Self {
        Self { record: opts.record_trace, trace: Vec::new() }
    }

    fn push(&mut self, f: f64) {
        if self.record {
            self.trace.push(f);
        }
    }

    fn finish(self, f: f64, residual: f64, iterations: usize, converged: bool) -> Diagnostics {
        Diagnostics { final_objective: f, residual, iterations, converged, trace: self.trace }
    }
}

fn axpy(theta: &[f64], alpha: f64, dir: &[f64]) -> Vec<f64> {
    theta.iter().zip(dir).map(|(t, d)| t + alpha * d).collect()
}

fn newton_l2(data: &Dataset, mut theta: Vec<f64>, reg: Regularization, opts: &SolverOptions) -> (Vec<f64>, Diagnostics) {
    let p = data.dim();
    let n = p + 1;
    let mut tr = Tracker::new(opts);
    let (mut f, mut g) = logistic_objective_and_gradient(data, &theta, reg);
    tr.push(f);
    for it in 0..opts.max_iter {
        let res = norm(&g);
        if res <= opts.tol {
            return (theta, tr.finish(f, res, it, true));
        }
        let mut h = smooth_hessian(data, &theta);
        for j in 0..p {
            h[j * n + j] += reg.strength;
        }
        let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
        let mut dir = None;
        let mut jitter = 0.0;
        for _ in 0..8 {
            let mut hj = h.clone();
            for j in 0..n {
                hj[j * n + j] += jitter;
            }
            if let Some(d) = cholesky_solve(&hj, &neg_g) {
                dir = Some(d);
                break;
            }
            jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
        }
        let mut dir = dir.unwrap_or_else(|| neg_g.clone());
        let mut slope = dot(&g, &dir);
        if slope.is_nan() || slope >= 0.0 {
            dir = neg_g;
            slope = dot(&g, &dir);
        }
        match line_search(|t| logistic_objective(data, t, reg), &theta, &dir, f, slope) {
            Some((next, f_next)) => {
                theta = next;
                let (fv, gv) = logistic_objective_and_gradient(data, &theta, reg);
                debug_assert!((fv - f_next).abs() <= 1e-12 * fv.abs().max(1.0));
                f = fv;
                g = gv;
                tr.push(f);
            }
            None => {
                let res = norm(&g);
                return (theta, tr.finish(f, res, it, res <= opts.tol));
            }
        }
    }
    let res = norm(&g);
    (theta, tr.finish(f, res, opts.max_iter, res <= opts.tol))
}

/// Armijo backtracking from a unit step. Falls back to the best step that
/// strictly decreases the objective; `None` when there is none.
fn line_search(
    objective: impl Fn(&[f64]) -> f64,
    theta: &[f64],
    dir: &[f64],
    f: f64,
    slope: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut alpha = 1.0;
    let mut fallback: Option<(Vec<f64>, f64)> = None;
    for _ in 0..MAX_HALVINGS {
        let cand = axpy(theta, alpha, dir);
        let fc = objective(&cand);
        if fc <= f + ARMIJO * alpha * slope && fc < f {
            return Some((cand, fc));
        }
        if fc < f && fallback.as_ref().is_none_or(|(_, fb)| fc < *fb) {
            fallback = Some((cand, fc));
        }
        alpha *= 0.5;
    }
    fallback
}

fn gradient_descent_l2(data: &Dataset, mut theta: Vec<f64>, reg: Regularization, opts: &SolverOptions) -> (Vec<f64>, Diagnostics) {
    let mut tr = Tracker::new(opts);
    let (mut f, mut g) = logistic_objective_and_gradient(data, &theta, reg);
    tr.push(f);
    let mut step = 1.0;
    for it in 0..opts.max_iter {
        let res = norm(&g);
        if res <= opts.tol {
            return (theta, tr.finish(f, res, it, true));
        }
        let g2 = res * res;
        let mut alpha = step * 2.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = axpy(&theta, -alpha, &g);
            let fc = logistic_objective(data, &cand, reg);
            if fc <= f - ARMIJO * alpha * g2 && fc < f {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, _)) = accepted else {
            return (theta, tr.finish(f, res, it, false));
        };
        step = alpha;
        theta = next;
        let (fv, gv) = logistic_objective_and_gradient(data, &theta, reg);
        f = fv;
        g = gv;
        tr.push(f);
    }
    let res = norm(&g);
    (theta, tr.finish(f, res, opts.max_iter, res <= opts.tol))
}

fn composite(data: &Dataset, theta: &[f64], lambda: f64) -> f64 {
    logistic_objective(data, theta, Regularization::l1(lambda))
}

fn prox_newton_l1(data: &Dataset, mut theta: Vec<f64>, reg: Regularization, opts: &SolverOptions) -> (Vec<f64>, Diagnostics) {
    let p = data.dim();
    let n = p + 1;
    let lambda = reg.strength;
    let mut tr = Tracker::new(opts);
    let (mut fs, mut g) = smooth(data, &theta, true);
    let mut f = fs + penalty(reg, &theta[..p]);
    tr.push(f);
    for it in 0..opts.max_iter {
        let res = l1_residual(&g, &theta[..p], lambda);
        if res <= opts.tol {
            return (theta, tr.finish(f, res, it, true));
        }
        let mut h = smooth_hessian(data, &theta);
        for j in 0..n {
            h[j * n + j] += 1e-12;
        }
        // coordinate descent on  g·d + ½ dᵀHd + λ||w + d_w||₁
        let mut d = vec![0.0; n];
        let mut hd = vec![0.0; n];
        for _sweep in 0..100 {
            let mut max_change: f64 = 0.0;
            for j in 0..n {
                let a = h[j * n + j];
                let lin = g[j] + hd[j] - a * d[j];
                let new_dj = if j < p {
                    soft_threshold(theta[j] - lin / a, lambda / a) - theta[j]
                } else {
                    -lin / a
                };
                let delta = new_dj - d[j];
                if delta != 0.0 {
                    for (k, hk) in hd.iter_mut().enumerate() {
                        *hk += h[k * n + j] * delta;
                    }
                    d[j] = new_dj;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change <= 1e-14 {
                break;
            }
        }
        let l1_now: f64 = theta[..p].iter().map(|x| x.abs()).sum();
        let l1_full: f64 = (0..p).map(|j| (theta[j] + d[j]).abs()).sum();
        let decrease = dot(&g, &d) + lambda * (l1_full - l1_now);
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut fallback: Option<(Vec<f64>, f64)> = None;
        for _ in 0..MAX_HALVINGS {
            let cand = axpy(&theta, alpha, &d);
            let fc = composite(data, &cand, lambda);
            if decrease < 0.0 && fc <= f + ARMIJO * alpha * decrease && fc < f {
                accepted = Some((cand, fc));
                break;
            }
            if fc < f && fallback.as_ref().is_none_or(|(_, fb)| fc < *fb) {
                fallback = Some((cand, fc));
            }
            alpha *= 0.5;
        }
        let Some((next, _)) = accepted.or(fallback) else {
            return (theta, tr.finish(f, res, it, false));
        };
        theta = next;
        let sg = smooth(data, &theta, true);
        fs = sg.0;
        g = sg.1;
        f = fs + penalty(reg, &theta[..p]);
        tr.push(f);
    }
    let res = l1_residual(&g, &theta[..p], lambda);
    (theta, tr.finish(f, res, opts.max_iter, res <= opts.tol))
}

fn ista_l1(data: &Dataset, mut theta: Vec<f64>, reg: Regularization, opts: &SolverOptions) -> (Vec<f64>, Diagnostics) {
    let p = data.dim();
    let lambda = reg.strength;
    let mut tr = Tracker::new(opts);
    let (mut fs, mut g) = smooth(data, &theta, true);
    tr.push(fs + penalty(reg, &theta[..p]));
    let mut step = 1.0;
    for it in 0..opts.max_iter {
        let res = l1_residual(&g, &theta[..p], lambda);
        if res <= opts.tol {
            let f = fs + penalty(reg, &theta[..p]);
            return (theta, tr.finish(f, res, it, true));
        }
        let mut alpha = step * 2.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gr)| t - alpha * gr).collect();
            for c in cand[..p].iter_mut() {
                *c = soft_threshold(*c, alpha * lambda);
            }
            let diff: Vec<f64> = cand.iter().zip(&theta).map(|(c, t)| c - t).collect();
            let fc = smooth(data, &cand, false).0;
            if fc <= fs + dot(&g, &diff) + dot(&diff, &diff) / (2.0 * alpha) {
                accepted = Some(cand);
                break;
            }
            alpha *= 0.5;
        }
        let current = fs + penalty(reg, &theta[..p]);
        let next = match accepted {
            Some(c) if smooth(data, &c, false).0 + penalty(reg, &c[..p]) <= current => c,
            _ => return (theta.clone(), tr.finish(current, res, it, false)),
        };
        step = alpha;
        theta = next;
        let sg = smooth(data, &theta, true);
        fs = sg.0;
        g = sg.1;
        tr.push(fs + penalty(reg, &theta[..p]));
    }
    let res = l1_residual(&g, &theta[..p], lambda);
    (theta.clone(), tr.finish(fs + penalty(reg, &theta[..p]), res, opts.max_iter, res <= opts.tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    fn random_data(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = substream(seed, &[]);
        let truth: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut ds = Dataset::new(p);
        for _ in 0..n {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(0..2) as f64).collect();
            let prob = 1.0 / (1.0 + (-dot(&truth, &x)).exp());
            let y = if rng.random::<f64>() < prob { POS } else { NEG };
            ds.push(&x, y, 1.0);
        }
        ds
    }

    #[test]
    fn separable_pair_is_fit_exactly() {
        let ds = Dataset::from_rows(1, [(vec![1.0], POS), (vec![-1.0], NEG)]);
        let m = train_logistic(&ds, Regularization::l2(1e-4), &SolverOptions::default()).unwrap();
        assert_eq!(m.zero_one_risk(&ds), 0.0);
        assert!(m.diagnostics.converged, "{:?}", m.diagnostics);
    }

    #[test]
    fn newton_and_gradient_descent_agree() {
        let ds = random_data(3, 400, 5);
        let reg = Regularization::l2(1e-2);
        let a = train_logistic(&ds, reg, &SolverOptions::default()).unwrap();
        let b = train_logistic(&ds, reg, &SolverOptions { solver: Solver::GradientDescent, max_iter: 100_000, ..Default::default() }).unwrap();
        assert!(a.diagnostics.converged && b.diagnostics.converged);
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn l1_solvers_agree_and_produce_exact_zeros() {
        let ds = random_data(4, 400, 6);
        let reg = Regularization::l1(0.02);
        let a = train_logistic(&ds, reg, &SolverOptions::default()).unwrap();
        let b = train_logistic(&ds, reg, &SolverOptions { solver: Solver::GradientDescent, max_iter: 200_000, tol: 1e-7, record_trace: false }).unwrap();
        assert!(a.diagnostics.converged, "{:?}", a.diagnostics);
        assert!(b.diagnostics.converged, "{:?}", b.diagnostics);
        assert!((a.diagnostics.final_objective - b.diagnostics.final_objective).abs() < 1e-9);
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn huge_l1_gives_zero_vector() {
        let ds = random_data(5, 200, 4);
        for solver in [Solver::Auto, Solver::GradientDescent] {
            let m = train_logistic(&ds, Regularization::l1(1e6), &SolverOptions { solver, ..Default::default() }).unwrap();
            assert!(m.weights.iter().all(|&w| w == 0.0), "{:?}", m.weights);
        }
    }

    #[test]
    fn one_label_gives_constant_classifier() {
        let ds = Dataset::from_rows(2, [(vec![1.0, 0.0], NEG), (vec![0.0, 1.0], NEG)]);
        let m = train_logistic(&ds, Regularization::default(), &SolverOptions::default()).unwrap();
        assert_eq!(m.weights, vec![0.0, 0.0]);
        assert_eq!(m.predict(&[1.0, 1.0]), NEG);
    }

    #[test]
    fn invalid_inputs() {
        let ds = random_data(6, 10, 2);
        assert!(train_logistic(&ds, Regularization::l2(f64::NAN), &SolverOptions::default()).is_err());
        assert!(train_logistic(&ds, Regularization::l1(-1.0), &SolverOptions::default()).is_err());
        assert!(train_logistic(&Dataset::new(2), Regularization::default(), &SolverOptions::default()).is_err());
    }

    #[test]
    fn ties_go_negative() {
        let m = LinearModel {
            weights: vec![1.0, -1.0],
            bias: 0.0,
            reg: Regularization::default(),
            diagnostics: Diagnostics { final_objective: 0.0, residual: 0.0, iterations: 0, converged: true, trace: vec![] },
        };
        assert_eq!(m.predict(&[1.0, 1.0]), NEG);
        assert_eq!(m.predict(&[1.0, 0.0]), POS);
    }

    #[test]
    fn cholesky_solves_small_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&a, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-12);
        assert!(cholesky_solve(&[0.0], &[1.0]).is_none());
    }
}

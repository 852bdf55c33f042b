//! Fixed-point shrinkage iteration with a quasi-Armijo step for the LASSO
//! objective `F(x) = lambda * ||x||_1 + 0.5 * ||y - A x||^2`.
//!
//! Each iteration computes the shrinkage direction
//! `d = S(G(x)) - x` with `G(x) = x - tau A^T (A x - y)` and
//! `S(v) = v - clamp(v, -tau*lambda, tau*lambda)`, then backtracks along `d`
//! until `F(x + sigma d) - F(x) <= sigma * gamma * delta`, where
//! `delta = d^T A^T(Ax - y) + lambda (||x + d||_1 - ||x||_1)`.
//!
//! `A x` and `A d` are cached, so the line search costs no operator
//! applications: one adjoint per iteration for the gradient and one forward
//! for `A d`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linop::{dot, norm2, power_iteration, LinearOperator};

/// Seed of the power iteration used to calibrate `tau`.
pub const POWER_ITERATION_SEED: u64 = 0x5EED_CAFE;

#[derive(Clone, Copy)]
pub struct LassoProblem<'a> {
    op: &'a dyn LinearOperator,
    y: &'a [f64],
    lambda: f64,
}

impl<'a> LassoProblem<'a> {
    pub fn new(op: &'a dyn LinearOperator, y: &'a [f64], lambda: f64) -> Result<Self> {
        if y.len() != op.rows() {
            return Err(Error::InvalidShape(format!(
                "measurements have length {}, operator has {} rows",
                y.len(),
                op.rows()
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { op, y, lambda })
    }

    pub fn op(&self) -> &'a dyn LinearOperator {
        self.op
    }

    pub fn y(&self) -> &'a [f64] {
        self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.op.cols()
    }

    /// `A x - y`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.op.forward(x);
        r.iter_mut().zip(self.y).for_each(|(a, b)| *a -= b);
        r
    }

    /// `A^T (A x - y)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.op.adjoint(&self.residual(x))
    }
}

/// How the LASSO penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `fraction * ||A^T y||_inf`.
    Relative(f64),
    Fixed(f64),
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Relative(0.01)
    }
}

impl LambdaRule {
    pub fn resolve(&self, op: &dyn LinearOperator, y: &[f64]) -> f64 {
        match *self {
            LambdaRule::Fixed(v) => v,
            LambdaRule::Relative(fraction) => {
                let peak = op.adjoint(y).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                // With A^T y = 0 the zero vector is optimal for every lambda; any positive value works.
                (fraction * peak).max(f64::MIN_POSITIVE)
            }
        }
    }
}

/// Iteration parameters that do not depend on the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// `tau = tau_safety / lambda_max`; must lie in `(0, 2)`.
    pub tau_safety: f64,
    pub beta: f64,
    pub gamma: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub max_backtracks: usize,
    pub power_iters: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tau_safety: 1.9,
            beta: 0.5,
            gamma: 0.1,
            max_iter: 10_000,
            tol: 1e-6,
            max_backtracks: 30,
            power_iters: 30,
        }
    }
}

impl SolverParams {
    /// Estimates `lambda_max(A^T A)` by power iteration and fixes `tau`.
    pub fn calibrate(&self, op: &dyn LinearOperator) -> Result<SolverConfig> {
        let lambda_max = power_iteration(op, self.power_iters, POWER_ITERATION_SEED);
        SolverConfig::new(self, lambda_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub beta: f64,
    pub gamma: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub max_backtracks: usize,
    /// Estimate of `lambda_max(A^T A)` that `tau` was derived from.
    pub lambda_max: f64,
}

impl SolverConfig {
    pub fn new(params: &SolverParams, lambda_max: f64) -> Result<Self> {
        if !(params.tau_safety > 0.0 && params.tau_safety < 2.0) {
            return Err(Error::Domain(format!(
                "tau safety factor {} not in (0, 2)",
                params.tau_safety
            )));
        }
        let tau = if lambda_max > 0.0 {
            params.tau_safety / lambda_max
        } else {
            1.0
        };
        let cfg = Self {
            tau,
            beta: params.beta,
            gamma: params.gamma,
            max_iter: params.max_iter,
            tol: params.tol,
            max_backtracks: params.max_backtracks,
            lambda_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Domain(format!("tau must be positive, got {}", self.tau)));
        }
        if self.lambda_max > 0.0 && self.tau * self.lambda_max >= 2.0 {
            return Err(Error::Domain(format!(
                "tau = {} is outside (0, 2/{})",
                self.tau, self.lambda_max
            )));
        }
        if !in_unit(self.beta) || !in_unit(self.gamma) {
            return Err(Error::Domain(format!(
                "beta = {} and gamma = {} must lie in (0, 1)",
                self.beta, self.gamma
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `||d|| <= tol * max(1, ||x||)`.
    Converged,
    MaxIterations,
    /// The descent certificate stopped being negative at floating-point resolution.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `F(x^k)` at the start of the iteration.
    pub objective: f64,
    pub direction_norm: f64,
    pub sigma: f64,
    pub delta: f64,
    pub backtracks: usize,
    /// No power of `beta` passed the sufficient-decrease test; the smallest was taken.
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_objective: f64,
    pub final_direction_norm: f64,
    /// Forward plus adjoint operator applications made by the solve.
    pub applications: usize,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn exhausted_count(&self) -> usize {
        self.records.iter().filter(|r| r.exhausted).count()
    }

    /// `F(x^0), F(x^1), ..., F(x_final)`.
    pub fn objectives(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.records.iter().map(|r| r.objective).collect();
        v.push(self.final_objective);
        v
    }

    /// `(F(x^k) - F(x*)) / F(x^k)` with `x*` the final iterate.
    pub fn normalized_errors(&self) -> Vec<f64> {
        let best = self.final_objective;
        self.objectives()
            .into_iter()
            .map(|f| if f > 0.0 { ((f - best) / f).max(0.0) } else { 0.0 })
            .collect()
    }

    /// First iteration whose normalized error is at or below `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> usize {
        let errs = self.normalized_errors();
        errs.iter().position(|&e| e <= threshold).unwrap_or(errs.len())
    }

    /// True when no recorded objective exceeds its predecessor by more than
    /// `rel_slack * |F|` (rounding in the objective evaluation).
    pub fn objective_non_increasing(&self, rel_slack: f64) -> bool {
        self.objectives()
            .windows(2)
            .all(|w| w[1] <= w[0] + rel_slack * w[0].abs())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,direction_norm,sigma,delta,backtracks\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{}",
                r.iteration, r.objective, r.direction_norm, r.sigma, r.delta, r.backtracks
            );
        }
        out
    }
}

/// `v - clamp(v, -c, c)` elementwise.
pub fn soft_threshold(v: &[f64], c: f64) -> Vec<f64> {
    assert!(c >= 0.0, "threshold must be nonnegative");
    v.iter().map(|&x| x - x.clamp(-c, c)).collect()
}

/// `x - tau A^T (A x - y)`, one forward and one adjoint application.
pub fn gradient_step(prob: &LassoProblem<'_>, x: &[f64], tau: f64) -> Vec<f64> {
    let g = prob.gradient(x);
    x.iter().zip(&g).map(|(xi, gi)| xi - tau * gi).collect()
}

pub fn objective(prob: &LassoProblem<'_>, x: &[f64]) -> f64 {
    let r = prob.residual(x);
    prob.lambda * l1(x) + 0.5 * dot(&r, &r)
}

/// Descent certificate of the step `x -> x_trial` along `d = x_trial - x`.
pub fn delta(prob: &LassoProblem<'_>, x: &[f64], x_trial: &[f64], d: &[f64]) -> f64 {
    delta_from_gradient(&prob.gradient(x), x, x_trial, d, prob.lambda)
}

fn delta_from_gradient(grad: &[f64], x: &[f64], x_trial: &[f64], d: &[f64], lambda: f64) -> f64 {
    // per component; differencing the two l1 totals cancels near a fixed point
    grad.iter()
        .zip(d)
        .zip(x_trial.iter().zip(x))
        .map(|((g, di), (t, xi))| g * di + lambda * (t.abs() - xi.abs()))
        .sum()
}

pub fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Outcome of one quasi-Armijo search.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoStep {
    pub sigma: f64,
    pub x_next: Vec<f64>,
    pub backtracks: usize,
    pub exhausted: bool,
}

struct LineSearch {
    sigma: f64,
    backtracks: usize,
    exhausted: bool,
}

/// Largest `sigma in {1, beta, beta^2, ...}` with `F(x + sigma d) - F(x) <= sigma gamma delta`.
///
/// The objective change is expanded around the cached residual `r = A x - y` and
/// `ad = A d` so that no cancellation between two full objective values occurs:
/// `sigma r.ad + sigma^2/2 ||ad||^2 + lambda sum(|x + sigma d| - |x|)`.
#[allow(clippy::too_many_arguments)]
fn search(
    x: &[f64],
    d: &[f64],
    r: &[f64],
    ad: &[f64],
    lambda: f64,
    delta_k: f64,
    beta: f64,
    gamma: f64,
    max_backtracks: usize,
) -> LineSearch {
    let rad = dot(r, ad);
    let adad = dot(ad, ad);
    let mut sigma = 1.0;
    let mut backtracks = 0;
    loop {
        let l1_change: f64 = x
            .iter()
            .zip(d)
            .map(|(&xi, &di)| (xi + sigma * di).abs() - xi.abs())
            .sum();
        let change = sigma * rad + 0.5 * sigma * sigma * adad + lambda * l1_change;
        if change <= sigma * gamma * delta_k {
            return LineSearch {
                sigma,
                backtracks,
                exhausted: false,
            };
        }
        if backtracks == max_backtracks {
            return LineSearch {
                sigma,
                backtracks,
                exhausted: true,
            };
        }
        sigma *= beta;
        backtracks += 1;
    }
}

pub fn armijo_search(
    prob: &LassoProblem<'_>,
    x: &[f64],
    d: &[f64],
    delta_k: f64,
    beta: f64,
    gamma: f64,
    max_backtracks: usize,
) -> Result<ArmijoStep> {
    if delta_k > 0.0 {
        return Err(Error::Domain(format!("delta must be nonpositive, got {delta_k}")));
    }
    let r = prob.residual(x);
    let ad = prob.op.forward(d);
    let ls = search(x, d, &r, &ad, prob.lambda, delta_k, beta, gamma, max_backtracks);
    let x_next = x.iter().zip(d).map(|(xi, di)| xi + ls.sigma * di).collect();
    Ok(ArmijoStep {
        sigma: ls.sigma,
        x_next,
        backtracks: ls.backtracks,
        exhausted: ls.exhausted,
    })
}

/// Runs the iteration from `x0` (zero when `None`).
pub fn solve_lasso(
    prob: &LassoProblem<'_>,
    cfg: &SolverConfig,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolverTrace)> {
    solve_lasso_observed(prob, cfg, x0, |_, _| {})
}

/// Like [`solve_lasso`], calling `observe(k, x^k)` before each direction is computed.
pub fn solve_lasso_observed(
    prob: &LassoProblem<'_>,
    cfg: &SolverConfig,
    x0: Option<&[f64]>,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolverTrace)> {
    cfg.validate()?;
    let n = prob.dim();
    let (tau, lambda) = (cfg.tau, prob.lambda);
    let mut applications = 0;

    let mut x = match x0 {
        Some(v) if v.len() != n => {
            return Err(Error::InvalidShape(format!(
                "initial point has length {}, expected {n}",
                v.len()
            )))
        }
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    // r = A x - y
    let mut r: Vec<f64> = if x.iter().all(|&v| v == 0.0) {
        prob.y.iter().map(|v| -v).collect()
    } else {
        applications += 1;
        prob.residual(&x)
    };

    let mut records = Vec::new();
    let mut grad = vec![0.0; n];
    let mut ad = vec![0.0; prob.op.rows()];
    let mut k = 0;
    loop {
        observe(k, &x);
        prob.op.adjoint_into(&r, &mut grad);
        applications += 1;

        let threshold = tau * lambda;
        let trial: Vec<f64> = x
            .iter()
            .zip(&grad)
            .map(|(&xi, &gi)| {
                let v = xi - tau * gi;
                v - v.clamp(-threshold, threshold)
            })
            .collect();
        let d: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
        let direction_norm = norm2(&d);
        let objective = lambda * l1(&x) + 0.5 * dot(&r, &r);
        if !objective.is_finite() || !direction_norm.is_finite() {
            return Err(Error::Diverged { iteration: k });
        }

        let finish = |termination| SolverTrace {
            records: Vec::new(),
            termination,
            final_objective: objective,
            final_direction_norm: direction_norm,
            applications: 0,
        };
        let stop = if direction_norm <= cfg.tol * norm2(&x).max(1.0) {
            Some(finish(Termination::Converged))
        } else if k >= cfg.max_iter {
            Some(finish(Termination::MaxIterations))
        } else {
            None
        };
        if let Some(mut trace) = stop {
            trace.records = records;
            trace.applications = applications;
            return Ok((x, trace));
        }

        let delta_k = delta_from_gradient(&grad, &x, &trial, &d, lambda);
        if !delta_k.is_finite() {
            return Err(Error::Diverged { iteration: k });
        }
        if delta_k >= 0.0 {
            let mut trace = finish(Termination::Stalled);
            trace.records = records;
            trace.applications = applications;
            return Ok((x, trace));
        }

        prob.op.apply_into(&d, &mut ad);
        applications += 1;
        let ls = search(&x, &d, &r, &ad, lambda, delta_k, cfg.beta, cfg.gamma, cfg.max_backtracks);
        records.push(IterationRecord {
            iteration: k,
            objective,
            direction_norm,
            sigma: ls.sigma,
            delta: delta_k,
            backtracks: ls.backtracks,
            exhausted: ls.exhausted,
        });
        x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += ls.sigma * di);
        r.iter_mut().zip(&ad).for_each(|(ri, ai)| *ri += ls.sigma * ai);
        k += 1;
    }
}

//! Iteratively reweighted l1 recovery driven by the wavelet quadtree.
//!
//! The weighted problem `min lambda ||x̂||_1 + 0.5 ||Â x̂ - y||^2` with
//! `Â = Phi Psi W^-1` and `x̂ = W x` is solved repeatedly while the diagonal
//! `W` grows a tree-structured support from the coarse scale down:
//!
//! 1. `LL_S` gets weight 0.1, everything else 1; solve.
//! 2. Keep only the `LL_S` part of the solution, correlate the residual with
//!    the columns of `Â` and take the top `p%` of the level-`S` detail
//!    coefficients as tree roots (weight 0.2).
//! 3. For `s = S-1, ..., 1`: the children of the surviving level-`s+1` nodes
//!    get weight `0.1 (S - s + 1)`; solve; drop nodes whose magnitude is below
//!    `epsilon` back to weight 1.
//! 4. Solve once more with the final weights.
//!
//! `S + 1` solves in total. A relative λ rule is resolved once against the
//! unweighted operator `Phi Psi` and shared by every stage.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linop::{compose, Composite, Diagonal, LinearOperator, Operator};
use crate::solver::{solve_lasso, LambdaRule, LassoProblem, SolverParams, SolverTrace};
use crate::wavelet::{wavelet_synthesis_op, Band, WaveletLayout};

pub const LL_WEIGHT: f64 = 0.1;
pub const ROOT_WEIGHT: f64 = 0.2;

/// Provenance of one diagonal entry of `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightTag {
    OffTree,
    /// Member of `LL_S`.
    Coarse,
    /// Member of the tree set `I_s` at this level.
    Tree(usize),
}

/// Weight of a tree node at `level` in an `levels`-level decomposition.
pub fn tree_weight(levels: usize, level: usize) -> f64 {
    if level == levels {
        ROOT_WEIGHT
    } else {
        0.1 * (levels - level + 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
    tags: Vec<WeightTag>,
}

impl WeightVector {
    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
            tags: vec![WeightTag::OffTree; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tags(&self) -> &[WeightTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The diagonal operator `W^-1`.
    pub fn inverse_op(&self) -> Result<Diagonal> {
        let inv: Vec<f64> = self.values.iter().map(|w| 1.0 / w).collect();
        crate::linop::diag_op(&inv)
    }

    fn set(&mut self, i: usize, value: f64, tag: WeightTag) {
        self.values[i] = value;
        self.tags[i] = tag;
    }

    /// Tags `indices` as tree nodes of `level` with the matching weight.
    pub fn assign_level(&mut self, indices: &[usize], levels: usize, level: usize) {
        let w = tree_weight(levels, level);
        for &i in indices {
            self.set(i, w, WeightTag::Tree(level));
        }
    }

    fn reset(&mut self, i: usize) {
        self.set(i, 1.0, WeightTag::OffTree);
    }

    /// Every entry carries exactly the value its tag prescribes and tree tags
    /// sit in detail bands of their own level.
    pub fn is_well_formed(&self, layout: &WaveletLayout) -> bool {
        if self.values.len() != layout.len() {
            return false;
        }
        self.values.iter().zip(&self.tags).enumerate().all(|(i, (&v, &tag))| {
            let loc = match layout.locate(i) {
                Ok(loc) => loc,
                Err(_) => return false,
            };
            match tag {
                WeightTag::OffTree => v == 1.0,
                WeightTag::Coarse => v == LL_WEIGHT && loc.subband.band == Band::LL,
                WeightTag::Tree(s) => {
                    v == tree_weight(layout.levels(), s)
                        && loc.subband.level == s
                        && loc.subband.band != Band::LL
                }
            }
        })
    }
}

/// `LL_S` at 0.1, everything else at 1.
pub fn init_weights(layout: &WaveletLayout) -> WeightVector {
    let mut w = WeightVector::ones(layout.len());
    for i in layout.indices(layout.ll()) {
        w.set(i, LL_WEIGHT, WeightTag::Coarse);
    }
    w
}

/// `|Â^T r|` with a single adjoint application.
pub fn correlations(a_hat: &dyn LinearOperator, residual: &[f64]) -> Vec<f64> {
    assert_eq!(residual.len(), a_hat.rows(), "residual length");
    let mut c = a_hat.adjoint(residual);
    c.iter_mut().for_each(|v| *v = v.abs());
    c
}

/// `ceil(p/100 * total)`, treating values within 1e-9 of an integer as that integer.
fn percent_count(p_percent: f64, total: usize) -> usize {
    let exact = p_percent / 100.0 * total as f64;
    let k = if (exact - exact.round()).abs() < 1e-9 {
        exact.round()
    } else {
        exact.ceil()
    };
    (k as usize).min(total)
}

/// The `ceil(p% * |LH_S ∪ HL_S ∪ HH_S|)` level-`S` detail indices of largest
/// correlation, ties broken by ascending index. Returned in ascending order.
pub fn select_roots(c: &[f64], layout: &WaveletLayout, p_percent: f64) -> Result<Vec<usize>> {
    if !(p_percent > 0.0 && p_percent <= 100.0) {
        return Err(Error::Domain(format!("p_percent {p_percent} not in (0, 100]")));
    }
    if c.len() != layout.len() {
        return Err(Error::InvalidShape(format!(
            "correlation vector has {} entries, layout expects {}",
            c.len(),
            layout.len()
        )));
    }
    let mut candidates = layout.detail_indices(layout.levels());
    let k = percent_count(p_percent, candidates.len());
    candidates.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
    candidates.truncate(k);
    candidates.sort_unstable();
    Ok(candidates)
}

/// Children of `parents` become `I_s` with weight `0.1 (S - s + 1)`.
pub fn grow_level(
    weights: &mut WeightVector,
    layout: &WaveletLayout,
    parents: &[usize],
    level: usize,
) -> Result<Vec<usize>> {
    if level == 0 || level >= layout.levels() {
        return Err(Error::Domain(format!(
            "grow_level needs 1 <= s < {}, got {level}",
            layout.levels()
        )));
    }
    let mut grown = Vec::with_capacity(4 * parents.len());
    for &p in parents {
        let loc = layout.locate(p)?;
        if loc.subband.level != level + 1 || loc.subband.band == Band::LL {
            return Err(Error::Domain(format!(
                "index {p} is not a level-{} detail coefficient",
                level + 1
            )));
        }
        grown.extend(layout.children(p)?);
    }
    grown.sort_unstable();
    weights.assign_level(&grown, layout.levels(), level);
    Ok(grown)
}

/// Removes members of `tree` with `|x_j| < epsilon`, restoring their weight to 1.
/// Returns the removed indices.
pub fn prune(
    weights: &mut WeightVector,
    tree: &mut Vec<usize>,
    x: &[f64],
    epsilon: f64,
) -> Vec<usize> {
    let mut removed = Vec::new();
    tree.retain(|&j| {
        if x[j].abs() < epsilon {
            weights.reset(j);
            removed.push(j);
            false
        } else {
            true
        }
    });
    removed
}

/// Pruning tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    /// `fraction * max_i |x̂_i|` of the stage solution.
    Relative(f64),
    Absolute(f64),
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule::Relative(1e-3)
    }
}

impl EpsilonRule {
    pub fn resolve(&self, x: &[f64]) -> f64 {
        match *self {
            EpsilonRule::Absolute(v) => v,
            EpsilonRule::Relative(f) => f * x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsspConfig {
    pub p_percent: f64,
    pub epsilon: EpsilonRule,
    pub lambda: LambdaRule,
    pub solver: SolverParams,
    /// Start each solve from the previous solution rescaled to the new weights.
    pub warm_start: bool,
}

impl Default for TsspConfig {
    fn default() -> Self {
        Self {
            p_percent: 10.0,
            epsilon: EpsilonRule::default(),
            lambda: LambdaRule::default(),
            solver: SolverParams::default(),
            warm_start: true,
        }
    }
}

impl TsspConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_percent > 0.0 && self.p_percent <= 100.0) {
            return Err(Error::Domain(format!("p_percent {} not in (0, 100]", self.p_percent)));
        }
        match self.epsilon {
            EpsilonRule::Relative(v) | EpsilonRule::Absolute(v) if !(v > 0.0) => {
                return Err(Error::Domain(format!("epsilon must be positive, got {v}")))
            }
            _ => {}
        }
        let (LambdaRule::Fixed(v) | LambdaRule::Relative(v)) = self.lambda;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("lambda parameter must be positive, got {v}")));
        }
        Ok(())
    }
}

/// Diagnostics of one inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: usize,
    /// Tree level grown before this solve; `None` for the first and final solves.
    pub level: Option<usize>,
    pub lambda: f64,
    pub tau: f64,
    /// Size of the weighted support after the stage: `|I_s|` after pruning for
    /// tree stages, `|LL_S|` for the first and the total tree size for the last.
    pub support: usize,
    pub trace: SolverTrace,
}

impl StageReport {
    pub fn initial_objective(&self) -> f64 {
        self.trace.objectives()[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Unweighted wavelet coefficients `x = W^-1 x̂`.
    pub coefficients: Vec<f64>,
    pub weights: WeightVector,
    pub stages: Vec<StageReport>,
    /// `(level, I_s)` after pruning, from level `S` down to 1.
    pub tree: Vec<(usize, Vec<usize>)>,
    /// `(level, removed indices)` for each pruned level.
    pub pruned: Vec<(usize, Vec<usize>)>,
}

impl Recovery {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.trace.iterations()).sum()
    }

    pub fn stages_csv(&self) -> String {
        let mut out = String::from("stage,level,lambda,iterations,final_objective,support\n");
        for s in &self.stages {
            let level = s.level.map(|l| l.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{:e},{},{:e},{}",
                s.stage,
                level,
                s.lambda,
                s.trace.iterations(),
                s.trace.final_objective,
                s.support
            );
        }
        out
    }
}

/// `Â = Phi Psi W^-1`.
pub fn weighted_operator(phi: &Operator, layout: &WaveletLayout, weights: &WeightVector) -> Result<Composite> {
    compose(vec![
        Arc::clone(phi),
        Arc::new(wavelet_synthesis_op(*layout)),
        Arc::new(weights.inverse_op()?),
    ])
}

/// `Phi Psi`.
pub fn unweighted_operator(phi: &Operator, layout: &WaveletLayout) -> Result<Composite> {
    compose(vec![Arc::clone(phi), Arc::new(wavelet_synthesis_op(*layout))])
}

struct StageSolve {
    x_hat: Vec<f64>,
    report: StageReport,
}

fn solve_stage(
    stage: usize,
    level: Option<usize>,
    a_hat: &Composite,
    y: &[f64],
    lambda: f64,
    cfg: &TsspConfig,
    x0: Option<&[f64]>,
) -> Result<StageSolve> {
    let wrap = |e: Error| Error::Stage {
        stage,
        source: Box::new(e),
    };
    let prob = LassoProblem::new(a_hat, y, lambda).map_err(wrap)?;
    let solver_cfg = cfg.solver.calibrate(a_hat).map_err(wrap)?;
    let (x_hat, trace) = solve_lasso(&prob, &solver_cfg, x0).map_err(wrap)?;
    Ok(StageSolve {
        x_hat,
        report: StageReport {
            stage,
            level,
            lambda,
            tau: solver_cfg.tau,
            support: 0,
            trace,
        },
    })
}

fn check_inputs(y: &[f64], phi: &Operator, layout: &WaveletLayout) -> Result<()> {
    if phi.cols() != layout.len() {
        return Err(Error::InvalidShape(format!(
            "sensing operator has {} columns, layout has {} coefficients",
            phi.cols(),
            layout.len()
        )));
    }
    if y.len() != phi.rows() {
        return Err(Error::InvalidShape(format!(
            "{} measurements for an operator with {} rows",
            y.len(),
            phi.rows()
        )));
    }
    Ok(())
}

/// Rescales `x̂` solved under `old` weights to the variables of `new` weights.
fn rescale(x_hat: &[f64], old: &WeightVector, new: &WeightVector) -> Vec<f64> {
    x_hat
        .iter()
        .zip(old.values())
        .zip(new.values())
        .map(|((x, wo), wn)| x * wn / wo)
        .collect()
}

/// Tree-weighted recovery of wavelet coefficients from `y = Phi Psi x`.
pub fn recover_tssp(
    y: &[f64],
    phi: &Operator,
    layout: &WaveletLayout,
    cfg: &TsspConfig,
) -> Result<Recovery> {
    cfg.validate()?;
    check_inputs(y, phi, layout)?;
    let levels = layout.levels();
    let mut stages = Vec::with_capacity(levels + 1);
    let lambda = cfg.lambda.resolve(&unweighted_operator(phi, layout)?, y);

    let mut weights = init_weights(layout);
    let a_hat = weighted_operator(phi, layout, &weights)?;
    let first = solve_stage(1, None, &a_hat, y, lambda, cfg, None)?;
    let mut x_hat = first.x_hat;
    let mut report = first.report;
    report.support = layout.band_side(levels).pow(2);
    stages.push(report);
    let mut solved_weights = weights.clone();

    // Residual of the coarse approximation alone.
    let ll = layout.indices(layout.ll());
    let mut truncated = vec![0.0; layout.len()];
    for &i in &ll {
        truncated[i] = x_hat[i];
    }
    let mut residual = a_hat.forward(&truncated);
    residual.iter_mut().zip(y).for_each(|(r, yi)| *r = yi - *r);
    let c = correlations(&a_hat, &residual);

    let roots = select_roots(&c, layout, cfg.p_percent)?;
    weights.assign_level(&roots, levels, levels);
    let mut tree = vec![(levels, roots)];
    let mut pruned = Vec::new();

    for level in (1..levels).rev() {
        let stage = stages.len() + 1;
        let parents = &tree.last().expect("roots present").1;
        let mut grown = grow_level(&mut weights, layout, parents, level)?;
        let a_hat = weighted_operator(phi, layout, &weights)?;
        let x0 = cfg.warm_start.then(|| rescale(&x_hat, &solved_weights, &weights));
        let solved = solve_stage(stage, Some(level), &a_hat, y, lambda, cfg, x0.as_deref())?;
        x_hat = solved.x_hat;
        solved_weights = weights.clone();

        let eps = cfg.epsilon.resolve(&x_hat);
        let removed = prune(&mut weights, &mut grown, &x_hat, eps);
        let mut report = solved.report;
        report.support = grown.len();
        stages.push(report);
        tree.push((level, grown));
        pruned.push((level, removed));
    }

    let stage = stages.len() + 1;
    let a_hat = weighted_operator(phi, layout, &weights)?;
    let x0 = cfg.warm_start.then(|| rescale(&x_hat, &solved_weights, &weights));
    let last = solve_stage(stage, None, &a_hat, y, lambda, cfg, x0.as_deref())?;
    let mut report = last.report;
    report.support = tree.iter().map(|(_, s)| s.len()).sum();
    stages.push(report);

    let coefficients = last
        .x_hat
        .iter()
        .zip(weights.values())
        .map(|(x, w)| x / w)
        .collect();
    Ok(Recovery {
        coefficients,
        weights,
        stages,
        tree,
        pruned,
    })
}

/// Single unweighted solve (`W = I`) of `min lambda ||x||_1 + 0.5 ||Phi Psi x - y||^2`.
pub fn recover_unweighted(
    y: &[f64],
    phi: &Operator,
    layout: &WaveletLayout,
    lambda: LambdaRule,
    solver: SolverParams,
) -> Result<Recovery> {
    check_inputs(y, phi, layout)?;
    let weights = WeightVector::ones(layout.len());
    let a = unweighted_operator(phi, layout)?;
    let lambda = lambda.resolve(&a, y);
    let cfg = TsspConfig {
        solver,
        ..TsspConfig::default()
    };
    let solved = solve_stage(1, None, &a, y, lambda, &cfg, None)?;
    Ok(Recovery {
        coefficients: solved.x_hat,
        weights,
        stages: vec![solved.report],
        tree: Vec::new(),
        pruned: Vec::new(),
    })
}

//! Centralized solvers: fixed-budget iterative methods over static problems.
//!
//! Solvers are stateless functions of `(problem, start, config)` so the same
//! routine serves both one-shot minimization and online loops that re-invoke
//! it on every new sample, warm-started at the previous iterate. Each solver
//! runs exactly `num_iter` iterations — convergence checks are the caller's
//! business, since online use deliberately under-solves each sample.
//!
//! Methods whose state is more than the iterate expose a full-state variant
//! (e.g. [`peaceman_rachford_state`], [`dual::dual_solve`]) so that running
//! `a` iterations and then `b` more from the returned state is exactly one
//! run of `a + b`.

pub mod dual;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use ndarray::{Array1, Array2};

use crate::costs::{Cost, CostError};
use crate::sets::SetError;
use crate::tensor::Tensor;

pub use dual::{dual_solve, DualMethod, DualState};

/// Iterate norms beyond this abort with [`SolverError::Diverged`] instead of
/// flooding the run with overflow and NaN.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("the problem has no {0} part, which this method requires")]
    MissingPart(&'static str),
    #[error("iterates diverged beyond {limit:e}; check the step size")]
    Diverged { limit: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("inner minimization did not converge within {iterations} iterations")]
    InnerSolveFailed { iterations: usize },
    #[error("constraint geometry unsupported by this method: {0}")]
    DualGeometry(String),
}

impl From<SetError> for SolverError {
    fn from(e: SetError) -> Self {
        SolverError::Cost(CostError::Set(e))
    }
}

/// The coupling constraint `Ax + By = c` over flattened variables.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    a: Array2<f64>,
    b: Array2<f64>,
    c: Array1<f64>,
}

impl LinearConstraint {
    pub fn new(a: Array2<f64>, b: Array2<f64>, c: Array1<f64>) -> Result<Self, SolverError> {
        if a.nrows() != c.len() || b.nrows() != c.len() {
            return Err(SolverError::InvalidConfig(format!(
                "constraint rows disagree: A has {}, B has {}, c has {}",
                a.nrows(),
                b.nrows(),
                c.len()
            )));
        }
        if c.is_empty() {
            return Err(SolverError::InvalidConfig("constraint needs at least one row".into()));
        }
        Ok(LinearConstraint { a, b, c })
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn b(&self) -> &Array2<f64> {
        &self.b
    }

    pub fn c(&self) -> &Array1<f64> {
        &self.c
    }
}

/// A static problem `min f(x) + g(y)`, optionally coupled by `Ax + By = c`.
///
/// Without a constraint, `f` and `g` share one variable (`min f(x) + g(x)`,
/// the composite form used by forward-backward and splitting methods); with
/// one, `f` owns `x` and `g` owns `y`.
#[derive(Debug, Clone)]
pub struct Problem {
    f: Option<Arc<dyn Cost>>,
    g: Option<Arc<dyn Cost>>,
    constraint: Option<LinearConstraint>,
}

impl Problem {
    /// `min f(x)` with a smooth (or at least prox-friendly) objective.
    pub fn smooth(f: Arc<dyn Cost>) -> Self {
        Problem { f: Some(f), g: None, constraint: None }
    }

    /// `min f(x) + g(x)` over one shared variable.
    pub fn composite(f: Arc<dyn Cost>, g: Arc<dyn Cost>) -> Result<Self, SolverError> {
        if f.domain().shape() != g.domain().shape() {
            return Err(SolverError::InvalidConfig(format!(
                "composite parts live on different shapes: {} vs {}",
                f.domain().shape(),
                g.domain().shape()
            )));
        }
        Ok(Problem { f: Some(f), g: Some(g), constraint: None })
    }

    /// `min f(x) + g(y)` subject to `Ax + By = c`.
    pub fn constrained(
        f: Arc<dyn Cost>,
        g: Arc<dyn Cost>,
        constraint: LinearConstraint,
    ) -> Result<Self, SolverError> {
        let n = f.domain().shape().num_elements();
        let m = g.domain().shape().num_elements();
        if constraint.a.ncols() != n || constraint.b.ncols() != m {
            return Err(SolverError::InvalidConfig(format!(
                "constraint columns disagree with the variables: A has {} for an x of {n} \
                 entries, B has {} for a y of {m}",
                constraint.a.ncols(),
                constraint.b.ncols()
            )));
        }
        Ok(Problem { f: Some(f), g: Some(g), constraint: Some(constraint) })
    }

    pub fn f(&self) -> Option<&Arc<dyn Cost>> {
        self.f.as_ref()
    }

    pub fn g(&self) -> Option<&Arc<dyn Cost>> {
        self.g.as_ref()
    }

    pub fn constraint(&self) -> Option<&LinearConstraint> {
        self.constraint.as_ref()
    }

    fn require_f(&self) -> Result<&Arc<dyn Cost>, SolverError> {
        self.f.as_ref().ok_or(SolverError::MissingPart("f"))
    }

    fn require_g(&self) -> Result<&Arc<dyn Cost>, SolverError> {
        self.g.as_ref().ok_or(SolverError::MissingPart("g"))
    }

    fn require_constraint(&self) -> Result<&LinearConstraint, SolverError> {
        self.constraint.as_ref().ok_or(SolverError::MissingPart("constraint"))
    }
}

/// Budget of the inner minimizations that dual methods and numeric proximal
/// evaluations run per outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSolve {
    #[serde(default = "default_inner_iter")]
    pub max_iter: usize,
    #[serde(default = "default_inner_tol")]
    pub tol: f64,
}

fn default_inner_iter() -> usize {
    50
}

fn default_inner_tol() -> f64 {
    1e-10
}

impl Default for InnerSolve {
    fn default() -> Self {
        InnerSolve { max_iter: default_inner_iter(), tol: default_inner_tol() }
    }
}

/// Iteration budget and parameters shared by the centralized solvers.
///
/// `step` is the step size α of gradient-type methods and the penalty ρ of
/// proximal ones; it is always explicit, never defaulted. `relaxation` only
/// affects splitting methods: 1 is pure Peaceman-Rachford and ½ recovers
/// Douglas-Rachford averaging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub step: f64,
    pub num_iter: usize,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default)]
    pub inner: InnerSolve,
}

fn default_relaxation() -> f64 {
    1.0
}

impl SolverConfig {
    pub fn new(step: f64, num_iter: usize) -> Self {
        SolverConfig {
            step,
            num_iter,
            relaxation: default_relaxation(),
            inner: InnerSolve::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(SolverError::InvalidConfig(format!(
                "step must be positive and finite, got {}",
                self.step
            )));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 2.0) {
            return Err(SolverError::InvalidConfig(format!(
                "relaxation must lie in (0, 2], got {}",
                self.relaxation
            )));
        }
        if self.inner.max_iter == 0 {
            return Err(SolverError::InvalidConfig("inner budget needs at least 1 iteration".into()));
        }
        if !(self.inner.tol >= 0.0) || !self.inner.tol.is_finite() {
            return Err(SolverError::InvalidConfig(format!(
                "inner tolerance must be non-negative and finite, got {}",
                self.inner.tol
            )));
        }
        Ok(())
    }
}

fn check_iterate(x: &Tensor) -> Result<(), SolverError> {
    let n = crate::tensor::norm(x);
    if n.is_finite() && n <= DIVERGENCE_LIMIT {
        Ok(())
    } else {
        Err(SolverError::Diverged { limit: DIVERGENCE_LIMIT })
    }
}

/// `x⁺ = x − α∇f(x)` for `num_iter` iterations.
pub fn gradient_method(
    problem: &Problem,
    x0: &Tensor,
    cfg: &SolverConfig,
) -> Result<Tensor, SolverError> {
    cfg.validate()?;
    let f = problem.require_f()?;
    let mut x = f.domain().check_input(x0).map_err(SetError::from)?;
    for _ in 0..cfg.num_iter {
        x = &x - &(f.gradient(&x)? * cfg.step);
        check_iterate(&x)?;
    }
    Ok(x)
}

/// `x⁺ = prox_{ρf}(x)` for `num_iter` iterations.
pub fn proximal_point(
    problem: &Problem,
    x0: &Tensor,
    cfg: &SolverConfig,
) -> Result<Tensor, SolverError> {
    cfg.validate()?;
    let f = problem.require_f()?;
    let mut x = f.domain().check_input(x0).map_err(SetError::from)?;
    for _ in 0..cfg.num_iter {
        x = f.proximal(&x, cfg.step)?;
        check_iterate(&x)?;
    }
    Ok(x)
}

/// `x⁺ = prox_{αg}(x − α∇f(x))` for `num_iter` iterations.
pub fn forward_backward(
    problem: &Problem,
    x0: &Tensor,
    cfg: &SolverConfig,
) -> Result<Tensor, SolverError> {
    cfg.validate()?;
    let f = problem.require_f()?;
    let g = problem.require_g()?;
    let mut x = f.domain().check_input(x0).map_err(SetError::from)?;
    for _ in 0..cfg.num_iter {
        let forward = &x - &(f.gradient(&x)? * cfg.step);
        x = g.proximal(&forward, cfg.step)?;
        check_iterate(&x)?;
    }
    Ok(x)
}

/// Relaxed Peaceman-Rachford splitting on `min f + g`, returning the primal
/// iterate `prox_{ρf}(z)` of the final auxiliary state.
pub fn peaceman_rachford(
    problem: &Problem,
    z0: &Tensor,
    cfg: &SolverConfig,
) -> Result<Tensor, SolverError> {
    Ok(peaceman_rachford_state(problem, z0, cfg)?.0)
}

/// [`peaceman_rachford`] exposing the auxiliary variable: returns
/// `(prox_{ρf}(z), z)` so a later call can resume from `z` exactly.
///
/// One iteration maps `z ↦ z + 2θ(w − x)` with `x = prox_{ρf}(z)` and
/// `w = prox_{ρg}(2x − z)`, where θ is `cfg.relaxation`.
pub fn peaceman_rachford_state(
    problem: &Problem,
    z0: &Tensor,
    cfg: &SolverConfig,
) -> Result<(Tensor, Tensor), SolverError> {
    cfg.validate()?;
    let f = problem.require_f()?;
    let g = problem.require_g()?;
    let rho = cfg.step;
    let mut z = f.domain().check_input(z0).map_err(SetError::from)?;
    for _ in 0..cfg.num_iter {
        let x = f.proximal(&z, rho)?;
        let w = g.proximal(&(&(&x * 2.0) - &z), rho)?;
        z = &z + &(&(&w - &x) * (2.0 * cfg.relaxation));
        check_iterate(&z)?;
    }
    let x = f.proximal(&z, rho)?;
    Ok((x, z))
}

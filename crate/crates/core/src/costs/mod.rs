//! Cost functions: the oracle surface that solvers consume.
//!
//! A [`Cost`] is a static convex (or extended-real-valued) function over
//! tensors of one fixed shape, exposing whichever oracles it supports —
//! value, gradient (a subgradient for non-smooth costs), Hessian over the
//! flattened variable, and the proximal operator
//! `prox_{ρF}(x) = argmin_y F(y) + ‖y−x‖²/(2ρ)`.
//!
//! Costs that are quadratic in disguise report their flattened
//! [`QuadraticForm`] through [`Cost::as_quadratic`], which unlocks exact
//! linear-algebra paths (closed-form proximal operators and argmins) even for
//! compositions built at runtime. Everything else falls back to
//! [`numeric_proximal`], an inner Newton or gradient solve on the strongly
//! convex proximal objective.
//!
//! Submodules: [`builtins`] for the concrete cost catalog, [`algebra`] for
//! sums/scalings/powers/products, and [`dynamic`] for time-varying costs and
//! their sampling machinery.

pub mod algebra;
pub mod builtins;
pub mod dynamic;

use std::fmt;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::linalg;
use crate::minimize::{backtracking_gradient, damped_newton};
use crate::sets::{ConstraintSet, SetError};
use crate::tensor::{self, Tensor};

pub use algebra::{power, product, scale, sum, Power, Product, Scaled, Sum};
pub use builtins::{
    project_onto_l1_ball, CosineSoftplus, CosineSoftplusSample, Huber, Indicator, Norm1, NormInf,
    Quadratic,
};
pub use dynamic::{
    power_dynamic, product_dynamic, scale_dynamic, sum_dynamic, ComposedDynamic, CostFamily,
    DiscreteDynamicCost, DynamicCost,
};

/// Iteration cap of the inner Newton proximal solve.
const PROX_NEWTON_MAX_ITER: usize = 20;
/// Iteration cap of the inner gradient-descent proximal solve.
const PROX_GRADIENT_MAX_ITER: usize = 500;
/// Step-norm tolerance of both inner proximal solves.
const PROX_STEP_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CostError {
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("{operation} is not available for {cost}")]
    NotImplemented { operation: &'static str, cost: &'static str },
    #[error("need {needed} samples at or before the requested time, only {available} available")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("inner proximal solve did not reach tolerance within {iterations} iterations")]
    ProxDidNotConverge { iterations: usize },
    #[error("singular linear system in a closed-form solve")]
    SingularSystem,
    #[error("invalid cost parameter: {0}")]
    InvalidParameter(String),
}

impl From<linalg::SingularMatrix> for CostError {
    fn from(_: linalg::SingularMatrix) -> Self {
        CostError::SingularSystem
    }
}

/// A static cost function over tensors of one fixed shape.
///
/// `value` is the only mandatory oracle. The capability flags tell callers
/// which of the optional oracles are meaningful: `gradient` must be
/// overridden when `has_gradient` reports true (returning a subgradient is
/// fine for non-smooth costs), and likewise for `hessian`. The Hessian is
/// expressed over the row-major flattened variable.
pub trait Cost: fmt::Debug + Send + Sync {
    fn domain(&self) -> &ConstraintSet;

    fn value(&self, x: &Tensor) -> Result<f64, CostError>;

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        let _ = x;
        Err(CostError::NotImplemented { operation: "gradient", cost: self.name() })
    }

    fn hessian(&self, x: &Tensor) -> Result<Array2<f64>, CostError> {
        let _ = x;
        Err(CostError::NotImplemented { operation: "hessian", cost: self.name() })
    }

    /// `argmin_y F(y) + ‖y−x‖²/(2·penalty)`. The default resolves a closed
    /// form through [`Cost::as_quadratic`] when one exists and otherwise runs
    /// the inner numeric solve of [`numeric_proximal`].
    fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, CostError> {
        check_penalty(penalty)?;
        let x = self.domain().check_input(x)?;
        if let Some(form) = self.as_quadratic() {
            return quadratic_proximal(&form, &x, penalty);
        }
        numeric_proximal(self, &x, penalty)
    }

    /// Short lowercase label used in error messages.
    fn name(&self) -> &'static str {
        "this cost"
    }

    fn has_gradient(&self) -> bool {
        false
    }

    fn has_hessian(&self) -> bool {
        false
    }

    fn has_closed_form_prox(&self) -> bool {
        self.as_quadratic().is_some()
    }

    /// The flattened quadratic data `(Q, b, c)` when this cost is exactly
    /// `½xᵀQx + bᵀx + c`, enabling closed-form solves.
    fn as_quadratic(&self) -> Option<QuadraticForm> {
        None
    }
}

/// Flattened quadratic data `½xᵀQx + bᵀx + c` with `Q` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub q: Array2<f64>,
    pub b: Array1<f64>,
    pub c: f64,
}

impl QuadraticForm {
    pub fn new(q: Array2<f64>, b: Array1<f64>, c: f64) -> Result<Self, CostError> {
        let n = b.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(CostError::InvalidParameter(format!(
                "quadratic matrix is {}x{} but the linear term has length {n}",
                q.nrows(),
                q.ncols()
            )));
        }
        let scale = q.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (q[[i, j]] - q[[j, i]]).abs() > 1e-12 * (1.0 + scale) {
                    return Err(CostError::InvalidParameter(
                        "quadratic matrix must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(QuadraticForm { q, b, c })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value_flat(&self, x: &Array1<f64>) -> f64 {
        0.5 * x.dot(&self.q.dot(x)) + self.b.dot(x) + self.c
    }

    pub fn gradient_flat(&self, x: &Array1<f64>) -> Array1<f64> {
        self.q.dot(x) + &self.b
    }

    pub fn scaled(&self, a: f64) -> QuadraticForm {
        QuadraticForm { q: &self.q * a, b: &self.b * a, c: self.c * a }
    }

    pub fn add(&self, other: &QuadraticForm) -> Result<QuadraticForm, CostError> {
        if self.dim() != other.dim() {
            return Err(CostError::InvalidParameter(format!(
                "cannot add quadratic forms of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(QuadraticForm { q: &self.q + &other.q, b: &self.b + &other.b, c: self.c + other.c })
    }

    /// `Some(λ)` when the matrix is exactly `λI` (bitwise, as assembled).
    pub fn isotropic_weight(&self) -> Option<f64> {
        let lambda = self.q[[0, 0]];
        for ((i, j), v) in self.q.indexed_iter() {
            let expected = if i == j { lambda } else { 0.0 };
            if *v != expected {
                return None;
            }
        }
        Some(lambda)
    }
}

pub(crate) fn check_penalty(penalty: f64) -> Result<(), CostError> {
    if penalty > 0.0 && penalty.is_finite() {
        Ok(())
    } else {
        Err(CostError::InvalidParameter(format!(
            "proximal penalty must be positive and finite, got {penalty}"
        )))
    }
}

/// Closed-form proximal of a quadratic: solves `(ρQ + I) y = x − ρb`.
pub(crate) fn quadratic_proximal(
    form: &QuadraticForm,
    x: &Tensor,
    penalty: f64,
) -> Result<Tensor, CostError> {
    let n = form.dim();
    let mut a = &form.q * penalty;
    for i in 0..n {
        a[[i, i]] += 1.0;
    }
    let rhs = tensor::flatten(x) - &(&form.b * penalty);
    let y = linalg::solve(a, rhs)?;
    Ok(tensor::from_flat(&y, x.shape()))
}

/// Inner numeric proximal solve on `F(y) + ‖y−x‖²/(2ρ)`: damped Newton when
/// the cost has a Hessian, otherwise backtracking gradient descent started at
/// step size `ρ`. Requires a gradient oracle.
pub fn numeric_proximal<C: Cost + ?Sized>(
    cost: &C,
    x: &Tensor,
    penalty: f64,
) -> Result<Tensor, CostError> {
    check_penalty(penalty)?;
    let x = cost.domain().check_input(x)?;
    if !cost.has_gradient() {
        return Err(CostError::NotImplemented {
            operation: "proximal (no closed form, and no gradient for the inner solve)",
            cost: cost.name(),
        });
    }
    let inv = 1.0 / penalty;
    let value = |y: &Tensor| -> Result<f64, CostError> {
        let d = y - &x;
        Ok(cost.value(y)? + 0.5 * inv * tensor::dot(&d, &d))
    };
    let gradient =
        |y: &Tensor| -> Result<Tensor, CostError> { Ok(cost.gradient(y)? + &((y - &x) * inv)) };
    let result = if cost.has_hessian() {
        let hessian = |y: &Tensor| -> Result<Array2<f64>, CostError> {
            let mut h = cost.hessian(y)?;
            for i in 0..h.nrows() {
                h[[i, i]] += inv;
            }
            Ok(h)
        };
        damped_newton(value, gradient, hessian, x.clone(), PROX_STEP_TOL, 0.0, PROX_NEWTON_MAX_ITER)?
    } else {
        backtracking_gradient(value, gradient, x.clone(), penalty, PROX_STEP_TOL, PROX_GRADIENT_MAX_ITER)?
    };
    if !result.converged {
        return Err(CostError::ProxDidNotConverge { iterations: result.iterations });
    }
    Ok(result.x)
}

//! Compositions of costs: scalings, sums, powers, and products.
//!
//! Compositions propagate every oracle they can derive from their parts —
//! including closed-form proximal operators where an exact rule exists, most
//! notably for sums of a quadratic and one prox-friendly term.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use super::{
    check_penalty, numeric_proximal, quadratic_proximal, Cost, CostError, QuadraticForm,
};
use crate::sets::ConstraintSet;
use crate::tensor::{self, Tensor};

fn check_scalar(name: &'static str, v: f64) -> Result<(), CostError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CostError::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

/// Domain of a composition: the parts' common domain, intersected when they
/// differ.
fn joint_domain(parts: &[Arc<dyn Cost>]) -> Result<ConstraintSet, CostError> {
    let first = parts.first().ok_or_else(|| {
        CostError::InvalidParameter("a composition needs at least one part".into())
    })?;
    for part in &parts[1..] {
        if part.domain().shape() != first.domain().shape() {
            return Err(CostError::InvalidParameter(format!(
                "parts live on different shapes: {} vs {}",
                first.domain().shape(),
                part.domain().shape()
            )));
        }
    }
    if parts.len() == 1 {
        return Ok(first.domain().clone());
    }
    Ok(ConstraintSet::intersection(parts.iter().map(|p| p.domain().clone()).collect())?)
}

/// `a·F` for a finite scalar `a`.
#[derive(Debug, Clone)]
pub struct Scaled {
    inner: Arc<dyn Cost>,
    scale: f64,
}

impl Scaled {
    pub fn new(scale: f64, inner: Arc<dyn Cost>) -> Result<Self, CostError> {
        check_scalar("scale", scale)?;
        Ok(Scaled { inner, scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Cost for Scaled {
    fn domain(&self) -> &ConstraintSet {
        self.inner.domain()
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        if self.scale == 0.0 {
            // The zero function, even where the inner value is +∞.
            self.domain().check_input(x)?;
            return Ok(0.0);
        }
        Ok(self.scale * self.inner.value(x)?)
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        if self.scale == 0.0 {
            let x = self.domain().check_input(x)?;
            return Ok(Tensor::zeros(x.shape()));
        }
        Ok(self.inner.gradient(x)? * self.scale)
    }

    fn hessian(&self, x: &Tensor) -> Result<Array2<f64>, CostError> {
        if self.scale == 0.0 {
            let x = self.domain().check_input(x)?;
            let n = x.len();
            return Ok(Array2::zeros((n, n)));
        }
        Ok(self.inner.hessian(x)? * self.scale)
    }

    fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, CostError> {
        check_penalty(penalty)?;
        let x = self.domain().check_input(x)?;
        if self.scale == 0.0 {
            return Ok(x);
        }
        if self.scale > 0.0 && self.inner.has_closed_form_prox() {
            // prox_{ρ(aF)} = prox_{(ρa)F}.
            return self.inner.proximal(&x, penalty * self.scale);
        }
        if let Some(form) = self.as_quadratic() {
            return quadratic_proximal(&form, &x, penalty);
        }
        numeric_proximal(self, &x, penalty)
    }

    fn name(&self) -> &'static str {
        "scaled cost"
    }

    fn has_gradient(&self) -> bool {
        self.scale == 0.0 || self.inner.has_gradient()
    }

    fn has_hessian(&self) -> bool {
        self.scale == 0.0 || self.inner.has_hessian()
    }

    fn has_closed_form_prox(&self) -> bool {
        self.scale == 0.0
            || (self.scale > 0.0 && self.inner.has_closed_form_prox())
            || self.as_quadratic().is_some()
    }

    fn as_quadratic(&self) -> Option<QuadraticForm> {
        self.inner.as_quadratic().map(|f| f.scaled(self.scale))
    }
}

/// `Σ F_i` over parts sharing one shape.
#[derive(Debug, Clone)]
pub struct Sum {
    parts: Vec<Arc<dyn Cost>>,
    domain: ConstraintSet,
}

impl Sum {
    pub fn new(parts: Vec<Arc<dyn Cost>>) -> Result<Self, CostError> {
        let domain = joint_domain(&parts)?;
        Ok(Sum { parts, domain })
    }

    pub fn parts(&self) -> &[Arc<dyn Cost>] {
        &self.parts
    }

    /// Splits the parts into an isotropic quadratic remainder `λ/2‖·‖² + bᵀ·`
    /// plus exactly one other prox-friendly cost, when the sum has that form.
    fn shift_split(&self) -> Option<(f64, Array1<f64>, &Arc<dyn Cost>)> {
        let n = self.domain.shape().num_elements();
        let mut lambda = 0.0;
        let mut b = Array1::zeros(n);
        let mut other: Option<&Arc<dyn Cost>> = None;
        for part in &self.parts {
            if let Some(form) = part.as_quadratic() {
                lambda += form.isotropic_weight()?;
                b = b + form.b;
            } else if part.has_closed_form_prox() && other.is_none() {
                other = Some(part);
            } else {
                return None;
            }
        }
        other.map(|o| (lambda, b, o))
    }
}

impl Cost for Sum {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        let mut total = 0.0;
        for part in &self.parts {
            total += part.value(&x)?;
        }
        Ok(total)
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let mut total = Tensor::zeros(x.shape());
        for part in &self.parts {
            total = total + part.gradient(&x)?;
        }
        Ok(total)
    }

    fn hessian(&self, x: &Tensor) -> Result<Array2<f64>, CostError> {
        let x = self.domain.check_input(x)?;
        let n = x.len();
        let mut total = Array2::zeros((n, n));
        for part in &self.parts {
            total = total + part.hessian(&x)?;
        }
        Ok(total)
    }

    fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, CostError> {
        check_penalty(penalty)?;
        let x = self.domain.check_input(x)?;
        if let Some(form) = self.as_quadratic() {
            return quadratic_proximal(&form, &x, penalty);
        }
        if let Some((lambda, b, other)) = self.shift_split() {
            // prox_{ρ(G + λ/2‖·‖² + bᵀ·)}(x) = prox_{σG}((x − ρb)/(1 + ρλ))
            // with σ = ρ/(1 + ρλ), valid while the shifted penalty stays
            // positive.
            let denom = 1.0 + penalty * lambda;
            if denom <= 0.0 {
                return Err(CostError::InvalidParameter(format!(
                    "proximal subproblem is not convex: 1 + penalty·{lambda} = {denom}"
                )));
            }
            let shifted = (&x - &(tensor::from_flat(&b, x.shape()) * penalty)) / denom;
            return other.proximal(&shifted, penalty / denom);
        }
        numeric_proximal(self, &x, penalty)
    }

    fn name(&self) -> &'static str {
        "sum of costs"
    }

    fn has_gradient(&self) -> bool {
        self.parts.iter().all(|p| p.has_gradient())
    }

    fn has_hessian(&self) -> bool {
        self.parts.iter().all(|p| p.has_hessian())
    }

    fn has_closed_form_prox(&self) -> bool {
        self.as_quadratic().is_some() || self.shift_split().is_some()
    }

    fn as_quadratic(&self) -> Option<QuadraticForm> {
        let mut total: Option<QuadraticForm> = None;
        for part in &self.parts {
            let form = part.as_quadratic()?;
            total = Some(match total {
                None => form,
                Some(t) => t.add(&form).ok()?,
            });
        }
        total
    }
}

/// `F^p` for an exponent `p ≥ 1`.
#[derive(Debug, Clone)]
pub struct Power {
    inner: Arc<dyn Cost>,
    exponent: f64,
}

impl Power {
    pub fn new(inner: Arc<dyn Cost>, exponent: f64) -> Result<Self, CostError> {
        check_scalar("exponent", exponent)?;
        if exponent < 1.0 {
            return Err(CostError::InvalidParameter(format!(
                "exponent must be at least 1 to preserve convexity, got {exponent}"
            )));
        }
        Ok(Power { inner, exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

impl Cost for Power {
    fn domain(&self) -> &ConstraintSet {
        self.inner.domain()
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        Ok(self.inner.value(x)?.powf(self.exponent))
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        // ∇(f^p) = p f^{p−1} ∇f.
        let p = self.exponent;
        let f = self.inner.value(x)?;
        let g = self.inner.gradient(x)?;
        Ok(g * (p * f.powf(p - 1.0)))
    }

    fn hessian(&self, x: &Tensor) -> Result<Array2<f64>, CostError> {
        // ∇²(f^p) = p(p−1) f^{p−2} ∇f∇fᵀ + p f^{p−1} ∇²f.
        let p = self.exponent;
        let f = self.inner.value(x)?;
        let h = self.inner.hessian(x)?;
        let mut total = h * (p * f.powf(p - 1.0));
        if p != 1.0 {
            let g = tensor::flatten(&self.inner.gradient(x)?);
            let coeff = p * (p - 1.0) * f.powf(p - 2.0);
            for i in 0..g.len() {
                for j in 0..g.len() {
                    total[[i, j]] += coeff * g[i] * g[j];
                }
            }
        }
        Ok(total)
    }

    fn name(&self) -> &'static str {
        "power of a cost"
    }

    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }

    fn has_hessian(&self) -> bool {
        self.inner.has_gradient() && self.inner.has_hessian()
    }

    fn as_quadratic(&self) -> Option<QuadraticForm> {
        if self.exponent == 1.0 {
            self.inner.as_quadratic()
        } else {
            None
        }
    }
}

/// `F·G` over one shared shape. Convexity is the caller's concern; the
/// oracles implement the plain product and chain rules.
#[derive(Debug, Clone)]
pub struct Product {
    left: Arc<dyn Cost>,
    right: Arc<dyn Cost>,
    domain: ConstraintSet,
}

impl Product {
    pub fn new(left: Arc<dyn Cost>, right: Arc<dyn Cost>) -> Result<Self, CostError> {
        let domain = joint_domain(&[left.clone(), right.clone()])?;
        Ok(Product { left, right, domain })
    }
}

impl Cost for Product {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        Ok(self.left.value(&x)? * self.right.value(&x)?)
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let fl = self.left.value(&x)?;
        let fr = self.right.value(&x)?;
        Ok(self.left.gradient(&x)? * fr + self.right.gradient(&x)? * fl)
    }

    fn hessian(&self, x: &Tensor) -> Result<Array2<f64>, CostError> {
        let x = self.domain.check_input(x)?;
        let fl = self.left.value(&x)?;
        let fr = self.right.value(&x)?;
        let gl = tensor::flatten(&self.left.gradient(&x)?);
        let gr = tensor::flatten(&self.right.gradient(&x)?);
        let mut total = self.left.hessian(&x)? * fr + self.right.hessian(&x)? * fl;
        for i in 0..gl.len() {
            for j in 0..gl.len() {
                total[[i, j]] += gl[i] * gr[j] + gr[i] * gl[j];
            }
        }
        Ok(total)
    }

    fn name(&self) -> &'static str {
        "product of costs"
    }

    fn has_gradient(&self) -> bool {
        self.left.has_gradient() && self.right.has_gradient()
    }

    fn has_hessian(&self) -> bool {
        self.has_gradient() && self.left.has_hessian() && self.right.has_hessian()
    }
}

/// Builds `Σ parts`.
pub fn sum(parts: Vec<Arc<dyn Cost>>) -> Result<Sum, CostError> {
    Sum::new(parts)
}

/// Builds `a·F`.
pub fn scale(a: f64, inner: Arc<dyn Cost>) -> Result<Scaled, CostError> {
    Scaled::new(a, inner)
}

/// Builds `F^p`, `p ≥ 1`.
pub fn power(inner: Arc<dyn Cost>, p: f64) -> Result<Power, CostError> {
    Power::new(inner, p)
}

/// Builds `F·G`.
pub fn product(left: Arc<dyn Cost>, right: Arc<dyn Cost>) -> Result<Product, CostError> {
    Product::new(left, right)
}

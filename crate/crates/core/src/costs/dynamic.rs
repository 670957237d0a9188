//! Time-varying costs sampled on a uniform grid.
//!
//! A [`DynamicCost`] is a family `F(·; t)` indexed by continuous time but
//! only ever observed at grid instants: [`DynamicCost::sample`] snaps `t` to
//! the nearest instant and freezes the cost there. Time derivatives are
//! estimated from the sampled history with backward finite differences whose
//! coefficients come from a small Vandermonde solve, so only costs at or
//! before the current instant are touched — matching what an online method
//! can actually know.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use super::algebra;
use super::{Cost, CostError};
use crate::linalg;
use crate::sets::{ConstraintSet, TimeGrid};
use crate::tensor::Tensor;

/// A cost family `F(·; t)` over one fixed shape, observed at grid instants.
///
/// `sample` is the only mandatory oracle beyond the accessors; the pointwise
/// evaluations delegate to the frozen sample, and the `*_time_derivative`
/// methods approximate first derivatives in `t` from past samples.
pub trait DynamicCost: fmt::Debug + Send + Sync {
    fn domain(&self) -> &ConstraintSet;

    fn grid(&self) -> &TimeGrid;

    /// The static cost frozen at the grid instant nearest to `t`. Errors when
    /// `t` falls more than half a sampling interval outside the grid.
    fn sample(&self, t: f64) -> Result<Arc<dyn Cost>, CostError>;

    fn value(&self, x: &Tensor, t: f64) -> Result<f64, CostError> {
        self.sample(t)?.value(x)
    }

    fn gradient(&self, x: &Tensor, t: f64) -> Result<Tensor, CostError> {
        self.sample(t)?.gradient(x)
    }

    fn hessian(&self, x: &Tensor, t: f64) -> Result<Array2<f64>, CostError> {
        self.sample(t)?.hessian(x)
    }

    fn proximal(&self, x: &Tensor, t: f64, penalty: f64) -> Result<Tensor, CostError> {
        self.sample(t)?.proximal(x, penalty)
    }

    /// Backward estimate of `∂F/∂t (x; t)` accurate to `O(ts^order)`, using
    /// the `order + 1` samples at and before `t`.
    fn value_time_derivative(&self, x: &Tensor, t: f64, order: usize) -> Result<f64, CostError> {
        let mut total = 0.0;
        for (c, tj) in backward_nodes(self.grid(), t, order)? {
            total += c * self.value(x, tj)?;
        }
        Ok(total)
    }

    /// Backward estimate of `∂(∇F)/∂t (x; t)`.
    fn gradient_time_derivative(
        &self,
        x: &Tensor,
        t: f64,
        order: usize,
    ) -> Result<Tensor, CostError> {
        let mut total = Tensor::zeros(x.shape());
        for (c, tj) in backward_nodes(self.grid(), t, order)? {
            total = total + self.gradient(x, tj)? * c;
        }
        Ok(total)
    }

    /// Backward estimate of `∂(∇²F)/∂t (x; t)`.
    fn hessian_time_derivative(
        &self,
        x: &Tensor,
        t: f64,
        order: usize,
    ) -> Result<Array2<f64>, CostError> {
        let mut total: Option<Array2<f64>> = None;
        for (c, tj) in backward_nodes(self.grid(), t, order)? {
            let h = self.hessian(x, tj)? * c;
            total = Some(match total {
                None => h,
                Some(acc) => acc + h,
            });
        }
        Ok(total.expect("at least two nodes"))
    }
}

/// Coefficient/time pairs of the backward difference that estimates a first
/// derivative at the grid instant nearest `t` to accuracy `O(ts^order)`:
/// the weights `c_j` on `t_{k−j}`, `j = 0..=order`, solve the Vandermonde
/// moment conditions `Σ_j c_j (−j·ts)^i = δ_{i,1}`.
fn backward_nodes(grid: &TimeGrid, t: f64, order: usize) -> Result<Vec<(f64, f64)>, CostError> {
    if order == 0 {
        return Err(CostError::InvalidParameter(
            "derivative accuracy order must be at least 1".into(),
        ));
    }
    let k = grid.nearest(t)?;
    if k < order {
        return Err(CostError::InsufficientHistory { needed: order + 1, available: k + 1 });
    }
    let n = order + 1;
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] = (-(j as f64) * grid.ts()).powi(i as i32);
        }
    }
    let mut rhs = Array1::zeros(n);
    rhs[1] = 1.0;
    let coeffs = linalg::solve(a, rhs)?;
    Ok((0..n).map(|j| (coeffs[j], grid.time_at(k - j))).collect())
}

/// A dynamic cost given extensionally: one frozen cost per grid instant.
#[derive(Debug, Clone)]
pub struct DiscreteDynamicCost {
    samples: Vec<Arc<dyn Cost>>,
    grid: TimeGrid,
    domain: ConstraintSet,
}

impl DiscreteDynamicCost {
    pub fn new(samples: Vec<Arc<dyn Cost>>, grid: TimeGrid) -> Result<Self, CostError> {
        if samples.len() != grid.num_samples() {
            return Err(CostError::InvalidParameter(format!(
                "got {} samples for a grid of {} instants",
                samples.len(),
                grid.num_samples()
            )));
        }
        let first = samples.first().expect("grids are non-empty");
        for s in &samples[1..] {
            if s.domain().shape() != first.domain().shape() {
                return Err(CostError::InvalidParameter(format!(
                    "samples live on different shapes: {} vs {}",
                    first.domain().shape(),
                    s.domain().shape()
                )));
            }
        }
        let domain = first.domain().clone();
        Ok(DiscreteDynamicCost { samples, grid, domain })
    }
}

impl DynamicCost for DiscreteDynamicCost {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample(&self, t: f64) -> Result<Arc<dyn Cost>, CostError> {
        Ok(self.samples[self.grid.nearest(t)?].clone())
    }
}

/// A dynamic cost given intensionally: a closure freezing the cost at any
/// grid instant.
pub struct CostFamily {
    grid: TimeGrid,
    domain: ConstraintSet,
    make: Box<dyn Fn(f64) -> Arc<dyn Cost> + Send + Sync>,
}

impl CostFamily {
    pub fn new(
        grid: TimeGrid,
        domain: ConstraintSet,
        make: impl Fn(f64) -> Arc<dyn Cost> + Send + Sync + 'static,
    ) -> Self {
        CostFamily { grid, domain, make: Box::new(make) }
    }

    /// A static cost viewed as constant in time over the given grid.
    pub fn constant(cost: Arc<dyn Cost>, grid: TimeGrid) -> Self {
        let domain = cost.domain().clone();
        CostFamily::new(grid, domain, move |_| cost.clone())
    }
}

impl fmt::Debug for CostFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostFamily")
            .field("grid", &self.grid)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl DynamicCost for CostFamily {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample(&self, t: f64) -> Result<Arc<dyn Cost>, CostError> {
        let t = self.grid.nearest_time(t)?;
        Ok((self.make)(t))
    }
}

#[derive(Debug, Clone, Copy)]
enum Combine {
    Sum,
    Scale(f64),
    Power(f64),
    Product,
}

/// A composition of dynamic costs, sampled partwise: freezing the
/// composition at `t` composes the frozen parts.
#[derive(Debug)]
pub struct ComposedDynamic {
    parts: Vec<Arc<dyn DynamicCost>>,
    combine: Combine,
    grid: TimeGrid,
    domain: ConstraintSet,
}

fn joint_dynamic_domain(
    parts: &[Arc<dyn DynamicCost>],
) -> Result<(TimeGrid, ConstraintSet), CostError> {
    let first = parts.first().ok_or_else(|| {
        CostError::InvalidParameter("a composition needs at least one part".into())
    })?;
    for part in &parts[1..] {
        if part.grid() != first.grid() {
            return Err(CostError::InvalidParameter(
                "parts are sampled on different time grids".into(),
            ));
        }
        if part.domain().shape() != first.domain().shape() {
            return Err(CostError::InvalidParameter(format!(
                "parts live on different shapes: {} vs {}",
                first.domain().shape(),
                part.domain().shape()
            )));
        }
    }
    let grid = first.grid().clone();
    let domain = if parts.len() == 1 {
        first.domain().clone()
    } else {
        ConstraintSet::intersection(parts.iter().map(|p| p.domain().clone()).collect())?
    };
    Ok((grid, domain))
}

/// Builds the time-varying sum `Σ F_i(·; t)`.
pub fn sum_dynamic(parts: Vec<Arc<dyn DynamicCost>>) -> Result<ComposedDynamic, CostError> {
    let (grid, domain) = joint_dynamic_domain(&parts)?;
    Ok(ComposedDynamic { parts, combine: Combine::Sum, grid, domain })
}

/// Builds the time-varying scaling `a·F(·; t)`.
pub fn scale_dynamic(a: f64, inner: Arc<dyn DynamicCost>) -> Result<ComposedDynamic, CostError> {
    if !a.is_finite() {
        return Err(CostError::InvalidParameter(format!("scale must be finite, got {a}")));
    }
    let (grid, domain) = joint_dynamic_domain(std::slice::from_ref(&inner))?;
    Ok(ComposedDynamic { parts: vec![inner], combine: Combine::Scale(a), grid, domain })
}

/// Builds the time-varying power `F(·; t)^p`, `p ≥ 1`.
pub fn power_dynamic(inner: Arc<dyn DynamicCost>, p: f64) -> Result<ComposedDynamic, CostError> {
    if !p.is_finite() || p < 1.0 {
        return Err(CostError::InvalidParameter(format!(
            "exponent must be at least 1 to preserve convexity, got {p}"
        )));
    }
    let (grid, domain) = joint_dynamic_domain(std::slice::from_ref(&inner))?;
    Ok(ComposedDynamic { parts: vec![inner], combine: Combine::Power(p), grid, domain })
}

/// Builds the time-varying product `F(·; t)·G(·; t)`.
pub fn product_dynamic(
    left: Arc<dyn DynamicCost>,
    right: Arc<dyn DynamicCost>,
) -> Result<ComposedDynamic, CostError> {
    let (grid, domain) = joint_dynamic_domain(&[left.clone(), right.clone()])?;
    Ok(ComposedDynamic { parts: vec![left, right], combine: Combine::Product, grid, domain })
}

impl DynamicCost for ComposedDynamic {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample(&self, t: f64) -> Result<Arc<dyn Cost>, CostError> {
        match self.combine {
            Combine::Sum => {
                let sampled = self
                    .parts
                    .iter()
                    .map(|p| p.sample(t))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Arc::new(algebra::sum(sampled)?))
            }
            Combine::Scale(a) => Ok(Arc::new(algebra::scale(a, self.parts[0].sample(t)?)?)),
            Combine::Power(p) => Ok(Arc::new(algebra::power(self.parts[0].sample(t)?, p)?)),
            Combine::Product => Ok(Arc::new(algebra::product(
                self.parts[0].sample(t)?,
                self.parts[1].sample(t)?,
            )?)),
        }
    }
}

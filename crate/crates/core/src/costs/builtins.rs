//! The built-in cost catalog: quadratics, ℓ1/ℓ∞ norms, the Huber loss,
//! set indicators, and a 1-D moving-target cost with a softplus barrier.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use super::dynamic::DynamicCost;
use super::{check_penalty, quadratic_proximal, Cost, CostError, QuadraticForm};
use crate::sets::{ConstraintSet, Shape, TimeGrid};
use crate::tensor::{self, Tensor};

/// `½xᵀQx + bᵀx + c` over the row-major flattened variable.
#[derive(Debug, Clone)]
pub struct Quadratic {
    form: QuadraticForm,
    domain: ConstraintSet,
}

impl Quadratic {
    /// Quadratic over flat vectors in `R^n` with `n` taken from `b`.
    pub fn new(q: Array2<f64>, b: Array1<f64>, c: f64) -> Result<Self, CostError> {
        let n = b.len();
        Quadratic::with_shape(q, b, c, Shape::new(vec![n])?)
    }

    /// Quadratic over tensors of an arbitrary shape; `q` and `b` address the
    /// flattened entries.
    pub fn with_shape(
        q: Array2<f64>,
        b: Array1<f64>,
        c: f64,
        shape: Shape,
    ) -> Result<Self, CostError> {
        if b.len() != shape.num_elements() {
            return Err(CostError::InvalidParameter(format!(
                "linear term has {} entries but the domain holds {}",
                b.len(),
                shape.num_elements()
            )));
        }
        let form = QuadraticForm::new(q, b, c)?;
        Ok(Quadratic { form, domain: ConstraintSet::reals(shape) })
    }

    /// The scalar quadratic `½qx² + bx + c`.
    pub fn univariate(q: f64, b: f64, c: f64) -> Self {
        Quadratic {
            form: QuadraticForm {
                q: Array2::from_shape_vec((1, 1), vec![q]).expect("1x1"),
                b: Array1::from_vec(vec![b]),
                c,
            },
            domain: ConstraintSet::reals(Shape::new(vec![1]).expect("positive dim")),
        }
    }

    /// Wraps an already-assembled flattened form over the given shape.
    pub fn from_form(form: QuadraticForm, shape: Shape) -> Result<Self, CostError> {
        if form.dim() != shape.num_elements() {
            return Err(CostError::InvalidParameter(format!(
                "form dimension {} does not match the domain's {} elements",
                form.dim(),
                shape.num_elements()
            )));
        }
        Ok(Quadratic { form, domain: ConstraintSet::reals(shape) })
    }

    pub fn form(&self) -> &QuadraticForm {
        &self.form
    }
}

impl Cost for Quadratic {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        Ok(self.form.value_flat(&tensor::flatten(&x)))
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let g = self.form.gradient_flat(&tensor::flatten(&x));
        Ok(tensor::from_flat(&g, x.shape()))
    }

    fn hessian(&self, x: &Tensor) -> Result<Array2<f64>, CostError> {
        self.domain.check_input(x)?;
        Ok(self.form.q.clone())
    }

    fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, CostError> {
        check_penalty(penalty)?;
        let x = self.domain.check_input(x)?;
        quadratic_proximal(&self.form, &x, penalty)
    }

    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn has_closed_form_prox(&self) -> bool {
        true
    }

    fn as_quadratic(&self) -> Option<QuadraticForm> {
        Some(self.form.clone())
    }
}

/// Weighted ℓ1 norm `w‖x‖₁`. The gradient oracle returns the subgradient
/// `w·sign(x)` (zero at zero entries); the proximal operator is the exact
/// soft threshold.
#[derive(Debug, Clone)]
pub struct Norm1 {
    weight: f64,
    domain: ConstraintSet,
}

impl Norm1 {
    pub fn new(weight: f64, shape: Shape) -> Result<Self, CostError> {
        check_weight(weight)?;
        Ok(Norm1 { weight, domain: ConstraintSet::reals(shape) })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

fn check_weight(weight: f64) -> Result<(), CostError> {
    if weight >= 0.0 && weight.is_finite() {
        Ok(())
    } else {
        Err(CostError::InvalidParameter(format!(
            "norm weight must be non-negative and finite, got {weight}"
        )))
    }
}

impl Cost for Norm1 {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        Ok(self.weight * x.iter().map(|v| v.abs()).sum::<f64>())
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let w = self.weight;
        Ok(x.mapv(|v| if v > 0.0 { w } else if v < 0.0 { -w } else { 0.0 }))
    }

    fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, CostError> {
        check_penalty(penalty)?;
        let x = self.domain.check_input(x)?;
        let tau = penalty * self.weight;
        // v − clamp(v, −τ, τ): exactly v on the inactive branch, exactly 0
        // (including signed zeros) inside the threshold.
        Ok(x.mapv(|v| v - v.clamp(-tau, tau)))
    }

    fn name(&self) -> &'static str {
        "l1 norm"
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn has_closed_form_prox(&self) -> bool {
        true
    }
}

/// Euclidean projection of `x` onto the ℓ1 ball of the given radius, by the
/// sort-and-threshold rule: the largest magnitudes are uniformly shrunk until
/// the budget is met, everything smaller is zeroed.
pub fn project_onto_l1_ball(x: &Tensor, radius: f64) -> Tensor {
    debug_assert!(radius > 0.0);
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        return x.clone();
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite magnitudes"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (j as f64 + 1.0);
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    x.mapv(|v| v.signum() * (v.abs() - theta).max(0.0))
}

/// Weighted ℓ∞ norm `w·max|x_i|`. The proximal operator shrinks toward the
/// ℓ1 ball: `prox(x) = x − proj_{‖·‖₁ ≤ ρw}(x)`.
#[derive(Debug, Clone)]
pub struct NormInf {
    weight: f64,
    domain: ConstraintSet,
}

impl NormInf {
    pub fn new(weight: f64, shape: Shape) -> Result<Self, CostError> {
        check_weight(weight)?;
        Ok(NormInf { weight, domain: ConstraintSet::reals(shape) })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl Cost for NormInf {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        Ok(self.weight * x.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        // Subgradient: weight on (the first, in row-major order) entry of
        // maximal magnitude, signed; zero tensor at the origin.
        let x = self.domain.check_input(x)?;
        let mut flat = tensor::flatten(&Tensor::zeros(x.shape()));
        let mut best = 0.0_f64;
        for (i, &v) in tensor::flatten(&x).iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                flat.fill(0.0);
                flat[i] = self.weight * v.signum();
            }
        }
        Ok(tensor::from_flat(&flat, x.shape()))
    }

    fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, CostError> {
        check_penalty(penalty)?;
        let x = self.domain.check_input(x)?;
        let tau = penalty * self.weight;
        if tau == 0.0 {
            return Ok(x);
        }
        Ok(&x - &project_onto_l1_ball(&x, tau))
    }

    fn name(&self) -> &'static str {
        "l-infinity norm"
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn has_closed_form_prox(&self) -> bool {
        true
    }
}

/// Elementwise Huber loss with threshold `δ`: quadratic `v²/2` inside
/// `[−δ, δ]`, linear `δ(|v| − δ/2)` outside, summed over entries.
#[derive(Debug, Clone)]
pub struct Huber {
    delta: f64,
    domain: ConstraintSet,
}

impl Huber {
    pub fn new(delta: f64, shape: Shape) -> Result<Self, CostError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(CostError::InvalidParameter(format!(
                "huber threshold must be positive and finite, got {delta}"
            )));
        }
        Ok(Huber { delta, domain: ConstraintSet::reals(shape) })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Cost for Huber {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        let d = self.delta;
        Ok(x.iter()
            .map(|v| if v.abs() <= d { 0.5 * v * v } else { d * (v.abs() - 0.5 * d) })
            .sum())
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let d = self.delta;
        Ok(x.mapv(|v| v.clamp(-d, d)))
    }

    fn hessian(&self, x: &Tensor) -> Result<Array2<f64>, CostError> {
        let x = self.domain.check_input(x)?;
        let d = self.delta;
        let diag = tensor::flatten(&x).mapv(|v| if v.abs() <= d { 1.0 } else { 0.0 });
        Ok(Array2::from_diag(&diag))
    }

    fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, CostError> {
        check_penalty(penalty)?;
        let x = self.domain.check_input(x)?;
        let d = self.delta;
        Ok(x.mapv(|v| {
            if v.abs() <= d * (1.0 + penalty) {
                v / (1.0 + penalty)
            } else {
                v - penalty * d * v.signum()
            }
        }))
    }

    fn name(&self) -> &'static str {
        "huber loss"
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn has_closed_form_prox(&self) -> bool {
        true
    }
}

/// Indicator of a constraint set: `0` on the set (within the default
/// membership tolerance), `+∞` outside. Its proximal operator is the set
/// projection for any penalty; the gradient is deliberately unavailable.
#[derive(Debug, Clone)]
pub struct Indicator {
    set: ConstraintSet,
    domain: ConstraintSet,
}

impl Indicator {
    pub fn new(set: ConstraintSet) -> Self {
        let domain = ConstraintSet::reals(set.shape().clone());
        Indicator { set, domain }
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }
}

impl Cost for Indicator {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        Ok(if self.set.member(&x)? { 0.0 } else { f64::INFINITY })
    }

    fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, CostError> {
        check_penalty(penalty)?;
        let x = self.domain.check_input(x)?;
        Ok(self.set.project(&x)?)
    }

    fn name(&self) -> &'static str {
        "set indicator"
    }

    fn has_closed_form_prox(&self) -> bool {
        true
    }
}

/// `log(1 + e^u)` without overflow.
pub(crate) fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `1 / (1 + e^{−u})` without overflow.
pub(crate) fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// The scalar moving-target cost
/// `F(x; t) = (x − cos(ωt))²/2 + ε·log(1 + e^{φx})`:
/// a quadratic pull toward a slowly rotating cosine target plus a smooth
/// softplus barrier that penalizes positive excursions.
#[derive(Debug, Clone)]
pub struct CosineSoftplus {
    omega: f64,
    eps: f64,
    phi: f64,
    grid: TimeGrid,
    domain: ConstraintSet,
}

impl CosineSoftplus {
    pub fn new(omega: f64, eps: f64, phi: f64, grid: TimeGrid) -> Result<Self, CostError> {
        for (name, v) in [("omega", omega), ("eps", eps), ("phi", phi)] {
            if !v.is_finite() {
                return Err(CostError::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        let domain = ConstraintSet::reals(Shape::new(vec![1])?);
        Ok(CosineSoftplus { omega, eps, phi, grid, domain })
    }

    /// The frozen cost at target `cos(ω t)`.
    fn frozen(&self, t: f64) -> CosineSoftplusSample {
        CosineSoftplusSample {
            target: (self.omega * t).cos(),
            eps: self.eps,
            phi: self.phi,
            domain: self.domain.clone(),
        }
    }
}

impl DynamicCost for CosineSoftplus {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample(&self, t: f64) -> Result<Arc<dyn Cost>, CostError> {
        let t = self.grid.nearest_time(t)?;
        Ok(Arc::new(self.frozen(t)))
    }
}

/// A [`CosineSoftplus`] frozen at one sampling instant.
#[derive(Debug, Clone)]
pub struct CosineSoftplusSample {
    target: f64,
    eps: f64,
    phi: f64,
    domain: ConstraintSet,
}

impl CosineSoftplusSample {
    pub fn target(&self) -> f64 {
        self.target
    }
}

impl Cost for CosineSoftplusSample {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        let v = x[[0]];
        let d = v - self.target;
        Ok(0.5 * d * d + self.eps * softplus(self.phi * v))
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let v = x[[0]];
        Ok(tensor::vector(&[v - self.target + self.eps * self.phi * sigmoid(self.phi * v)]))
    }

    fn hessian(&self, x: &Tensor) -> Result<Array2<f64>, CostError> {
        let x = self.domain.check_input(x)?;
        let s = sigmoid(self.phi * x[[0]]);
        Ok(Array2::from_shape_vec((1, 1), vec![1.0 + self.eps * self.phi * self.phi * s * (1.0 - s)])
            .expect("1x1"))
    }

    fn name(&self) -> &'static str {
        "cosine-target softplus cost"
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn has_hessian(&self) -> bool {
        true
    }
}

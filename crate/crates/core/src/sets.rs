//! Constraint sets and the sampling-time grid.
//!
//! A [`ConstraintSet`] couples a tensor [`Shape`] with a feasible region and
//! exposes three operations: membership testing, Euclidean projection, and
//! input normalization ([`ConstraintSet::check_input`]). Sets compose by
//! intersection and by affine rescaling, so constraints like "a box shifted
//! into the positive orthant intersected with a ball" are built from the
//! closed-form primitives.
//!
//! [`TimeGrid`] is the discrete clock of the crate: a time-varying cost is
//! only ever observed at the grid instants `t_0 + k*t_s`, and continuous
//! query times snap to the nearest instant.

use std::fmt;

use thiserror::Error;

use crate::tensor::{self, Tensor};

/// Default tolerance for membership tests when a caller has no opinion.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

/// Feasibility tolerance of the alternating-projections loop.
const PROJECTION_SWEEP_TOL: f64 = 1e-9;
/// Sweep cap of the alternating-projections loop.
const PROJECTION_MAX_SWEEPS: usize = 1000;

#[derive(Debug, Error)]
pub enum SetError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("element count mismatch: set holds {expected} entries, input has {got}")]
    ElementCount { expected: usize, got: usize },
    #[error("invalid set parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "alternating projections did not reach tolerance {tol} within {sweeps} sweeps \
         (the intersection may be empty)"
    )]
    ProjectionDidNotConverge { tol: f64, sweeps: usize },
    #[error("time {t} lies outside the grid range [{lo}, {hi}]")]
    TimeOutsideGrid { t: f64, lo: f64, hi: f64 },
    #[error("invalid grid parameter: {0}")]
    InvalidGrid(String),
}

/// Ordered list of positive dimensions, e.g. `[3]` for vectors in R^3 or
/// `[2, 2]` for 2x2 matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self, SetError> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(SetError::InvalidParameter("shape needs at least one dimension".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(SetError::InvalidParameter(format!(
                "shape dimensions must be positive, got {dims:?}"
            )));
        }
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn num_elements(&self) -> usize {
        self.0.iter().product()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", dims.join("x"))
    }
}

#[derive(Debug, Clone)]
enum SetKind {
    FullSpace,
    Ball { center: Tensor, radius: f64 },
    Box { lower: Tensor, upper: Tensor },
    /// `{ x : <normal, x> <= offset }`, with the squared normal norm cached.
    Halfspace { normal: Tensor, offset: f64, normal_norm_sq: f64 },
    Intersection { members: Vec<ConstraintSet> },
    /// `scale * base + shift`, i.e. `x` is feasible iff `(x - shift)/scale`
    /// lies in `base`.
    Transformed { base: Box<ConstraintSet>, scale: f64, shift: Tensor },
}

/// A feasible region over tensors of one fixed shape.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    shape: Shape,
    kind: SetKind,
}

fn require_finite(name: &str, x: &Tensor) -> Result<(), SetError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SetError::InvalidParameter(format!("{name} must have finite entries")))
    }
}

impl ConstraintSet {
    /// The unconstrained set: every tensor of the given shape is feasible.
    pub fn reals(shape: Shape) -> Self {
        ConstraintSet { shape, kind: SetKind::FullSpace }
    }

    /// Euclidean ball of the given center and positive radius.
    pub fn ball(center: Tensor, radius: f64) -> Result<Self, SetError> {
        require_finite("ball center", &center)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(SetError::InvalidParameter(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        let shape = Shape::new(center.shape().to_vec())?;
        Ok(ConstraintSet { shape, kind: SetKind::Ball { center, radius } })
    }

    /// Axis-aligned box `{ x : lower <= x <= upper }` elementwise. Bounds may
    /// be infinite; each lower bound must not exceed its upper bound.
    pub fn box_bounds(lower: Tensor, upper: Tensor) -> Result<Self, SetError> {
        if lower.shape() != upper.shape() {
            return Err(SetError::ShapeMismatch {
                expected: lower.shape().to_vec(),
                got: upper.shape().to_vec(),
            });
        }
        for (l, u) in lower.iter().zip(upper.iter()) {
            if !(l <= u) {
                return Err(SetError::InvalidParameter(format!(
                    "box bounds must satisfy lower <= upper, got [{l}, {u}]"
                )));
            }
        }
        let shape = Shape::new(lower.shape().to_vec())?;
        Ok(ConstraintSet { shape, kind: SetKind::Box { lower, upper } })
    }

    /// Halfspace `{ x : <normal, x> <= offset }` with a nonzero normal.
    pub fn halfspace(normal: Tensor, offset: f64) -> Result<Self, SetError> {
        require_finite("halfspace normal", &normal)?;
        if !offset.is_finite() {
            return Err(SetError::InvalidParameter(format!(
                "halfspace offset must be finite, got {offset}"
            )));
        }
        let normal_norm_sq = tensor::dot(&normal, &normal);
        if normal_norm_sq == 0.0 {
            return Err(SetError::InvalidParameter("halfspace normal must be nonzero".into()));
        }
        let shape = Shape::new(normal.shape().to_vec())?;
        Ok(ConstraintSet { shape, kind: SetKind::Halfspace { normal, offset, normal_norm_sq } })
    }

    /// Intersection of one or more sets over the same shape.
    pub fn intersection(members: Vec<ConstraintSet>) -> Result<Self, SetError> {
        let first = members
            .first()
            .ok_or_else(|| SetError::InvalidParameter("intersection needs at least one member".into()))?;
        let shape = first.shape.clone();
        for m in &members {
            if m.shape != shape {
                return Err(SetError::ShapeMismatch {
                    expected: shape.dims().to_vec(),
                    got: m.shape.dims().to_vec(),
                });
            }
        }
        Ok(ConstraintSet { shape, kind: SetKind::Intersection { members } })
    }

    /// The affinely rescaled set `scale * self + shift`: `x` is feasible in
    /// the result iff `(x - shift)/scale` is feasible in `self`.
    pub fn transform(self, scale: f64, shift: Tensor) -> Result<Self, SetError> {
        if scale == 0.0 || !scale.is_finite() {
            return Err(SetError::InvalidParameter(format!(
                "transform scale must be nonzero and finite, got {scale}"
            )));
        }
        require_finite("transform shift", &shift)?;
        if shift.shape() != self.shape.dims() {
            return Err(SetError::ShapeMismatch {
                expected: self.shape.dims().to_vec(),
                got: shift.shape().to_vec(),
            });
        }
        let shape = self.shape.clone();
        Ok(ConstraintSet { shape, kind: SetKind::Transformed { base: Box::new(self), scale, shift } })
    }

    /// Shorthand for [`transform`](Self::transform) with a zero shift.
    pub fn scaled(self, scale: f64) -> Result<Self, SetError> {
        let shift = tensor::zeros(self.shape.dims());
        self.transform(scale, shift)
    }

    /// Shorthand for [`transform`](Self::transform) with unit scale.
    pub fn translated(self, shift: Tensor) -> Result<Self, SetError> {
        self.transform(1.0, shift)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Normalizes an input to this set's shape: exact-shape inputs pass
    /// through, inputs with the right element count are reshaped row-major,
    /// anything else is rejected.
    pub fn check_input(&self, x: &Tensor) -> Result<Tensor, SetError> {
        if x.shape() == self.shape.dims() {
            return Ok(x.clone());
        }
        tensor::reshape_row_major(x, self.shape.dims()).ok_or(SetError::ElementCount {
            expected: self.shape.num_elements(),
            got: x.len(),
        })
    }

    /// Whether `x` lies within Euclidean distance `tol` of the set. For
    /// intersections the test is member-wise: `x` must be within `tol` of
    /// every member.
    pub fn contains(&self, x: &Tensor, tol: f64) -> Result<bool, SetError> {
        if !(tol >= 0.0) {
            return Err(SetError::InvalidParameter(format!(
                "membership tolerance must be non-negative, got {tol}"
            )));
        }
        let x = self.check_input(x)?;
        self.contains_checked(&x, tol)
    }

    /// [`contains`](Self::contains) with the default tolerance of `1e-9`.
    pub fn member(&self, x: &Tensor) -> Result<bool, SetError> {
        self.contains(x, DEFAULT_MEMBERSHIP_TOL)
    }

    fn contains_checked(&self, x: &Tensor, tol: f64) -> Result<bool, SetError> {
        match &self.kind {
            SetKind::FullSpace => Ok(true),
            SetKind::Ball { .. } | SetKind::Box { .. } | SetKind::Halfspace { .. } => {
                let p = self.project_checked(x)?;
                Ok(tensor::norm(&(&p - x)) <= tol)
            }
            SetKind::Intersection { members } => {
                for m in members {
                    if !m.contains_checked(x, tol)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            SetKind::Transformed { base, scale, shift } => {
                let pulled = (x - shift) / *scale;
                base.contains_checked(&pulled, tol / scale.abs())
            }
        }
    }

    /// Euclidean projection of `x` onto the set. Primitive sets project in
    /// closed form; intersections run cyclic alternating projections until
    /// the iterate is within `1e-9` of every member (up to 1000 sweeps), so
    /// the result is a feasibility point rather than the exact nearest point.
    pub fn project(&self, x: &Tensor) -> Result<Tensor, SetError> {
        let x = self.check_input(x)?;
        self.project_checked(&x)
    }

    fn project_checked(&self, x: &Tensor) -> Result<Tensor, SetError> {
        match &self.kind {
            SetKind::FullSpace => Ok(x.clone()),
            SetKind::Ball { center, radius } => {
                let offset = x - center;
                let dist = tensor::norm(&offset);
                if dist <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center + &(&offset * (*radius / dist)))
                }
            }
            SetKind::Box { lower, upper } => {
                let mut out = x.clone();
                ndarray::Zip::from(&mut out).and(lower).and(upper).for_each(|v, &l, &u| {
                    *v = v.clamp(l, u);
                });
                Ok(out)
            }
            SetKind::Halfspace { normal, offset, normal_norm_sq } => {
                let violation = tensor::dot(normal, x) - offset;
                if violation <= 0.0 {
                    Ok(x.clone())
                } else {
                    Ok(x - &(normal * (violation / normal_norm_sq)))
                }
            }
            SetKind::Intersection { members } => {
                let mut y = x.clone();
                for _ in 0..PROJECTION_MAX_SWEEPS {
                    for m in members {
                        y = m.project_checked(&y)?;
                    }
                    let worst = members
                        .iter()
                        .map(|m| m.project_checked(&y).map(|p| tensor::norm(&(&p - &y))))
                        .collect::<Result<Vec<f64>, SetError>>()?
                        .into_iter()
                        .fold(0.0_f64, f64::max);
                    if worst <= PROJECTION_SWEEP_TOL {
                        return Ok(y);
                    }
                }
                Err(SetError::ProjectionDidNotConverge {
                    tol: PROJECTION_SWEEP_TOL,
                    sweeps: PROJECTION_MAX_SWEEPS,
                })
            }
            SetKind::Transformed { base, scale, shift } => {
                let pulled = (x - shift) / *scale;
                let projected = base.project_checked(&pulled)?;
                Ok(&(&projected * *scale) + shift)
            }
        }
    }
}

/// Uniformly spaced sampling instants `t_0 + k*t_s` for `k < num_samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    ts: f64,
    num_samples: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, ts: f64, num_samples: usize) -> Result<Self, SetError> {
        if !t0.is_finite() {
            return Err(SetError::InvalidGrid(format!("origin must be finite, got {t0}")));
        }
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(SetError::InvalidGrid(format!(
                "sampling time must be positive and finite, got {ts}"
            )));
        }
        if num_samples == 0 {
            return Err(SetError::InvalidGrid("grid needs at least one sample".into()));
        }
        Ok(TimeGrid { t0, ts, num_samples })
    }

    /// Grid covering `[t0, t_end)` with spacing `ts`, i.e.
    /// `round((t_end - t0)/ts)` samples. The endpoint itself is excluded,
    /// matching "simulate until `t_end`" loops.
    pub fn from_duration(t0: f64, ts: f64, t_end: f64) -> Result<Self, SetError> {
        if !(t_end > t0) {
            return Err(SetError::InvalidGrid(format!(
                "end time {t_end} must exceed origin {t0}"
            )));
        }
        let num_samples = ((t_end - t0) / ts).round() as usize;
        TimeGrid::new(t0, ts, num_samples.max(1))
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// The sampling instant `t_0 + k*t_s`.
    pub fn time_at(&self, k: usize) -> f64 {
        debug_assert!(k < self.num_samples);
        self.t0 + k as f64 * self.ts
    }

    /// Index of the grid instant nearest to `t`; exact midpoints resolve to
    /// the smaller index. Errors when `t` is more than half a sampling
    /// interval outside the grid.
    pub fn nearest(&self, t: f64) -> Result<usize, SetError> {
        let u = (t - self.t0) / self.ts;
        let upper = (self.num_samples - 1) as f64 + 0.5;
        if !(u >= -0.5) || u > upper {
            return Err(SetError::TimeOutsideGrid {
                t,
                lo: self.t0 - 0.5 * self.ts,
                hi: self.t0 + upper * self.ts,
            });
        }
        if u <= 0.0 {
            return Ok(0);
        }
        let base = u.floor();
        let k = if u - base <= 0.5 { base } else { base + 1.0 } as usize;
        Ok(k.min(self.num_samples - 1))
    }

    /// The grid instant nearest to `t`.
    pub fn nearest_time(&self, t: f64) -> Result<f64, SetError> {
        Ok(self.time_at(self.nearest(t)?))
    }
}

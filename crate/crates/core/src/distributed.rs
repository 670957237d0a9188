//! Costs split across agents, and solvers that interleave local oracle steps
//! with message passing over a [`Network`].
//!
//! A [`SeparableCost`] is `F(x; t) = Σᵢ Fᵢ(xᵢ; t)` with one summand per
//! agent. Stacked evaluations put the agent index in the last dimension, so a
//! state tensor of shape `[d, N]` carries `N` agents with `d`-dimensional
//! local variables; [`stack_states`] and [`unstack_states`] convert between
//! that layout and a per-agent list.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::collections::HashMap;
use std::sync::Arc;

use crate::costs::{Cost, CostError, DynamicCost};
use crate::networks::{Network, NetworkError};
use crate::sets::{ConstraintSet, SetError, Shape, TimeGrid};
use crate::solvers::dual::argmin_augmented;
use crate::solvers::{InnerSolve, SolverError, DIVERGENCE_LIMIT};
use crate::tensor::{self, Tensor};

#[derive(Error, Debug)]
pub enum DistributedError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("state mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl From<SetError> for DistributedError {
    fn from(e: SetError) -> Self {
        DistributedError::Cost(CostError::Set(e))
    }
}

/// Joins per-agent tensors of one common shape into the stacked layout with
/// the agent index in a new last dimension.
pub fn stack_states(parts: &[Tensor]) -> Result<Tensor, DistributedError> {
    if parts.is_empty() {
        return Err(DistributedError::Shape("no agent states to stack".into()));
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::stack(Axis(parts[0].ndim()), &views)
        .map_err(|e| DistributedError::Shape(e.to_string()))
}

/// Splits a stacked tensor along its last dimension into per-agent tensors.
pub fn unstack_states(x: &Tensor) -> Vec<Tensor> {
    let last = Axis(x.ndim() - 1);
    (0..x.len_of(last)).map(|i| x.index_axis(last, i).to_owned()).collect()
}

/// A cost that splits into one summand per agent, `F(x; t) = Σᵢ Fᵢ(xᵢ; t)`,
/// with every summand sharing one local shape and one sampling grid.
#[derive(Debug, Clone)]
pub struct SeparableCost {
    locals: Vec<Arc<dyn DynamicCost>>,
    grid: TimeGrid,
    domain: ConstraintSet,
}

impl SeparableCost {
    pub fn new(locals: Vec<Arc<dyn DynamicCost>>) -> Result<Self, CostError> {
        let first = locals.first().ok_or_else(|| {
            CostError::InvalidParameter("a separable cost needs at least one agent".into())
        })?;
        let shape = first.domain().shape().clone();
        let grid = first.grid().clone();
        for (i, local) in locals.iter().enumerate() {
            if local.domain().shape() != &shape {
                return Err(CostError::InvalidParameter(format!(
                    "agent {i} has shape {}, expected {shape}",
                    local.domain().shape()
                )));
            }
            if local.grid() != &grid {
                return Err(CostError::InvalidParameter(format!(
                    "agent {i} samples on a different time grid"
                )));
            }
        }
        let mut dims = shape.dims().to_vec();
        dims.push(locals.len());
        let domain = ConstraintSet::reals(Shape::new(dims)?);
        Ok(SeparableCost { locals, grid, domain })
    }

    pub fn n_agents(&self) -> usize {
        self.locals.len()
    }

    pub fn locals(&self) -> &[Arc<dyn DynamicCost>] {
        &self.locals
    }

    pub fn local(&self, agent: usize) -> Result<&Arc<dyn DynamicCost>, CostError> {
        self.locals.get(agent).ok_or_else(|| self.agent_range_error(agent))
    }

    /// Shape of one agent's local variable.
    pub fn agent_shape(&self) -> &Shape {
        self.locals[0].domain().shape()
    }

    fn agent_range_error(&self, agent: usize) -> CostError {
        CostError::InvalidParameter(format!(
            "agent index {agent} out of range for {} agents",
            self.n_agents()
        ))
    }

    /// Every summand frozen at sampling instant `t`.
    pub fn sample_locals(&self, t: f64) -> Result<Vec<Arc<dyn Cost>>, CostError> {
        self.locals.iter().map(|local| local.sample(t)).collect()
    }

    /// The row `[F₁(x₁; t), …, F_N(x_N; t)]` of per-agent values.
    pub fn values(&self, x: &Tensor, t: f64) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let parts = unstack_by_axis(&x);
        let mut out = Vec::with_capacity(self.n_agents());
        for (local, part) in self.locals.iter().zip(&parts) {
            out.push(local.value(part, t)?);
        }
        Ok(tensor::vector(&out))
    }

    /// Per-agent gradients stacked along the last dimension.
    pub fn stacked_gradient(&self, x: &Tensor, t: f64) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let parts = unstack_by_axis(&x);
        let mut grads = Vec::with_capacity(self.n_agents());
        for (local, part) in self.locals.iter().zip(&parts) {
            grads.push(local.gradient(part, t)?);
        }
        let views: Vec<_> = grads.iter().map(|g| g.view()).collect();
        ndarray::stack(Axis(grads[0].ndim()), &views)
            .map_err(|e| CostError::InvalidParameter(e.to_string()))
    }

    /// One agent's value at its slice of the stacked state.
    pub fn agent_value(&self, agent: usize, x: &Tensor, t: f64) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        let local = self.local(agent)?;
        local.value(&x.index_axis(Axis(x.ndim() - 1), agent).to_owned(), t)
    }

    /// One agent's gradient at its slice of the stacked state.
    pub fn agent_gradient(&self, agent: usize, x: &Tensor, t: f64) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let local = self.local(agent)?;
        local.gradient(&x.index_axis(Axis(x.ndim() - 1), agent).to_owned(), t)
    }
}

fn unstack_by_axis(x: &Tensor) -> Vec<Tensor> {
    let last = Axis(x.ndim() - 1);
    (0..x.len_of(last)).map(|i| x.index_axis(last, i).to_owned()).collect()
}

impl DynamicCost for SeparableCost {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample(&self, t: f64) -> Result<Arc<dyn Cost>, CostError> {
        Ok(Arc::new(SeparableSample {
            parts: self.sample_locals(t)?,
            domain: self.domain.clone(),
        }))
    }
}

/// A separable cost frozen at one sampling instant: the sum of the per-agent
/// samples, over the stacked state layout.
#[derive(Debug)]
pub struct SeparableSample {
    parts: Vec<Arc<dyn Cost>>,
    domain: ConstraintSet,
}

impl Cost for SeparableSample {
    fn domain(&self) -> &ConstraintSet {
        &self.domain
    }

    fn value(&self, x: &Tensor) -> Result<f64, CostError> {
        let x = self.domain.check_input(x)?;
        let mut total = 0.0;
        for (i, part) in self.parts.iter().enumerate() {
            total += part.value(&x.index_axis(Axis(x.ndim() - 1), i).to_owned())?;
        }
        Ok(total)
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor, CostError> {
        let x = self.domain.check_input(x)?;
        let mut grads = Vec::with_capacity(self.parts.len());
        for (i, part) in self.parts.iter().enumerate() {
            grads.push(part.gradient(&x.index_axis(Axis(x.ndim() - 1), i).to_owned())?);
        }
        let views: Vec<_> = grads.iter().map(|g| g.view()).collect();
        ndarray::stack(Axis(grads[0].ndim()), &views)
            .map_err(|e| CostError::InvalidParameter(e.to_string()))
    }

    fn hessian(&self, x: &Tensor) -> Result<Array2<f64>, CostError> {
        let x = self.domain.check_input(x)?;
        let n_agents = self.parts.len();
        let agent_len = x.len() / n_agents;
        let mut big = Array2::zeros((x.len(), x.len()));
        for (i, part) in self.parts.iter().enumerate() {
            let h = part.hessian(&x.index_axis(Axis(x.ndim() - 1), i).to_owned())?;
            // Row-major flattening of [.., N] interleaves agents, so block
            // (p, q) of agent i lands at stride-N positions.
            for p in 0..agent_len {
                for q in 0..agent_len {
                    big[[p * n_agents + i, q * n_agents + i]] = h[[p, q]];
                }
            }
        }
        Ok(big)
    }

    fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, CostError> {
        // The squared distance splits along agents, so the prox is the stack
        // of per-agent proxes.
        let x = self.domain.check_input(x)?;
        let mut outs = Vec::with_capacity(self.parts.len());
        for (i, part) in self.parts.iter().enumerate() {
            outs.push(part.proximal(&x.index_axis(Axis(x.ndim() - 1), i).to_owned(), penalty)?);
        }
        let views: Vec<_> = outs.iter().map(|o| o.view()).collect();
        ndarray::stack(Axis(outs[0].ndim()), &views)
            .map_err(|e| CostError::InvalidParameter(e.to_string()))
    }

    fn has_gradient(&self) -> bool {
        self.parts.iter().all(|p| p.has_gradient())
    }

    fn has_hessian(&self) -> bool {
        self.parts.iter().all(|p| p.has_hessian())
    }

    fn has_closed_form_prox(&self) -> bool {
        self.parts.iter().all(|p| p.has_closed_form_prox())
    }

    fn name(&self) -> &'static str {
        "this separable cost"
    }
}

/// Step-size rule α_k for distributed iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// The same step every iteration.
    Fixed { step: f64 },
    /// `α_k = base / (k+1)^gamma` with `gamma ∈ [0.5, 1]`.
    Diminishing { base: f64, gamma: f64 },
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Fixed { step } => step,
            StepSchedule::Diminishing { base, gamma } => base / ((k + 1) as f64).powf(gamma),
        }
    }

    fn validate(&self) -> Result<(), DistributedError> {
        match *self {
            StepSchedule::Fixed { step } => {
                if !step.is_finite() || step < 0.0 {
                    return Err(DistributedError::InvalidConfig(format!(
                        "fixed step must be finite and nonnegative, got {step}"
                    )));
                }
            }
            StepSchedule::Diminishing { base, gamma } => {
                if !base.is_finite() || base < 0.0 {
                    return Err(DistributedError::InvalidConfig(format!(
                        "diminishing base must be finite and nonnegative, got {base}"
                    )));
                }
                if !(0.5..=1.0).contains(&gamma) {
                    return Err(DistributedError::InvalidConfig(format!(
                        "diminishing exponent must lie in [0.5, 1], got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Budget and step rule for one distributed solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributedConfig {
    pub schedule: StepSchedule,
    pub num_iter: usize,
    /// Budget for local argmins that have no closed form.
    #[serde(default)]
    pub inner: InnerSolve,
}

impl DistributedConfig {
    pub fn fixed(step: f64, num_iter: usize) -> Self {
        DistributedConfig {
            schedule: StepSchedule::Fixed { step },
            num_iter,
            inner: InnerSolve::default(),
        }
    }

    pub fn validate(&self) -> Result<(), DistributedError> {
        self.schedule.validate()?;
        if self.inner.max_iter == 0 {
            return Err(DistributedError::InvalidConfig(
                "inner solves need at least one iteration".into(),
            ));
        }
        Ok(())
    }
}

fn check_state(x: &Tensor) -> Result<(), DistributedError> {
    let n = tensor::norm(x);
    if n.is_finite() && n <= DIVERGENCE_LIMIT {
        Ok(())
    } else {
        Err(DistributedError::Solver(SolverError::Diverged { limit: DIVERGENCE_LIMIT }))
    }
}

/// Canonicalizes the stacked start and checks it against the network size.
fn canonical_start(
    f: &SeparableCost,
    net: &Network,
    x0: &Tensor,
) -> Result<Tensor, DistributedError> {
    if net.graph().n() != f.n_agents() {
        return Err(DistributedError::Shape(format!(
            "network has {} agents but the cost has {}",
            net.graph().n(),
            f.n_agents()
        )));
    }
    Ok(f.domain().check_input(x0)?)
}

/// Decentralized gradient descent: mix through the network, then take a local
/// gradient step evaluated at the pre-mix state.
pub fn dgd(
    f: &SeparableCost,
    t: f64,
    net: &mut Network,
    w: &Array2<f64>,
    x0: &Tensor,
    cfg: &DistributedConfig,
) -> Result<Tensor, DistributedError> {
    cfg.validate()?;
    let x = canonical_start(f, net, x0)?;
    let locals = f.sample_locals(t)?;
    let mut states = unstack_states(&x);
    for k in 0..cfg.num_iter {
        let step = cfg.schedule.at(k);
        let mixed = net.consensus_round(&states, w)?;
        for (i, local) in locals.iter().enumerate() {
            let grad = local.gradient(&states[i])?;
            states[i] = &mixed[i] - &(grad * step);
            check_state(&states[i])?;
        }
    }
    stack_states(&states)
}

/// Decentralized proximal gradient: mix, local gradient step on the smooth
/// part, then a local prox on the nonsmooth part with the same step.
pub fn dpgm(
    smooth: &SeparableCost,
    prox_part: &SeparableCost,
    t: f64,
    net: &mut Network,
    w: &Array2<f64>,
    x0: &Tensor,
    cfg: &DistributedConfig,
) -> Result<Tensor, DistributedError> {
    cfg.validate()?;
    if prox_part.n_agents() != smooth.n_agents() {
        return Err(DistributedError::Shape(format!(
            "smooth part has {} agents, prox part has {}",
            smooth.n_agents(),
            prox_part.n_agents()
        )));
    }
    let x = canonical_start(smooth, net, x0)?;
    let locals_f = smooth.sample_locals(t)?;
    let locals_g = prox_part.sample_locals(t)?;
    let mut states = unstack_states(&x);
    for k in 0..cfg.num_iter {
        let step = cfg.schedule.at(k);
        let mixed = net.consensus_round(&states, w)?;
        for i in 0..states.len() {
            let grad = locals_f[i].gradient(&states[i])?;
            states[i] = locals_g[i].proximal(&(&mixed[i] - &(grad * step)), step)?;
            check_state(&states[i])?;
        }
    }
    stack_states(&states)
}

/// Iteration state of [`gradient_tracking`]: the stacked agent states and the
/// stacked gradient trackers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingState {
    pub x: Tensor,
    pub trackers: Tensor,
}

/// Gradient tracking from a cold start: trackers begin at the local
/// gradients.
pub fn gradient_tracking(
    f: &SeparableCost,
    t: f64,
    net: &mut Network,
    w: &Array2<f64>,
    x0: &Tensor,
    cfg: &DistributedConfig,
) -> Result<TrackingState, DistributedError> {
    let x = canonical_start(f, net, x0)?;
    let trackers = f.stacked_gradient(&x, t)?;
    gradient_tracking_from(f, t, net, w, &TrackingState { x, trackers }, cfg)
}

/// Gradient tracking resumed from an existing state. Each iteration mixes the
/// states, steps against the trackers, mixes the trackers, and refreshes them
/// with the local gradient change, keeping the tracker sum aligned with the
/// gradient sum.
pub fn gradient_tracking_from(
    f: &SeparableCost,
    t: f64,
    net: &mut Network,
    w: &Array2<f64>,
    state: &TrackingState,
    cfg: &DistributedConfig,
) -> Result<TrackingState, DistributedError> {
    cfg.validate()?;
    let x = canonical_start(f, net, &state.x)?;
    let y = f.domain().check_input(&state.trackers)?;
    let locals = f.sample_locals(t)?;
    let mut states = unstack_states(&x);
    let mut trackers = unstack_states(&y);
    let mut grads = Vec::with_capacity(states.len());
    for (local, s) in locals.iter().zip(&states) {
        grads.push(local.gradient(s)?);
    }
    for k in 0..cfg.num_iter {
        let step = cfg.schedule.at(k);
        let mixed_x = net.consensus_round(&states, w)?;
        for i in 0..states.len() {
            states[i] = &mixed_x[i] - &(&trackers[i] * step);
            check_state(&states[i])?;
        }
        let mixed_y = net.consensus_round(&trackers, w)?;
        for (i, local) in locals.iter().enumerate() {
            let fresh = local.gradient(&states[i])?;
            trackers[i] = &mixed_y[i] + &(&fresh - &grads[i]);
            grads[i] = fresh;
            check_state(&trackers[i])?;
        }
    }
    Ok(TrackingState { x: stack_states(&states)?, trackers: stack_states(&trackers)? })
}

/// Which edge-dual method [`edge_dual_solve`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeDualMethod {
    /// Local Lagrangian argmins followed by a dual ascent step per edge.
    DualDecomposition,
    /// Local augmented argmins against neighbor copies, with edge duals
    /// updated at half the penalty.
    Admm,
}

/// State of an edge-dual run: stacked agent states plus one multiplier per
/// graph edge, stored on the edge's lower endpoint with the constraint
/// oriented `x_i − x_j = 0` for `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDualState {
    pub x: Tensor,
    pub duals: Vec<Tensor>,
}

/// Broadcasts every state, then collects for each agent the copies received
/// from its neighbors, substituting the agent's own state for dropped
/// packets.
fn exchange(
    net: &mut Network,
    states: &[Tensor],
) -> Result<Vec<HashMap<usize, Tensor>>, DistributedError> {
    for (i, state) in states.iter().enumerate() {
        net.broadcast(i, state)?;
    }
    let mut all = Vec::with_capacity(states.len());
    for (i, state) in states.iter().enumerate() {
        let mut copies = HashMap::new();
        for j in net.graph().neighbors(i) {
            copies.insert(j, net.receive(i, j).unwrap_or_else(|| state.clone()));
        }
        all.push(copies);
    }
    Ok(all)
}

/// Solves `min Σᵢ Fᵢ(xᵢ; t)` subject to `x_i = x_j` on every graph edge,
/// passing agent states through the network each iteration. The schedule
/// provides the dual ascent step (dual decomposition) or the augmentation
/// penalty ρ (ADMM, normally a fixed schedule).
pub fn edge_dual_solve(
    method: EdgeDualMethod,
    f: &SeparableCost,
    t: f64,
    net: &mut Network,
    x0: &Tensor,
    duals0: Option<Vec<Tensor>>,
    cfg: &DistributedConfig,
) -> Result<EdgeDualState, DistributedError> {
    cfg.validate()?;
    let x = canonical_start(f, net, x0)?;
    let locals = f.sample_locals(t)?;
    let edges = net.graph().edges();
    let agent_dims = f.agent_shape().dims().to_vec();
    let mut duals = match duals0 {
        Some(d) => {
            if d.len() != edges.len() {
                return Err(DistributedError::Shape(format!(
                    "got {} edge duals for {} edges",
                    d.len(),
                    edges.len()
                )));
            }
            for dual in &d {
                if dual.shape() != agent_dims.as_slice() {
                    return Err(DistributedError::Shape(
                        "edge duals must have the per-agent shape".into(),
                    ));
                }
            }
            d
        }
        None => vec![Tensor::zeros(agent_dims.as_slice()); edges.len()],
    };
    let mut states = unstack_states(&x);
    let n = states.len();
    // Incidence per agent: (edge index, orientation sign, neighbor).
    let mut incident: Vec<Vec<(usize, f64, usize)>> = vec![Vec::new(); n];
    for (e, &(i, j)) in edges.iter().enumerate() {
        incident[i].push((e, 1.0, j));
        incident[j].push((e, -1.0, i));
    }
    let agent_len: usize = agent_dims.iter().product();

    let mut copies = exchange(net, &states)?;
    for k in 0..cfg.num_iter {
        let step = cfg.schedule.at(k);
        match method {
            EdgeDualMethod::DualDecomposition => {
                for i in 0..n {
                    let mut linear = Array1::zeros(agent_len);
                    for &(e, sign, _) in &incident[i] {
                        linear = linear + duals[e].iter().map(|v| sign * v).collect::<Array1<f64>>();
                    }
                    states[i] = argmin_augmented(&locals[i], None, &linear, &states[i], &cfg.inner)?;
                    check_state(&states[i])?;
                }
            }
            EdgeDualMethod::Admm => {
                let previous = states.clone();
                for i in 0..n {
                    let degree = incident[i].len();
                    let mut linear = Array1::zeros(agent_len);
                    for &(e, sign, j) in &incident[i] {
                        let copy = &copies[i][&j];
                        for (slot, (dual, (own, other))) in linear
                            .iter_mut()
                            .zip(duals[e].iter().zip(previous[i].iter().zip(copy.iter())))
                        {
                            *slot += sign * dual - step * 0.5 * (own + other);
                        }
                    }
                    let penalty = Array2::eye(agent_len) * (step * degree as f64);
                    states[i] =
                        argmin_augmented(&locals[i], Some(&penalty), &linear, &previous[i], &cfg.inner)?;
                    check_state(&states[i])?;
                }
            }
        }
        copies = exchange(net, &states)?;
        let dual_step = match method {
            EdgeDualMethod::DualDecomposition => step,
            EdgeDualMethod::Admm => step * 0.5,
        };
        for (e, &(i, j)) in edges.iter().enumerate() {
            let received = &copies[i][&j];
            duals[e] = &duals[e] + &((&states[i] - received) * dual_step);
            check_state(&duals[e])?;
        }
    }
    Ok(EdgeDualState { x: stack_states(&states)?, duals })
}

/// Protocol for [`average_consensus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsensusProtocol {
    /// Every round mixes all agents with Metropolis weights through the
    /// network channel.
    Synchronous,
    /// Every round one uniformly chosen edge averages its two endpoints
    /// exactly.
    Gossip,
}

/// Runs `rounds` rounds of a consensus protocol on stacked states.
pub fn average_consensus(
    protocol: ConsensusProtocol,
    net: &mut Network,
    x0: &Tensor,
    rounds: usize,
    seed: u64,
) -> Result<Tensor, DistributedError> {
    let n = net.graph().n();
    if x0.ndim() == 0 || x0.shape()[x0.ndim() - 1] != n {
        return Err(DistributedError::Shape(format!(
            "stacked states must end with the agent dimension of length {n}"
        )));
    }
    let mut states = unstack_states(x0);
    match protocol {
        ConsensusProtocol::Synchronous => {
            let w = net.graph().metropolis_weights();
            for _ in 0..rounds {
                states = net.consensus_round(&states, &w)?;
            }
        }
        ConsensusProtocol::Gossip => {
            let edges = net.graph().edges();
            if !edges.is_empty() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..rounds {
                    let (i, j) = edges[rng.random_range(0..edges.len())];
                    let average = (&states[i] + &states[j]) * 0.5;
                    states[i] = average.clone();
                    states[j] = average;
                }
            }
        }
    }
    stack_states(&states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{CostFamily, Indicator, Norm1, Quadratic};
    use crate::networks::{Channel, Graph};
    use crate::solvers::{gradient_method, Problem, SolverConfig};
    use ndarray::array;

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 0.1, 10).unwrap()
    }

    /// Static univariate ½q(v−m)² as a constant-in-time cost.
    fn pinned(q: f64, m: f64) -> Arc<dyn DynamicCost> {
        Arc::new(CostFamily::constant(
            Arc::new(Quadratic::univariate(q, -q * m, 0.5 * q * m * m)),
            grid(),
        ))
    }

    fn stacked(values: &[f64]) -> Tensor {
        let parts: Vec<Tensor> = values.iter().map(|&v| tensor::scalar(v)).collect();
        stack_states(&parts).unwrap()
    }

    fn pair_cost(b0: f64, b1: f64) -> SeparableCost {
        SeparableCost::new(vec![pinned(1.0, b0), pinned(1.0, b1)]).unwrap()
    }

    fn lossless(graph: Graph) -> Network {
        Network::new(graph, Channel::Lossless, 0).unwrap()
    }

    #[test]
    fn stacking_round_trips() {
        let x = stacked(&[1.0, 2.0, 3.0]);
        assert_eq!(x.shape(), &[1, 3]);
        let parts = unstack_states(&x);
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[1], tensor::scalar(2.0));
        assert_eq!(stack_states(&parts).unwrap(), x);
    }

    #[test]
    fn stacked_oracles_match_per_agent_slices() {
        let f = pair_cost(0.0, 2.0);
        let x = stacked(&[0.0, 0.0]);
        let values = f.values(&x, 0.0).unwrap();
        assert_eq!(values, tensor::vector(&[0.0, 2.0]));
        let grad = f.stacked_gradient(&x, 0.0).unwrap();
        assert_eq!(grad, stacked(&[0.0, -2.0]));

        let at_optima = stacked(&[0.0, 2.0]);
        assert_eq!(f.values(&at_optima, 0.0).unwrap(), tensor::vector(&[0.0, 0.0]));

        for probe in [stacked(&[0.3, -1.2]), stacked(&[5.0, 0.1])] {
            let whole = f.stacked_gradient(&probe, 0.0).unwrap();
            for agent in 0..2 {
                let single = f.agent_gradient(agent, &probe, 0.0).unwrap();
                assert_eq!(single, whole.index_axis(Axis(1), agent).to_owned());
                let value = f.agent_value(agent, &probe, 0.0).unwrap();
                assert_eq!(value, f.values(&probe, 0.0).unwrap()[[agent]]);
            }
        }
        assert!(f.agent_value(2, &x, 0.0).is_err());
    }

    #[test]
    fn separable_sample_sums_parts_and_splits_the_prox() {
        let f = SeparableCost::new(vec![pinned(1.0, 1.0), pinned(3.0, -1.0)]).unwrap();
        let frozen = f.sample(0.0).unwrap();
        let x = stacked(&[2.0, 1.0]);
        // ½(2−1)² + 1.5(1+1)² = 0.5 + 6.
        assert!((frozen.value(&x).unwrap() - 6.5).abs() < 1e-12);
        assert_eq!(frozen.gradient(&x).unwrap(), stacked(&[1.0, 6.0]));
        let h = frozen.hessian(&x).unwrap();
        assert_eq!(h, array![[1.0, 0.0], [0.0, 3.0]]);
        assert!(frozen.has_closed_form_prox());
        // prox of each part separately: (x_i + ρ q m) / (1 + ρ q).
        let prox = frozen.proximal(&x, 1.0).unwrap();
        assert!((prox[[0, 0]] - 1.5).abs() < 1e-12);
        assert!((prox[[0, 1]] - (1.0 + 3.0 * -1.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_agents_are_rejected() {
        let wide = Arc::new(CostFamily::constant(
            Arc::new(Quadratic::new(Array2::eye(2), Array1::zeros(2), 0.0).unwrap()),
            grid(),
        ));
        assert!(SeparableCost::new(vec![pinned(1.0, 0.0), wide]).is_err());
        let other_grid = Arc::new(CostFamily::constant(
            Arc::new(Quadratic::univariate(1.0, 0.0, 0.0)),
            TimeGrid::new(0.0, 0.5, 4).unwrap(),
        ));
        assert!(SeparableCost::new(vec![pinned(1.0, 0.0), other_grid]).is_err());
        assert!(SeparableCost::new(vec![]).is_err());
    }

    #[test]
    fn dgd_with_diminishing_steps_reaches_the_mean() {
        let f = pair_cost(0.0, 2.0);
        let mut net = lossless(Graph::complete(2).unwrap());
        let w = net.graph().metropolis_weights();
        // With α_k = 0.5/(k+1)^γ the mean's error contracts by Π(1 − α_k)
        // while the disagreement floor scales with the final step; γ = 0.75
        // pushes both below 1e−2 within 500 iterations (γ = 1 would leave the
        // mean ≈ 1/√(πK) ≈ 0.025 away).
        let cfg = DistributedConfig {
            schedule: StepSchedule::Diminishing { base: 0.5, gamma: 0.75 },
            num_iter: 500,
            inner: InnerSolve::default(),
        };
        let out = dgd(&f, 0.0, &mut net, &w, &stacked(&[0.0, 0.0]), &cfg).unwrap();
        // Centralized optimum of ½x² + ½(x−2)² is the mean of the targets.
        assert!((out[[0, 0]] - 1.0).abs() < 1e-2, "agent 0 at {}", out[[0, 0]]);
        assert!((out[[0, 1]] - 1.0).abs() < 1e-2, "agent 1 at {}", out[[0, 1]]);
    }

    #[test]
    fn identity_mixing_and_zero_step_change_nothing() {
        let f = pair_cost(0.0, 2.0);
        let mut net = lossless(Graph::complete(2).unwrap());
        let x0 = stacked(&[0.25, -1.5]);
        let out = dgd(&f, 0.0, &mut net, &Array2::eye(2), &x0, &DistributedConfig::fixed(0.0, 7))
            .unwrap();
        assert_eq!(out, x0);
    }

    #[test]
    fn single_agent_dgd_is_the_gradient_method() {
        let local = pinned(2.0, 3.0);
        let frozen = local.sample(0.0).unwrap();
        let f = SeparableCost::new(vec![local]).unwrap();
        let mut net = lossless(Graph::from_adjacency(Array2::zeros((1, 1))).unwrap());
        let cfg = DistributedConfig::fixed(0.3, 20);
        let out = dgd(&f, 0.0, &mut net, &Array2::eye(1), &stacked(&[-4.0]), &cfg).unwrap();

        let problem = Problem::smooth(frozen);
        let solo = gradient_method(&problem, &tensor::scalar(-4.0), &SolverConfig::new(0.3, 20))
            .unwrap();
        assert_eq!(out[[0, 0]].to_bits(), solo[[0]].to_bits());
    }

    #[test]
    fn dpgm_with_zero_regularizer_matches_dgd_bitwise() {
        let f = pair_cost(0.4, 2.6);
        let zero = SeparableCost::new(vec![pinned(0.0, 0.0), pinned(0.0, 0.0)]).unwrap();
        let w = Graph::complete(2).unwrap().metropolis_weights();
        let x0 = stacked(&[3.0, -1.0]);
        let cfg = DistributedConfig::fixed(0.2, 30);

        let mut net_a = lossless(Graph::complete(2).unwrap());
        let plain = dgd(&f, 0.0, &mut net_a, &w, &x0, &cfg).unwrap();
        let mut net_b = lossless(Graph::complete(2).unwrap());
        let prox = dpgm(&f, &zero, 0.0, &mut net_b, &w, &x0, &cfg).unwrap();
        for (a, b) in plain.iter().zip(prox.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn dpgm_keeps_iterates_inside_the_indicator_box() {
        // Smooth parts pull toward 3 and 5; the box [0, 1] must hold anyway.
        let f = pair_cost(3.0, 5.0);
        let unit_box = || {
            ConstraintSet::box_bounds(tensor::vector(&[0.0]), tensor::vector(&[1.0])).unwrap()
        };
        let g = SeparableCost::new(vec![
            Arc::new(CostFamily::constant(Arc::new(Indicator::new(unit_box())), grid())),
            Arc::new(CostFamily::constant(Arc::new(Indicator::new(unit_box())), grid())),
        ])
        .unwrap();
        let mut net = lossless(Graph::complete(2).unwrap());
        let w = net.graph().metropolis_weights();
        let mut x = stacked(&[0.5, 0.5]);
        for _ in 0..10 {
            x = dpgm(&f, &g, 0.0, &mut net, &w, &x, &DistributedConfig::fixed(0.3, 1)).unwrap();
            for v in x.iter() {
                assert!((0.0..=1.0).contains(v), "left the box: {v}");
            }
        }
        assert!((x[[0, 0]] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dpgm_limit_is_the_soft_thresholded_mean() {
        let f = pair_cost(0.0, 2.0);
        let shape = Shape::new(vec![1]).unwrap();
        let g = SeparableCost::new(vec![
            Arc::new(CostFamily::constant(
                Arc::new(Norm1::new(0.25, shape.clone()).unwrap()),
                grid(),
            )),
            Arc::new(CostFamily::constant(Arc::new(Norm1::new(0.25, shape).unwrap()), grid())),
        ])
        .unwrap();
        let mut net = lossless(Graph::complete(2).unwrap());
        let w = net.graph().metropolis_weights();
        let cfg = DistributedConfig {
            schedule: StepSchedule::Diminishing { base: 0.5, gamma: 1.0 },
            num_iter: 4000,
            inner: InnerSolve::default(),
        };
        let out = dpgm(&f, &g, 0.0, &mut net, &w, &stacked(&[0.0, 0.0]), &cfg).unwrap();
        // Centralized: min ½x² + ½(x−2)² + 0.5|x| → 2x − 2 + 0.5 = 0.
        for agent in 0..2 {
            assert!((out[[0, agent]] - 0.75).abs() < 2e-2, "agent {agent} at {}", out[[0, agent]]);
        }
    }

    #[test]
    fn gradient_tracking_finds_the_exact_consensus_minimizer() {
        let f = SeparableCost::new(vec![pinned(1.0, 0.0), pinned(2.0, 3.0), pinned(1.0, 6.0)])
            .unwrap();
        let mut net = lossless(Graph::circulant(3, 1).unwrap());
        let w = net.graph().metropolis_weights();
        let out = gradient_tracking(
            &f,
            0.0,
            &mut net,
            &w,
            &stacked(&[0.0, 0.0, 0.0]),
            &DistributedConfig::fixed(0.15, 400),
        )
        .unwrap();
        // Centralized: Σ qᵢ(x − mᵢ) = 0 → x = (0 + 6 + 6) / 4 = 3.
        for agent in 0..3 {
            assert!(
                (out.x[[0, agent]] - 3.0).abs() < 1e-8,
                "agent {agent} at {}",
                out.x[[0, agent]]
            );
        }
    }

    #[test]
    fn fixed_step_dgd_keeps_a_bias_that_tracking_removes() {
        let f = SeparableCost::new(vec![pinned(1.0, 0.0), pinned(2.0, 3.0), pinned(1.0, 6.0)])
            .unwrap();
        let w = Graph::circulant(3, 1).unwrap().metropolis_weights();
        let cfg = DistributedConfig::fixed(0.15, 400);
        let mut net = lossless(Graph::circulant(3, 1).unwrap());
        let plain = dgd(&f, 0.0, &mut net, &w, &stacked(&[0.0, 0.0, 0.0]), &cfg).unwrap();
        let worst = (0..3)
            .map(|i| (plain[[0, i]] - 3.0).abs())
            .fold(0.0f64, f64::max);
        assert!(worst > 1e-3, "expected a visible fixed-step bias, got {worst}");
    }

    #[test]
    fn tracker_sum_follows_the_gradient_sum() {
        let f = SeparableCost::new(vec![pinned(1.0, 1.0), pinned(0.5, -2.0), pinned(2.0, 4.0)])
            .unwrap();
        let mut net = lossless(Graph::complete(3).unwrap());
        let w = net.graph().metropolis_weights();
        let mut state = TrackingState {
            x: stacked(&[2.0, -1.0, 0.5]),
            trackers: f.stacked_gradient(&stacked(&[2.0, -1.0, 0.5]), 0.0).unwrap(),
        };
        for _ in 0..50 {
            state = gradient_tracking_from(
                &f,
                0.0,
                &mut net,
                &w,
                &state,
                &DistributedConfig::fixed(0.1, 1),
            )
            .unwrap();
            let tracker_sum: f64 = state.trackers.iter().sum();
            let grad_sum: f64 = f.stacked_gradient(&state.x, 0.0).unwrap().iter().sum();
            assert!((tracker_sum - grad_sum).abs() < 1e-10);
        }
    }

    #[test]
    fn single_agent_tracking_matches_the_gradient_method() {
        let local = pinned(1.5, -1.0);
        let frozen = local.sample(0.0).unwrap();
        let f = SeparableCost::new(vec![local]).unwrap();
        let mut net = lossless(Graph::from_adjacency(Array2::zeros((1, 1))).unwrap());
        let out = gradient_tracking(
            &f,
            0.0,
            &mut net,
            &Array2::eye(1),
            &stacked(&[2.0]),
            &DistributedConfig::fixed(0.2, 25),
        )
        .unwrap();
        let solo = gradient_method(
            &Problem::smooth(frozen),
            &tensor::scalar(2.0),
            &SolverConfig::new(0.2, 25),
        )
        .unwrap();
        assert!((out.x[[0, 0]] - solo[[0]]).abs() < 1e-12);
    }

    #[test]
    fn edge_duals_reach_the_centralized_kkt_point() {
        // min ½x₀² + ½(x₁−2)² with x₀ = x₁ → both at 1, multiplier −1.
        let f = pair_cost(0.0, 2.0);
        for (method, cfg) in [
            (EdgeDualMethod::DualDecomposition, DistributedConfig::fixed(0.4, 100)),
            (EdgeDualMethod::Admm, DistributedConfig::fixed(1.0, 200)),
        ] {
            let mut net = lossless(Graph::complete(2).unwrap());
            let out =
                edge_dual_solve(method, &f, 0.0, &mut net, &stacked(&[0.0, 0.0]), None, &cfg)
                    .unwrap();
            assert!((out.x[[0, 0]] - 1.0).abs() < 1e-7, "{method:?} x0 = {}", out.x[[0, 0]]);
            assert!((out.x[[0, 1]] - 1.0).abs() < 1e-7, "{method:?} x1 = {}", out.x[[0, 1]]);
            assert!((out.duals[0][[0]] + 1.0).abs() < 1e-7, "{method:?} λ = {}", out.duals[0][[0]]);
        }
    }

    #[test]
    fn admm_fixed_point_does_not_depend_on_the_penalty() {
        let f = SeparableCost::new(vec![pinned(1.0, -1.0), pinned(3.0, 2.0), pinned(1.0, 1.0)])
            .unwrap();
        let run = |rho: f64| {
            let mut net = lossless(Graph::complete(3).unwrap());
            edge_dual_solve(
                EdgeDualMethod::Admm,
                &f,
                0.0,
                &mut net,
                &stacked(&[0.0, 0.0, 0.0]),
                None,
                &DistributedConfig::fixed(rho, 400),
            )
            .unwrap()
        };
        let slow = run(0.5);
        let fast = run(2.0);
        // Centralized: (−1 + 6 + 1) / 5 = 1.2.
        for agent in 0..3 {
            assert!((slow.x[[0, agent]] - 1.2).abs() < 1e-6);
            assert!((slow.x[[0, agent]] - fast.x[[0, agent]]).abs() < 1e-6);
        }
    }

    #[test]
    fn disconnected_components_converge_to_their_own_means() {
        // Agents 0, 1 linked; agent 2 isolated.
        let adjacency = array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let f = SeparableCost::new(vec![pinned(1.0, 0.0), pinned(1.0, 2.0), pinned(1.0, 5.0)])
            .unwrap();
        let mut net = lossless(Graph::from_adjacency(adjacency).unwrap());
        let out = edge_dual_solve(
            EdgeDualMethod::Admm,
            &f,
            0.0,
            &mut net,
            &stacked(&[0.0, 0.0, 0.0]),
            None,
            &DistributedConfig::fixed(1.0, 300),
        )
        .unwrap();
        assert!((out.x[[0, 0]] - 1.0).abs() < 1e-6);
        assert!((out.x[[0, 1]] - 1.0).abs() < 1e-6);
        assert!((out.x[[0, 2]] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn fully_lossy_exchange_freezes_the_duals() {
        let f = pair_cost(0.0, 2.0);
        let graph = Graph::complete(2).unwrap();
        let mut net = Network::new(graph, Channel::Lossy { p_drop: 1.0 }, 3).unwrap();
        let out = edge_dual_solve(
            EdgeDualMethod::DualDecomposition,
            &f,
            0.0,
            &mut net,
            &stacked(&[0.0, 0.0]),
            None,
            &DistributedConfig::fixed(0.4, 10),
        )
        .unwrap();
        // Every received copy degenerates to the sender's own state, so the
        // edge residual is always zero and agents just minimize locally.
        assert_eq!(out.duals[0], tensor::scalar(0.0));
        assert!((out.x[[0, 0]] - 0.0).abs() < 1e-12);
        assert!((out.x[[0, 1]] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn synchronous_consensus_reaches_the_mean() {
        let mut net = lossless(Graph::complete(3).unwrap());
        let out = average_consensus(
            ConsensusProtocol::Synchronous,
            &mut net,
            &stacked(&[1.0, 2.0, 3.0]),
            100,
            0,
        )
        .unwrap();
        for agent in 0..3 {
            assert!((out[[0, agent]] - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gossip_averages_the_chosen_edge() {
        // Only one edge exists, so the first round must average agents 0, 1.
        let adjacency = array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let mut net = lossless(Graph::from_adjacency(adjacency).unwrap());
        let out = average_consensus(
            ConsensusProtocol::Gossip,
            &mut net,
            &stacked(&[0.0, 2.0, 7.0]),
            1,
            42,
        )
        .unwrap();
        assert_eq!(out, stacked(&[1.0, 1.0, 7.0]));
    }

    #[test]
    fn gossip_preserves_the_sum_and_converges() {
        let mut net = lossless(Graph::random(6, 0.6, 5).unwrap());
        let start = stacked(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let total: f64 = start.iter().sum();
        let mut x = start;
        for round in 0..1200 {
            x = average_consensus(ConsensusProtocol::Gossip, &mut net, &x, 1, round).unwrap();
            let sum: f64 = x.iter().sum();
            assert!((sum - total).abs() < 1e-12, "round {round} drifted to {sum}");
        }
        for v in x.iter() {
            assert!((v - 2.5).abs() < 1e-6, "gossip did not mix: {v}");
        }
    }

    #[test]
    fn schedules_evaluate_and_validate() {
        let fixed = StepSchedule::Fixed { step: 0.2 };
        assert_eq!(fixed.at(0), 0.2);
        assert_eq!(fixed.at(99), 0.2);
        let dim = StepSchedule::Diminishing { base: 0.5, gamma: 1.0 };
        assert!((dim.at(0) - 0.5).abs() < 1e-15);
        assert!((dim.at(4) - 0.1).abs() < 1e-15);
        let sqrt = StepSchedule::Diminishing { base: 1.0, gamma: 0.5 };
        assert!((sqrt.at(3) - 0.5).abs() < 1e-15);

        let bad = DistributedConfig {
            schedule: StepSchedule::Diminishing { base: 1.0, gamma: 0.3 },
            num_iter: 1,
            inner: InnerSolve::default(),
        };
        assert!(bad.validate().is_err());
        assert!(DistributedConfig::fixed(-0.1, 1).validate().is_err());

        let json = serde_json::to_string(&StepSchedule::Diminishing { base: 0.5, gamma: 0.75 })
            .unwrap();
        assert_eq!(json, r#"{"kind":"diminishing","base":0.5,"gamma":0.75}"#);
        let back: StepSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, StepSchedule::Diminishing { base: 0.5, gamma: 0.75 });
    }

    #[test]
    fn wrong_network_size_is_rejected() {
        let f = pair_cost(0.0, 2.0);
        let mut net = lossless(Graph::complete(3).unwrap());
        let w = net.graph().metropolis_weights();
        assert!(matches!(
            dgd(&f, 0.0, &mut net, &w, &stacked(&[0.0, 0.0]), &DistributedConfig::fixed(0.1, 1)),
            Err(DistributedError::Shape(_))
        ));
    }
}

//! Time-varying convex optimization as sequences of sampled static problems.
//!
//! A continuously varying cost `F(x; t)` is observed only at sampling
//! instants `t_k = t_0 + k*t_s`, each sample is an ordinary static convex
//! problem, and an online solver chases the moving minimizer by spending a
//! fixed budget of solver iterations per sample — optionally warm-started by
//! a prediction of where the cost is headed. The crate provides the layers of
//! that loop:
//!
//! - [`tensor`], [`sets`]: the `f64` tensor type, constraint sets with
//!   closed-form projections, and the sampling-time grid.
//! - [`costs`]: static and time-varying cost functions with values,
//!   gradients, Hessians, proximal operators, and a composition algebra.
//! - [`prediction`]: extrapolation- and Taylor-based models that forecast the
//!   next sampled cost from past observations.
//! - [`solvers`]: iteration-budgeted first-order and proximal methods, plus
//!   dual decompositions for linearly coupled problems.
//! - [`networks`], [`distributed`]: peer-to-peer message passing over graphs
//!   with imperfect channels, and the distributed counterparts of the online
//!   solvers.
//! - [`online`], [`scenarios`]: the prediction-correction driver, run traces
//!   with tracking metrics, and ready-made experiment scenarios.

pub mod tensor;

mod linalg;
mod minimize;

pub mod sets;

pub mod costs;

pub mod prediction;
pub mod distributed;
pub mod networks;
pub mod online;
pub mod scenarios;
pub mod solvers;

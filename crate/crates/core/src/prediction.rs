//! Prediction of the next sampled cost from past observations.
//!
//! Online methods that only react to each new sample lag behind a moving
//! optimizer. A [`Predictor`] closes part of that gap by extrapolating the
//! cost one sampling interval ahead, so a solver can take provisional steps
//! on the predicted cost before the real one arrives.
//!
//! Two strategies are provided. [`PredictionStrategy::Extrapolation`] fits a
//! polynomial in time through the last few sampled costs and evaluates it one
//! interval ahead — a combination `Σ c_l F(·; t_{k−l})` of past costs, exact
//! whenever the cost depends polynomially on time with low enough degree.
//! [`PredictionStrategy::Taylor`] expands around an anchor point instead,
//! building an explicit quadratic from the current value, gradient, Hessian,
//! and a backward estimate of the gradient's time derivative; it is exact for
//! quadratics whose gradient drifts linearly in time.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{
    scale, sum, Cost, CostError, DynamicCost, Quadratic, QuadraticForm,
};
use crate::tensor::{self, Tensor};

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("the predictor has not produced a cost yet; call update first")]
    NotUpdated,
    #[error("this strategy expands around a point, so update needs an anchor")]
    AnchorRequired,
    #[error("extrapolation needs at least 2 past costs, got {0}")]
    TooFewPastCosts(usize),
}

/// How the cost at the next sampling instant is predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PredictionStrategy {
    /// Polynomial extrapolation through the last `past` sampled costs.
    Extrapolation {
        #[serde(default = "default_past")]
        past: usize,
    },
    /// Quadratic expansion around an anchor point, with the gradient drift
    /// estimated by a backward difference.
    Taylor,
}

fn default_past() -> usize {
    2
}

/// Weights `c_l` on `F(·; t_{k−l})`, `l = 0..past`, of the Lagrange
/// polynomial through the nodes `u_l = −l` evaluated one step ahead at
/// `u = 1`.
fn extrapolation_coefficients(past: usize) -> Vec<f64> {
    (0..past)
        .map(|l| {
            let ul = -(l as f64);
            let mut c = 1.0;
            for m in 0..past {
                if m != l {
                    let um = -(m as f64);
                    c *= (1.0 - um) / (ul - um);
                }
            }
            c
        })
        .collect()
}

/// Predicts the cost one sampling interval ahead of the last update.
#[derive(Debug)]
pub struct Predictor<'a> {
    target: &'a dyn DynamicCost,
    strategy: PredictionStrategy,
    frozen: Option<Arc<dyn Cost>>,
}

impl<'a> Predictor<'a> {
    pub fn new(
        target: &'a dyn DynamicCost,
        strategy: PredictionStrategy,
    ) -> Result<Self, PredictionError> {
        if let PredictionStrategy::Extrapolation { past } = strategy {
            if past < 2 {
                return Err(PredictionError::TooFewPastCosts(past));
            }
        }
        Ok(Predictor { target, strategy, frozen: None })
    }

    pub fn strategy(&self) -> &PredictionStrategy {
        &self.strategy
    }

    /// Rebuilds the predicted cost for the instant one interval after `t`.
    ///
    /// `anchor` is the expansion point, required by [`PredictionStrategy::Taylor`]
    /// and ignored by extrapolation. Early in a run, when fewer past samples
    /// exist than the strategy needs, this fails with
    /// [`CostError::InsufficientHistory`] and clears any previous prediction.
    pub fn update(&mut self, t: f64, anchor: Option<&Tensor>) -> Result<(), PredictionError> {
        self.frozen = None;
        let grid = self.target.grid();
        let k = grid.nearest(t).map_err(CostError::from)?;
        let frozen: Arc<dyn Cost> = match self.strategy {
            PredictionStrategy::Extrapolation { past } => {
                if k + 1 < past {
                    return Err(CostError::InsufficientHistory {
                        needed: past,
                        available: k + 1,
                    }
                    .into());
                }
                let coeffs = extrapolation_coefficients(past);
                let mut parts: Vec<Arc<dyn Cost>> = Vec::with_capacity(past);
                for (l, &c) in coeffs.iter().enumerate() {
                    let sample = self.target.sample(grid.time_at(k - l))?;
                    parts.push(Arc::new(scale(c, sample)?));
                }
                Arc::new(sum(parts)?)
            }
            PredictionStrategy::Taylor => {
                let anchor = anchor.ok_or(PredictionError::AnchorRequired)?;
                let anchor = self.target.domain().check_input(anchor).map_err(CostError::from)?;
                let ts = grid.ts();
                let tk = grid.time_at(k);
                // Estimating the gradient drift needs one past sample, so
                // this is the step that can run out of history.
                let drift = self.target.gradient_time_derivative(&anchor, tk, 1)?;
                let sampled = self.target.sample(tk)?;
                let value = sampled.value(&anchor)?;
                let gradient = sampled.gradient(&anchor)?;
                let hessian = sampled.hessian(&anchor)?;
                // The expansion ∇F̂(x) = g + ts·d + H(x − x̂) written out as
                // an explicit quadratic ½xᵀQx + bᵀx + c.
                let x_flat = tensor::flatten(&anchor);
                let g_flat = tensor::flatten(&(&gradient + &(&drift * ts)));
                let b = &g_flat - &hessian.dot(&x_flat);
                let c = value - g_flat.dot(&x_flat) + 0.5 * x_flat.dot(&hessian.dot(&x_flat));
                let form = QuadraticForm::new(hessian, b, c)?;
                Arc::new(Quadratic::from_form(form, self.target.domain().shape().clone())?)
            }
        };
        self.frozen = Some(frozen);
        Ok(())
    }

    /// The cost predicted by the last successful [`Predictor::update`].
    pub fn predicted(&self) -> Result<&Arc<dyn Cost>, PredictionError> {
        self.frozen.as_ref().ok_or(PredictionError::NotUpdated)
    }

    pub fn value(&self, x: &Tensor) -> Result<f64, PredictionError> {
        Ok(self.predicted()?.value(x)?)
    }

    pub fn gradient(&self, x: &Tensor) -> Result<Tensor, PredictionError> {
        Ok(self.predicted()?.gradient(x)?)
    }

    pub fn proximal(&self, x: &Tensor, penalty: f64) -> Result<Tensor, PredictionError> {
        Ok(self.predicted()?.proximal(x, penalty)?)
    }
}

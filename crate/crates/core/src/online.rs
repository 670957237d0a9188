//! Online runner: solve a time-varying cost sample by sample.
//!
//! [`run_online`] drives the prediction–correction loop. At each sampling
//! instant it first *corrects* — runs a few solver steps on the newly revealed
//! cost from the warm start produced at the previous instant — then *predicts*
//! — builds a model of the next cost and runs a few solver steps on that model
//! to produce the warm start for the next instant. [`run_correction_only`]
//! drops the prediction phase entirely, which is both the classic online
//! gradient baseline and the reference that `run_online` with `n_pred = 0`
//! must reproduce bit for bit.
//!
//! Every run produces a [`RunTrace`]: one row per sampling instant with the
//! decision variable and the standard tracking metrics, computed against an
//! [`OptimumOracle`] when one is available. Traces serialize to CSV with
//! 17 significant digits so that a parsed trace compares bitwise equal to the
//! original.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{Cost, CostError, DynamicCost};
use crate::minimize::damped_newton;
use crate::prediction::{PredictionError, PredictionStrategy, Predictor};
use crate::sets::SetError;
use crate::solvers::{gradient_method, proximal_point, InnerSolve, Problem, SolverConfig, SolverError};
use crate::tensor::{self, Tensor};

/// Newton tolerance of the numeric optimum oracle; the oracle refuses to
/// report a point whose gradient norm exceeds [`ORACLE_GRADIENT_NORM`].
const ORACLE_GRADIENT_TOL: f64 = 1e-12;
const ORACLE_GRADIENT_NORM: f64 = 1e-10;
const ORACLE_MAX_ITER: usize = 200;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("optimum oracle did not converge at t = {time}")]
    OracleFailed { time: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed trace CSV: {0}")]
    MalformedCsv(String),
}

impl From<SetError> for RunError {
    fn from(e: SetError) -> Self {
        RunError::Cost(CostError::from(e))
    }
}

/// Which first-order method the runner applies to each frozen cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    Gradient,
    ProximalPoint,
}

/// Settings of one online run.
///
/// `n_corr` solver steps are spent on each revealed cost and `n_pred` on each
/// predicted cost; either may be zero. A positive `n_pred` needs a
/// `prediction` strategy. `horizon` caps the number of processed sampling
/// instants (default: the whole grid). `step` is the solver step size, and
/// `inner` budgets any numeric proximal evaluations the solver falls back to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub solver: SolverMethod,
    pub step: f64,
    pub n_corr: usize,
    pub n_pred: usize,
    #[serde(default)]
    pub prediction: Option<PredictionStrategy>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub inner: InnerSolve,
}

impl OnlineConfig {
    /// Correction-only settings: `n_corr` steps of `solver` per instant.
    pub fn correction_only(solver: SolverMethod, step: f64, n_corr: usize) -> Self {
        OnlineConfig {
            solver,
            step,
            n_corr,
            n_pred: 0,
            prediction: None,
            horizon: None,
            inner: InnerSolve::default(),
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(RunError::InvalidConfig(format!(
                "step must be positive and finite, got {}",
                self.step
            )));
        }
        if self.n_pred > 0 && self.prediction.is_none() {
            return Err(RunError::InvalidConfig(
                "n_pred > 0 needs a prediction strategy".into(),
            ));
        }
        Ok(())
    }
}

/// Where the per-instant optimum `x*(t)` comes from.
///
/// `Analytic` wraps a closed-form map from time to minimizer. `Newton` runs a
/// damped Newton descent on each frozen cost, warm-started from the previous
/// optimum, and fails the run rather than report a point with gradient norm
/// above 1e-10. `None` leaves the optimum-based metrics as NaN.
pub enum OptimumOracle {
    None,
    Analytic(Box<dyn Fn(f64) -> Tensor + Send + Sync>),
    Newton,
}

impl fmt::Debug for OptimumOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimumOracle::None => f.write_str("None"),
            OptimumOracle::Analytic(_) => f.write_str("Analytic(..)"),
            OptimumOracle::Newton => f.write_str("Newton"),
        }
    }
}

impl OptimumOracle {
    /// The optimum of `frozen` at time `t`, or `None` for the null oracle.
    /// `warm` is the Newton starting point and is advanced to the optimum.
    fn optimum(
        &self,
        frozen: &Arc<dyn Cost>,
        t: f64,
        warm: &mut Tensor,
    ) -> Result<Option<Tensor>, RunError> {
        match self {
            OptimumOracle::None => Ok(None),
            OptimumOracle::Analytic(map) => Ok(Some(map(t))),
            OptimumOracle::Newton => {
                let out = damped_newton(
                    |x| frozen.value(x),
                    |x| frozen.gradient(x),
                    |x| frozen.hessian(x),
                    warm.clone(),
                    0.0,
                    ORACLE_GRADIENT_TOL,
                    ORACLE_MAX_ITER,
                )?;
                // Newton aims for ORACLE_GRADIENT_TOL; the defensive check
                // below is the bound the oracle actually promises its
                // consumers, independent of how the solve terminated.
                let grad_norm = tensor::norm(&frozen.gradient(&out.x)?);
                if !(grad_norm < ORACLE_GRADIENT_NORM) {
                    return Err(RunError::OracleFailed { time: t });
                }
                *warm = out.x.clone();
                Ok(Some(out.x))
            }
        }
    }
}

/// One sampling instant of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub time: f64,
    /// `‖x_k − x*(t_k)‖`; NaN without an oracle.
    pub tracking_error: f64,
    /// `‖x_k − x_{k−1}‖`; NaN at the first instant.
    pub fixed_point_residual: f64,
    /// Running average `(1/(k+1)) Σ_{j≤k} [F(x_j; t_j) − F(x*(t_j); t_j)]`;
    /// NaN without an oracle.
    pub regret: f64,
    /// The decision variable, flattened row-major.
    pub x: Vec<f64>,
}

/// The per-instant record of one online run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    rows: Vec<TraceRow>,
}

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_float(field: &str, line: usize) -> Result<f64, RunError> {
    field.parse::<f64>().map_err(|_| {
        RunError::MalformedCsv(format!("line {line}: cannot parse float {field:?}"))
    })
}

impl RunTrace {
    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Dimension of the decision variable (0 for an empty trace).
    pub fn dimension(&self) -> usize {
        self.rows.first().map_or(0, |r| r.x.len())
    }

    /// Mean tracking error over the rows with index `from` onwards.
    pub fn mean_tracking_error(&self, from: usize) -> f64 {
        mean(self.rows[from..].iter().map(|r| r.tracking_error))
    }

    /// Mean fixed-point residual over the rows with index `from` onwards.
    /// The first row of a trace holds NaN, which would poison a mean that
    /// includes it.
    pub fn mean_fixed_point_residual(&self, from: usize) -> f64 {
        mean(self.rows[from..].iter().map(|r| r.fixed_point_residual))
    }

    /// Whether two traces agree bit for bit, NaNs included.
    pub fn bitwise_eq(&self, other: &RunTrace) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.step == b.step
                    && a.time.to_bits() == b.time.to_bits()
                    && a.tracking_error.to_bits() == b.tracking_error.to_bits()
                    && a.fixed_point_residual.to_bits() == b.fixed_point_residual.to_bits()
                    && a.regret.to_bits() == b.regret.to_bits()
                    && a.x.len() == b.x.len()
                    && a.x.iter().zip(&b.x).all(|(u, v)| u.to_bits() == v.to_bits())
            })
    }

    /// The CSV form: a header, then one line per instant, floats printed with
    /// 17 significant digits (`NaN` spelled literally) so parsing recovers
    /// the exact bits.
    pub fn to_csv_string(&self) -> String {
        let d = self.dimension();
        let mut out = String::from("step,time,tracking_error,fixed_point_residual,regret");
        for i in 0..d {
            out.push_str(&format!(",x_{i}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}",
                row.step,
                fmt_float(row.time),
                fmt_float(row.tracking_error),
                fmt_float(row.fixed_point_residual),
                fmt_float(row.regret),
            ));
            for v in &row.x {
                out.push(',');
                out.push_str(&fmt_float(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), RunError> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<RunTrace, RunError> {
        RunTrace::from_csv_str(&fs::read_to_string(path)?)
    }

    pub fn from_csv_str(s: &str) -> Result<RunTrace, RunError> {
        let mut lines = s.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| RunError::MalformedCsv("empty input".into()))?;
        let fields: Vec<&str> = header.split(',').collect();
        let expected = ["step", "time", "tracking_error", "fixed_point_residual", "regret"];
        if fields.len() < expected.len() || fields[..expected.len()] != expected {
            return Err(RunError::MalformedCsv(format!("unexpected header {header:?}")));
        }
        for (i, name) in fields[expected.len()..].iter().enumerate() {
            if *name != format!("x_{i}") {
                return Err(RunError::MalformedCsv(format!(
                    "expected column x_{i}, found {name:?}"
                )));
            }
        }
        let d = fields.len() - expected.len();

        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let n = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected.len() + d {
                return Err(RunError::MalformedCsv(format!(
                    "line {n}: expected {} fields, found {}",
                    expected.len() + d,
                    fields.len()
                )));
            }
            let step = fields[0].parse::<usize>().map_err(|_| {
                RunError::MalformedCsv(format!("line {n}: cannot parse step {:?}", fields[0]))
            })?;
            let mut x = Vec::with_capacity(d);
            for field in &fields[expected.len()..] {
                x.push(parse_float(field, n)?);
            }
            rows.push(TraceRow {
                step,
                time: parse_float(fields[1], n)?,
                tracking_error: parse_float(fields[2], n)?,
                fixed_point_residual: parse_float(fields[3], n)?,
                regret: parse_float(fields[4], n)?,
                x,
            });
        }
        Ok(RunTrace { rows })
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Builds trace rows incrementally: remembers the previous iterate for the
/// fixed-point residual, the running optimality-gap sum for the regret, and
/// the Newton oracle's warm start.
struct MetricsAccumulator {
    prev_x: Option<Tensor>,
    warm: Tensor,
    gap_sum: f64,
}

impl MetricsAccumulator {
    fn new(warm_start: &Tensor) -> Self {
        MetricsAccumulator { prev_x: None, warm: warm_start.clone(), gap_sum: 0.0 }
    }

    fn row(
        &mut self,
        k: usize,
        t: f64,
        x: &Tensor,
        frozen: &Arc<dyn Cost>,
        oracle: &OptimumOracle,
    ) -> Result<TraceRow, RunError> {
        let fixed_point_residual = match &self.prev_x {
            Some(prev) => tensor::norm(&(x - prev)),
            None => f64::NAN,
        };
        let (tracking_error, regret) = match oracle.optimum(frozen, t, &mut self.warm)? {
            Some(star) => {
                self.gap_sum += frozen.value(x)? - frozen.value(&star)?;
                (tensor::norm(&(x - &star)), self.gap_sum / (k + 1) as f64)
            }
            None => (f64::NAN, f64::NAN),
        };
        self.prev_x = Some(x.clone());
        Ok(TraceRow {
            step: k,
            time: t,
            tracking_error,
            fixed_point_residual,
            regret,
            x: x.iter().copied().collect(),
        })
    }
}

/// `num_iter` steps of the configured solver on one frozen cost.
fn solver_steps(
    frozen: &Arc<dyn Cost>,
    x0: &Tensor,
    num_iter: usize,
    cfg: &OnlineConfig,
) -> Result<Tensor, SolverError> {
    if num_iter == 0 {
        return Ok(x0.clone());
    }
    let solver_cfg = SolverConfig {
        step: cfg.step,
        num_iter,
        relaxation: 1.0,
        inner: cfg.inner,
    };
    let problem = Problem::smooth(frozen.clone());
    match cfg.solver {
        SolverMethod::Gradient => gradient_method(&problem, x0, &solver_cfg),
        SolverMethod::ProximalPoint => proximal_point(&problem, x0, &solver_cfg),
    }
}

fn resolve_horizon(cost: &dyn DynamicCost, cfg_horizon: Option<usize>) -> Result<usize, RunError> {
    let num_samples = cost.grid().num_samples();
    let horizon = cfg_horizon.unwrap_or(num_samples);
    if horizon > num_samples {
        return Err(RunError::InvalidConfig(format!(
            "horizon {horizon} exceeds the {num_samples} grid samples"
        )));
    }
    Ok(horizon)
}

/// Runs the prediction–correction loop over the sampled cost.
///
/// At instant `k` the newly revealed cost is corrected with `n_corr` solver
/// steps from the warm start `x̂_k`, producing the reported decision `x_k`;
/// the predictor is then updated (anchored at `x_k`) and `n_pred` solver
/// steps on the predicted cost produce `x̂_{k+1}`. While the predictor still
/// lacks history the warm start falls back to `x_k` unchanged. With
/// `n_pred = 0` the prediction phase is skipped outright and the run is
/// bitwise identical to [`run_correction_only`].
pub fn run_online(
    cost: &dyn DynamicCost,
    x0: &Tensor,
    oracle: &OptimumOracle,
    cfg: &OnlineConfig,
) -> Result<RunTrace, RunError> {
    cfg.validate()?;
    let horizon = resolve_horizon(cost, cfg.horizon)?;
    let x0 = cost.domain().check_input(x0)?;
    let mut predictor = match &cfg.prediction {
        Some(strategy) if cfg.n_pred > 0 => Some(Predictor::new(cost, strategy.clone())?),
        _ => None,
    };

    let grid = cost.grid();
    let mut acc = MetricsAccumulator::new(&x0);
    let mut rows = Vec::with_capacity(horizon);
    let mut warm = x0;
    for k in 0..horizon {
        let t = grid.time_at(k);
        let frozen = cost.sample(t)?;
        let x = solver_steps(&frozen, &warm, cfg.n_corr, cfg)?;
        rows.push(acc.row(k, t, &x, &frozen, oracle)?);
        warm = match predictor.as_mut() {
            None => x,
            Some(predictor) => match predictor.update(t, Some(&x)) {
                Ok(()) => {
                    let predicted = predictor.predicted()?.clone();
                    solver_steps(&predicted, &x, cfg.n_pred, cfg)?
                }
                Err(PredictionError::Cost(CostError::InsufficientHistory { .. })) => x,
                Err(e) => return Err(e.into()),
            },
        };
    }
    Ok(RunTrace { rows })
}

/// Runs the correction phase alone: `n_corr` solver steps per instant, each
/// warm-started from the previous decision. Any prediction settings in `cfg`
/// are ignored.
pub fn run_correction_only(
    cost: &dyn DynamicCost,
    x0: &Tensor,
    oracle: &OptimumOracle,
    cfg: &OnlineConfig,
) -> Result<RunTrace, RunError> {
    cfg.validate()?;
    let horizon = resolve_horizon(cost, cfg.horizon)?;
    let x0 = cost.domain().check_input(x0)?;

    let grid = cost.grid();
    let mut acc = MetricsAccumulator::new(&x0);
    let mut rows = Vec::with_capacity(horizon);
    let mut x = x0;
    for k in 0..horizon {
        let t = grid.time_at(k);
        let frozen = cost.sample(t)?;
        x = solver_steps(&frozen, &x, cfg.n_corr, cfg)?;
        rows.push(acc.row(k, t, &x, &frozen, oracle)?);
    }
    Ok(RunTrace { rows })
}

/// Computes the trace metrics for externally produced iterates: `iterates[k]`
/// is scored against the cost frozen at grid instant `k`.
pub fn trace_from_iterates(
    cost: &dyn DynamicCost,
    iterates: &[Tensor],
    oracle: &OptimumOracle,
) -> Result<RunTrace, RunError> {
    let num_samples = cost.grid().num_samples();
    if iterates.len() > num_samples {
        return Err(RunError::InvalidConfig(format!(
            "{} iterates exceed the {num_samples} grid samples",
            iterates.len()
        )));
    }
    let Some(first) = iterates.first() else {
        return Ok(RunTrace::default());
    };
    let mut acc = MetricsAccumulator::new(&cost.domain().check_input(first)?);
    let mut rows = Vec::with_capacity(iterates.len());
    for (k, x) in iterates.iter().enumerate() {
        let x = cost.domain().check_input(x)?;
        let t = cost.grid().time_at(k);
        let frozen = cost.sample(t)?;
        rows.push(acc.row(k, t, &x, &frozen, oracle)?);
    }
    Ok(RunTrace { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{CosineSoftplus, CostFamily, DiscreteDynamicCost, Quadratic};
    use crate::sets::TimeGrid;

    fn grid(num_samples: usize) -> TimeGrid {
        TimeGrid::new(0.0, 0.1, num_samples).unwrap()
    }

    /// `½(x − target)²` pinned over the whole grid.
    fn static_cost(target: f64, num_samples: usize) -> CostFamily {
        let q = Quadratic::univariate(1.0, -target, 0.5 * target * target);
        CostFamily::constant(Arc::new(q), grid(num_samples))
    }

    /// `½(x − m·k)²` sampled on the grid: the minimizer drifts linearly.
    fn drifting_cost(m: f64, num_samples: usize) -> DiscreteDynamicCost {
        let samples: Vec<Arc<dyn Cost>> = (0..num_samples)
            .map(|k| {
                let target = m * k as f64;
                Arc::new(Quadratic::univariate(1.0, -target, 0.5 * target * target))
                    as Arc<dyn Cost>
            })
            .collect();
        DiscreteDynamicCost::new(samples, grid(num_samples)).unwrap()
    }

    #[test]
    fn correction_converges_on_a_static_cost() {
        let cost = static_cost(3.0, 60);
        let cfg = OnlineConfig::correction_only(SolverMethod::Gradient, 0.5, 2);
        let oracle = OptimumOracle::Analytic(Box::new(|_| tensor::scalar(3.0)));
        let trace = run_correction_only(&cost, &tensor::scalar(0.0), &oracle, &cfg).unwrap();
        assert_eq!(trace.len(), 60);
        let last = trace.rows().last().unwrap();
        assert!(last.tracking_error < 1e-6, "error {}", last.tracking_error);
        // Once converged the iterates stop moving.
        assert!(last.fixed_point_residual < 1e-6);
    }

    #[test]
    fn one_instant_runs_exactly_the_correction_steps() {
        let cost = static_cost(2.0, 10);
        let mut cfg = OnlineConfig::correction_only(SolverMethod::Gradient, 0.3, 4);
        cfg.horizon = Some(1);
        let trace =
            run_correction_only(&cost, &tensor::scalar(-1.0), &OptimumOracle::None, &cfg).unwrap();
        assert_eq!(trace.len(), 1);

        let frozen = cost.sample(0.0).unwrap();
        let reference = gradient_method(
            &Problem::smooth(frozen),
            &tensor::scalar(-1.0),
            &SolverConfig::new(0.3, 4),
        )
        .unwrap();
        assert_eq!(trace.rows()[0].x[0].to_bits(), reference[[0]].to_bits());
    }

    #[test]
    fn disabled_prediction_matches_correction_only_bitwise() {
        let cost = drifting_cost(0.05, 40);
        let cfg = OnlineConfig::correction_only(SolverMethod::Gradient, 0.4, 3);
        let oracle = OptimumOracle::Analytic(Box::new(|t| tensor::scalar(0.05 * (t / 0.1))));
        let a = run_online(&cost, &tensor::scalar(0.0), &oracle, &cfg).unwrap();
        let b = run_correction_only(&cost, &tensor::scalar(0.0), &oracle, &cfg).unwrap();
        assert!(a.bitwise_eq(&b));
    }

    #[test]
    fn extrapolation_improves_tracking_on_a_drifting_target() {
        let cost = drifting_cost(0.1, 80);
        let oracle = || OptimumOracle::Analytic(Box::new(|t| tensor::scalar(0.1 * (t / 0.1))));
        let corr = OnlineConfig::correction_only(SolverMethod::Gradient, 0.5, 1);
        let pred = OnlineConfig {
            n_pred: 1,
            prediction: Some(PredictionStrategy::Extrapolation { past: 2 }),
            ..corr.clone()
        };
        let x0 = tensor::scalar(0.0);
        let with = run_online(&cost, &x0, &oracle(), &pred).unwrap();
        let without = run_correction_only(&cost, &x0, &oracle(), &corr).unwrap();
        let (with, without) = (with.mean_tracking_error(10), without.mean_tracking_error(10));
        assert!(
            with < 0.5 * without,
            "prediction {with} should clearly beat correction-only {without}"
        );
    }

    #[test]
    fn regret_matches_a_direct_recomputation() {
        let cost = drifting_cost(0.02, 30);
        let oracle = OptimumOracle::Analytic(Box::new(|t| tensor::scalar(0.02 * (t / 0.1))));
        let cfg = OnlineConfig {
            solver: SolverMethod::Gradient,
            step: 0.3,
            n_corr: 1,
            n_pred: 2,
            prediction: Some(PredictionStrategy::Extrapolation { past: 2 }),
            horizon: None,
            inner: InnerSolve::default(),
        };
        let trace = run_online(&cost, &tensor::scalar(0.5), &oracle, &cfg).unwrap();

        let mut gap_sum = 0.0;
        for (k, row) in trace.rows().iter().enumerate() {
            let t = row.time;
            let star = 0.02 * (t / 0.1);
            gap_sum += cost.value(&tensor::scalar(row.x[0]), t).unwrap()
                - cost.value(&tensor::scalar(star), t).unwrap();
            let expected = gap_sum / (k + 1) as f64;
            assert!((row.regret - expected).abs() <= 1e-12, "row {k}");
        }
    }

    #[test]
    fn averaged_regret_on_a_known_pair_of_iterates() {
        // On F = ½x² with x* = 0, iterates 0 then 1 average to regret ¼.
        let cost = static_cost(0.0, 4);
        let oracle = OptimumOracle::Analytic(Box::new(|_| tensor::scalar(0.0)));
        let trace =
            trace_from_iterates(&cost, &[tensor::scalar(0.0), tensor::scalar(1.0)], &oracle)
                .unwrap();
        assert_eq!(trace.rows()[0].regret, 0.0);
        assert_eq!(trace.rows()[1].regret, 0.25);
        assert!(trace.rows()[0].fixed_point_residual.is_nan());
        assert_eq!(trace.rows()[1].fixed_point_residual, 1.0);
        assert_eq!(trace.rows()[1].tracking_error, 1.0);
    }

    #[test]
    fn csv_round_trip_preserves_bits() {
        let cost = drifting_cost(0.07, 12);
        let cfg = OnlineConfig::correction_only(SolverMethod::Gradient, 0.35, 2);
        // The null oracle leaves NaN columns, which must survive the trip too.
        let trace =
            run_correction_only(&cost, &tensor::scalar(0.2), &OptimumOracle::None, &cfg).unwrap();
        let text = text_of(&trace);
        assert!(text.starts_with("step,time,tracking_error,fixed_point_residual,regret,x_0\n"));
        let parsed = RunTrace::from_csv_str(&text).unwrap();
        assert!(parsed.bitwise_eq(&trace));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        trace.write_csv(&path).unwrap();
        assert!(RunTrace::read_csv(&path).unwrap().bitwise_eq(&trace));
    }

    fn text_of(trace: &RunTrace) -> String {
        let text = trace.to_csv_string();
        assert!(text.contains("NaN"));
        text
    }

    #[test]
    fn newton_oracle_meets_the_gradient_tolerance() {
        let cost = CosineSoftplus::new(0.02 * std::f64::consts::PI, 7.5, 1.75, grid(50)).unwrap();
        let oracle = OptimumOracle::Newton;
        let mut warm = tensor::scalar(0.0);
        for k in [0usize, 10, 25, 49] {
            let t = cost.grid().time_at(k);
            let frozen = cost.sample(t).unwrap();
            let star = oracle.optimum(&frozen, t, &mut warm).unwrap().unwrap();
            let grad = frozen.gradient(&star).unwrap();
            assert!(tensor::norm(&grad) < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn zero_correction_steps_keep_the_iterate() {
        let cost = drifting_cost(0.03, 8);
        let cfg = OnlineConfig::correction_only(SolverMethod::Gradient, 0.5, 0);
        let trace =
            run_correction_only(&cost, &tensor::scalar(0.7), &OptimumOracle::None, &cfg).unwrap();
        assert!(trace.rows().iter().all(|r| r.x == vec![0.7]));
    }

    #[test]
    fn proximal_point_variant_converges_too() {
        let cost = static_cost(-1.5, 40);
        let cfg = OnlineConfig::correction_only(SolverMethod::ProximalPoint, 1.0, 1);
        let oracle = OptimumOracle::Analytic(Box::new(|_| tensor::scalar(-1.5)));
        let trace = run_correction_only(&cost, &tensor::scalar(2.0), &oracle, &cfg).unwrap();
        assert!(trace.rows().last().unwrap().tracking_error < 1e-6);
    }

    #[test]
    fn validation_rejects_inconsistent_settings() {
        let mut cfg = OnlineConfig::correction_only(SolverMethod::Gradient, 0.2, 1);
        cfg.n_pred = 3;
        assert!(matches!(cfg.validate(), Err(RunError::InvalidConfig(_))));

        let cfg = OnlineConfig::correction_only(SolverMethod::Gradient, 0.0, 1);
        assert!(cfg.validate().is_err());

        let cost = static_cost(1.0, 5);
        let mut cfg = OnlineConfig::correction_only(SolverMethod::Gradient, 0.2, 1);
        cfg.horizon = Some(6);
        let out = run_correction_only(&cost, &tensor::scalar(0.0), &OptimumOracle::None, &cfg);
        assert!(matches!(out, Err(RunError::InvalidConfig(_))));
    }

    #[test]
    fn config_parses_with_defaults() {
        let cfg: OnlineConfig = serde_json::from_str(
            r#"{"solver": "gradient", "step": 0.2, "n_corr": 5, "n_pred": 0}"#,
        )
        .unwrap();
        assert_eq!(cfg.solver, SolverMethod::Gradient);
        assert!(cfg.prediction.is_none());
        assert!(cfg.horizon.is_none());
        assert_eq!(cfg.inner, InnerSolve::default());
        cfg.validate().unwrap();

        let cfg: OnlineConfig = serde_json::from_str(
            r#"{
                "solver": "proximal-point",
                "step": 0.1,
                "n_corr": 1,
                "n_pred": 2,
                "prediction": {"kind": "extrapolation", "past": 3}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.solver, SolverMethod::ProximalPoint);
        assert_eq!(cfg.prediction, Some(PredictionStrategy::Extrapolation { past: 3 }));
    }
}

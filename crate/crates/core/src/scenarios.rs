//! Ready-made experiment scenarios with serializable configurations.
//!
//! Two experiments are packaged here so they can be launched from the command
//! line or from tests with nothing but a config document and a seed:
//!
//! - [`benchmark`]: a scalar cost whose minimizer chases a slow cosine,
//!   solved once with correction steps only and once with the full
//!   prediction–correction loop, to expose how much a predictor buys.
//! - [`distributed_regression`]: a network of agents jointly fitting a
//!   drifting scalar signal from noisy per-agent measurements, repeated over
//!   several topologies on identical data so the traces isolate the effect
//!   of the communication structure.
//!
//! Everything is deterministic in the seed: data, random topologies, and any
//! channel randomness derive from it, so a rerun with the same config and
//! seed reproduces every trace bit for bit.

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;
use std::sync::Arc;


use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{
    CosineSoftplus, Cost, CostError, DiscreteDynamicCost, DynamicCost, Quadratic,
};
use crate::distributed::{
    dgd, stack_states, DistributedConfig, DistributedError, SeparableCost, StepSchedule,
};
use crate::networks::{Channel, Graph, Network, NetworkError};
use crate::online::{
    run_correction_only, run_online, trace_from_iterates, OnlineConfig, OptimumOracle, RunError,
    RunTrace, SolverMethod,
};
use crate::prediction::PredictionStrategy;
use crate::sets::{SetError, TimeGrid};
use crate::tensor;

/// The scenario identifiers the command line accepts.
pub const SCENARIO_IDS: &[&str] = &["benchmark", "distributed-regression"];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Distributed(#[from] DistributedError),
    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),
}

/// Settings of the scalar tracking benchmark.
///
/// The cost is `½(x − cos(omega·t))² + eps·softplus(phi·x)` sampled every
/// `ts` seconds on `[0, t_max]`. Both runs start from `x0` and spend `n_corr`
/// gradient steps of size `step` per sample; the prediction–correction run
/// additionally spends `n_pred` steps on a cost extrapolated through the last
/// `past` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub omega: f64,
    pub eps: f64,
    pub phi: f64,
    pub ts: f64,
    pub t_max: f64,
    pub n_pred: usize,
    pub n_corr: usize,
    pub step: f64,
    pub past: usize,
    pub x0: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            omega: 0.02 * PI,
            eps: 7.5,
            phi: 1.75,
            ts: 0.1,
            t_max: 1e4,
            n_pred: 5,
            n_corr: 5,
            step: 0.2,
            past: 2,
            x0: 0.0,
        }
    }
}

/// The two traces the benchmark produces on the same cost.
#[derive(Debug, Clone)]
pub struct BenchmarkTraces {
    pub correction_only: RunTrace,
    pub prediction_correction: RunTrace,
}

/// Runs the tracking benchmark: correction-only and prediction–correction on
/// the same sampled cost, with the per-sample optimum found by Newton descent.
pub fn benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkTraces, ScenarioError> {
    let grid = TimeGrid::from_duration(0.0, cfg.ts, cfg.t_max)?;
    let cost = CosineSoftplus::new(cfg.omega, cfg.eps, cfg.phi, grid)?;
    let x0 = tensor::scalar(cfg.x0);

    let correction = OnlineConfig::correction_only(SolverMethod::Gradient, cfg.step, cfg.n_corr);
    let mut prediction = correction.clone();
    prediction.n_pred = cfg.n_pred;
    prediction.prediction = Some(PredictionStrategy::Extrapolation { past: cfg.past });

    Ok(BenchmarkTraces {
        correction_only: run_correction_only(&cost, &x0, &OptimumOracle::Newton, &correction)?,
        prediction_correction: run_online(&cost, &x0, &OptimumOracle::Newton, &prediction)?,
    })
}

/// A communication topology the regression scenario can run over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TopologySpec {
    /// Erdős–Rényi graph with link probability `p`, seeded by the scenario.
    Random { p: f64 },
    /// Ring-like graph joining each agent to its `degree` nearest peers on
    /// either side.
    Circulant { degree: usize },
    Complete,
    /// Adjacency matrix loaded from a CSV file.
    Custom { path: PathBuf },
}

impl TopologySpec {
    /// Short name used for trace files and report rows.
    pub fn label(&self) -> String {
        match self {
            TopologySpec::Random { .. } => "random".into(),
            TopologySpec::Circulant { degree } => format!("circulant-{degree}"),
            TopologySpec::Complete => "complete".into(),
            TopologySpec::Custom { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".into()),
        }
    }

    pub fn build(&self, n: usize, seed: u64) -> Result<Graph, ScenarioError> {
        let graph = match self {
            TopologySpec::Random { p } => Graph::random(n, *p, seed)?,
            TopologySpec::Circulant { degree } => Graph::circulant(n, *degree)?,
            TopologySpec::Complete => Graph::complete(n)?,
            TopologySpec::Custom { path } => Graph::read_csv(path)
                .map_err(|e| ScenarioError::InvalidConfig(format!("{}: {e}", path.display())))?,
        };
        if graph.n() != n {
            return Err(ScenarioError::InvalidConfig(format!(
                "topology {} has {} nodes, the scenario needs {n}",
                self.label(),
                graph.n()
            )));
        }
        Ok(graph)
    }
}

/// Settings of the distributed regression scenario.
///
/// Each of `n_agents` agents observes `b_{i,k} = a_i·y_k + e_{i,k}` of the
/// common signal `y_k = signal_amplitude · sin(2π k / signal_period_samples)`
/// through its own gain `a_i` (standard normal, redrawn until
/// `|a_i| ≥ min_gain`) and noise `e_{i,k} ~ N(0, noise_sigma²)`. The network
/// runs decentralized gradient descent: `iterations_per_sample` rounds per
/// sampling instant, with the step at instant `k` given by `schedule`.
/// Every topology in `topologies` is run over the very same data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    pub n_agents: usize,
    pub ts: f64,
    pub num_samples: usize,
    pub signal_amplitude: f64,
    pub signal_period_samples: f64,
    pub noise_sigma: f64,
    pub min_gain: f64,
    pub schedule: StepSchedule,
    pub iterations_per_sample: usize,
    pub topologies: Vec<TopologySpec>,
    pub channel: Channel,
    pub x0: f64,
}

impl Default for RegressionConfig {
    // The diminishing schedule matters: once the step has decayed, the
    // residual is governed by how each topology's mixing digests the freshly
    // injected disagreement, which is what the scenario is meant to compare.
    // Under a large fixed step every topology's residual collapses onto the
    // common signal-drift floor and the comparison says nothing.
    fn default() -> Self {
        RegressionConfig {
            n_agents: 25,
            ts: 0.1,
            num_samples: 1000,
            signal_amplitude: 1.0,
            signal_period_samples: 400.0,
            noise_sigma: 0.1,
            min_gain: 0.1,
            schedule: StepSchedule::Diminishing { base: 0.5, gamma: 0.9 },
            iterations_per_sample: 1,
            topologies: vec![
                TopologySpec::Random { p: 0.4 },
                TopologySpec::Circulant { degree: 1 },
                TopologySpec::Circulant { degree: 2 },
                TopologySpec::Complete,
            ],
            channel: Channel::Lossless,
            x0: 0.0,
        }
    }
}

/// One topology's result in a regression scenario.
#[derive(Debug, Clone)]
pub struct RegressionRun {
    pub label: String,
    pub trace: RunTrace,
}

// Distinct, order-stable seed streams: the data must not depend on the
// topology list, and each topology's graph and channel randomness must not
// depend on the other topologies' consumption.
fn graph_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(0x1000).wrapping_add(index as u64)
}

fn network_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(0x2000).wrapping_add(index as u64)
}

/// Runs the regression scenario: identical data over every configured
/// topology, one trace per topology. The tracking metrics compare the stacked
/// network state against the per-sample least-squares solution
/// `x*_k = Σ_i a_i b_{i,k} / Σ_i a_i²`.
pub fn distributed_regression(
    cfg: &RegressionConfig,
    seed: u64,
) -> Result<Vec<RegressionRun>, ScenarioError> {
    if cfg.n_agents < 2 {
        return Err(ScenarioError::InvalidConfig(format!(
            "need at least 2 agents, got {}",
            cfg.n_agents
        )));
    }
    if cfg.num_samples == 0 {
        return Err(ScenarioError::InvalidConfig("need at least one sample".into()));
    }
    if !(cfg.signal_period_samples > 0.0) {
        return Err(ScenarioError::InvalidConfig(format!(
            "signal period must be positive, got {}",
            cfg.signal_period_samples
        )));
    }
    if cfg.topologies.is_empty() {
        return Err(ScenarioError::InvalidConfig("no topologies configured".into()));
    }
    let n = cfg.n_agents;
    let grid = TimeGrid::new(0.0, cfg.ts, cfg.num_samples)?;

    // Shared data: gains first, then measurements sample-major, so the draws
    // are a fixed function of the seed alone.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|_| {
        ScenarioError::InvalidConfig(format!("noise sigma must be finite and ≥ 0, got {}", cfg.noise_sigma))
    })?;
    let gains: Vec<f64> = (0..n)
        .map(|_| loop {
            let a: f64 = standard.sample(&mut rng);
            if a.abs() >= cfg.min_gain {
                break a;
            }
        })
        .collect();
    let mut measurements = vec![vec![0.0; n]; cfg.num_samples];
    for (k, row) in measurements.iter_mut().enumerate() {
        let y = cfg.signal_amplitude * (TAU * k as f64 / cfg.signal_period_samples).sin();
        for (i, b) in row.iter_mut().enumerate() {
            *b = gains[i] * y + noise.sample(&mut rng);
        }
    }

    // Local costs ½(a_i x − b_{i,k})², expanded to quadratic coefficients.
    let locals: Vec<Arc<dyn DynamicCost>> = (0..n)
        .map(|i| {
            let a = gains[i];
            let samples: Vec<Arc<dyn Cost>> = measurements
                .iter()
                .map(|row| {
                    let b = row[i];
                    Arc::new(Quadratic::univariate(a * a, -a * b, 0.5 * b * b)) as Arc<dyn Cost>
                })
                .collect();
            DiscreteDynamicCost::new(samples, grid.clone())
                .map(|c| Arc::new(c) as Arc<dyn DynamicCost>)
        })
        .collect::<Result<_, _>>()?;
    let cost = SeparableCost::new(locals)?;

    let gain_sq: f64 = gains.iter().map(|a| a * a).sum();
    let optima: Vec<f64> = measurements
        .iter()
        .map(|row| gains.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() / gain_sq)
        .collect();

    let mut runs = Vec::with_capacity(cfg.topologies.len());
    for (index, topology) in cfg.topologies.iter().enumerate() {
        let graph = topology.build(n, graph_seed(seed, index))?;
        let w = graph.metropolis_weights();
        let mut net = Network::new(graph, cfg.channel, network_seed(seed, index))?;

        let mut state = stack_states(&vec![tensor::scalar(cfg.x0); n])?;
        let mut iterates = Vec::with_capacity(cfg.num_samples);
        for k in 0..cfg.num_samples {
            let t = grid.time_at(k);
            let round = DistributedConfig::fixed(cfg.schedule.at(k), cfg.iterations_per_sample);
            state = dgd(&cost, t, &mut net, &w, &state, &round)?;
            iterates.push(state.clone());
        }

        let oracle_grid = grid.clone();
        let oracle_optima = optima.clone();
        let oracle = OptimumOracle::Analytic(Box::new(move |t| {
            let k = oracle_grid.nearest(t).expect("metrics are evaluated on grid instants");
            let mut star = tensor::zeros(&[1, n]);
            star.fill(oracle_optima[k]);
            star
        }));
        runs.push(RegressionRun {
            label: topology.label(),
            trace: trace_from_iterates(&cost, &iterates, &oracle)?,
        });
    }
    Ok(runs)
}

//! Seeded simulation of synchronous message passing between agents.
//!
//! A [`Network`] couples an undirected [`Graph`] with a [`Channel`] that
//! distorts packets in transit. Every send/receive pair is reproducible: each
//! ordered pair of agents owns its own counted ChaCha stream derived from the
//! master seed, so traffic depends only on the seed and on how often that pair
//! has talked — never on the interleaving of other transmissions.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::collections::VecDeque;
use std::path::Path;

use crate::tensor::Tensor;

#[derive(Error, Debug)]
pub enum NetworkError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("no connected graph found in {attempts} attempts")]
    Disconnected { attempts: usize },
    #[error("agents {from} and {to} are not linked")]
    NotAnEdge { from: usize, to: usize },
    #[error("agent index {agent} out of range for {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid mixing weights: {0}")]
    InvalidWeights(String),
    #[error("state mismatch: {0}")]
    StateMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected, unweighted graph over `n` agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adjacency: Array2<f64>,
    connected: bool,
}

impl Graph {
    /// Builds a graph from a symmetric 0/1 adjacency matrix with zero
    /// diagonal.
    pub fn from_adjacency(adjacency: Array2<f64>) -> Result<Self, NetworkError> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(NetworkError::InvalidGraph(format!(
                "adjacency must be square and nonempty, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        for ((i, j), &v) in adjacency.indexed_iter() {
            if v != 0.0 && v != 1.0 {
                return Err(NetworkError::InvalidGraph(format!(
                    "adjacency entries must be 0 or 1, got {v} at ({i}, {j})"
                )));
            }
            if i == j && v != 0.0 {
                return Err(NetworkError::InvalidGraph(format!(
                    "self-loop at agent {i}"
                )));
            }
            if adjacency[[j, i]] != v {
                return Err(NetworkError::InvalidGraph(format!(
                    "asymmetric entries at ({i}, {j})"
                )));
            }
        }
        let connected = is_connected(&adjacency);
        Ok(Graph { n, adjacency, connected })
    }

    /// Every pair of agents linked.
    pub fn complete(n: usize) -> Result<Self, NetworkError> {
        check_order(n)?;
        let mut adjacency = Array2::ones((n, n));
        for i in 0..n {
            adjacency[[i, i]] = 0.0;
        }
        Graph::from_adjacency(adjacency)
    }

    /// Ring lattice: each agent linked to its `degree` nearest neighbors on
    /// each side.
    pub fn circulant(n: usize, degree: usize) -> Result<Self, NetworkError> {
        check_order(n)?;
        if degree == 0 || 2 * degree >= n {
            return Err(NetworkError::InvalidGraph(format!(
                "circulant degree must satisfy 0 < 2·degree < n, got degree {degree} for n = {n}"
            )));
        }
        let mut adjacency = Array2::zeros((n, n));
        for i in 0..n {
            for k in 1..=degree {
                let j = (i + k) % n;
                adjacency[[i, j]] = 1.0;
                adjacency[[j, i]] = 1.0;
            }
        }
        Graph::from_adjacency(adjacency)
    }

    /// Erdős–Rényi graph with link probability `p`, resampled until connected
    /// (at most 100 attempts).
    pub fn random(n: usize, p: f64, seed: u64) -> Result<Self, NetworkError> {
        check_order(n)?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(NetworkError::InvalidGraph(format!(
                "link probability must lie in (0, 1], got {p}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        const ATTEMPTS: usize = 100;
        for _ in 0..ATTEMPTS {
            let mut adjacency = Array2::zeros((n, n));
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < p {
                        adjacency[[i, j]] = 1.0;
                        adjacency[[j, i]] = 1.0;
                    }
                }
            }
            if is_connected(&adjacency) {
                return Graph::from_adjacency(adjacency);
            }
        }
        Err(NetworkError::Disconnected { attempts: ATTEMPTS })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.adjacency[[i, j]] != 0.0
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.adjacency[[i, j]] != 0.0).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency.row(i).iter().filter(|&&v| v != 0.0).count()
    }

    /// All links as `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.adjacency[[i, j]] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Metropolis–Hastings mixing matrix: `W_ij = 1/(1 + max(d_i, d_j))` on
    /// links, diagonal absorbing the remainder. Doubly stochastic on any
    /// graph.
    pub fn metropolis_weights(&self) -> Array2<f64> {
        let n = self.n;
        let degrees: Vec<usize> = (0..n).map(|i| self.degree(i)).collect();
        let mut w = Array2::zeros((n, n));
        for (i, j) in self.edges() {
            let wij = 1.0 / (1.0 + degrees[i].max(degrees[j]) as f64);
            w[[i, j]] = wij;
            w[[j, i]] = wij;
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[[i, j]]).sum();
            w[[i, i]] = 1.0 - off;
        }
        w
    }

    /// Adjacency matrix as CSV: `n` lines of `n` comma-separated 0/1 entries.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let row: Vec<&str> = (0..self.n)
                .map(|j| if self.adjacency[[i, j]] != 0.0 { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self, NetworkError> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let n = rows.len();
        let mut adjacency = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            let entries: Vec<&str> = row.split(',').collect();
            if entries.len() != n {
                return Err(NetworkError::InvalidGraph(format!(
                    "line {} has {} entries, expected {n}",
                    i + 1,
                    entries.len()
                )));
            }
            for (j, entry) in entries.iter().enumerate() {
                adjacency[[i, j]] = match entry.trim() {
                    "0" => 0.0,
                    "1" => 1.0,
                    other => {
                        return Err(NetworkError::InvalidGraph(format!(
                            "entry ({}, {}) is {other:?}, expected 0 or 1",
                            i + 1,
                            j + 1
                        )))
                    }
                };
            }
        }
        Graph::from_adjacency(adjacency)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        Ok(std::fs::write(path, self.to_csv())?)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        Graph::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

fn check_order(n: usize) -> Result<(), NetworkError> {
    if n < 2 {
        return Err(NetworkError::InvalidGraph(format!(
            "a graph needs at least 2 agents, got {n}"
        )));
    }
    Ok(())
}

fn is_connected(adjacency: &Array2<f64>) -> bool {
    let n = adjacency.nrows();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if adjacency[[i, j]] != 0.0 && !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

/// What happens to a packet in transit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Channel {
    /// Packets arrive bit-exactly.
    Lossless,
    /// Each transmission is dropped independently with probability `p_drop`.
    Lossy { p_drop: f64 },
    /// Independent zero-mean Gaussian noise with deviation `sigma` is added
    /// to every entry.
    Noisy { sigma: f64 },
    /// Every entry is rounded to the nearest multiple of `delta`, ties to
    /// even.
    Quantized { delta: f64 },
}

impl Channel {
    fn validate(&self) -> Result<(), NetworkError> {
        match *self {
            Channel::Lossless => Ok(()),
            Channel::Lossy { p_drop } => {
                if (0.0..=1.0).contains(&p_drop) {
                    Ok(())
                } else {
                    Err(NetworkError::InvalidChannel(format!(
                        "drop probability must lie in [0, 1], got {p_drop}"
                    )))
                }
            }
            Channel::Noisy { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(NetworkError::InvalidChannel(format!(
                        "noise deviation must be positive and finite, got {sigma}"
                    )))
                }
            }
            Channel::Quantized { delta } => {
                if delta > 0.0 && delta.is_finite() {
                    Ok(())
                } else {
                    Err(NetworkError::InvalidChannel(format!(
                        "quantization step must be positive and finite, got {delta}"
                    )))
                }
            }
        }
    }
}

/// A single synchronous simulation: a graph, a channel, and one pending-packet
/// slot per ordered agent pair.
///
/// Sends overwrite the pair's slot (a dropped transmission leaves it empty);
/// [`Network::receive`] is a destructive read.
#[derive(Debug, Clone)]
pub struct Network {
    graph: Graph,
    channel: Channel,
    seed: u64,
    slots: Vec<Option<Tensor>>,
    counters: Vec<u64>,
}

impl Network {
    pub fn new(graph: Graph, channel: Channel, seed: u64) -> Result<Self, NetworkError> {
        channel.validate()?;
        let pairs = graph.n * graph.n;
        Ok(Network {
            graph,
            channel,
            seed,
            slots: vec![None; pairs],
            counters: vec![0; pairs],
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    fn check_agent(&self, agent: usize) -> Result<(), NetworkError> {
        if agent < self.graph.n {
            Ok(())
        } else {
            Err(NetworkError::AgentOutOfRange { agent, n: self.graph.n })
        }
    }

    /// The ChaCha stream for this pair's next transmission. Keyed by master
    /// seed, sender, receiver, and a per-pair counter, so draws do not depend
    /// on what other pairs are doing.
    fn transmission_rng(&mut self, from: usize, to: usize) -> ChaCha8Rng {
        let idx = from * self.graph.n + to;
        let counter = self.counters[idx];
        self.counters[idx] += 1;
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(from as u64).to_le_bytes());
        key[16..24].copy_from_slice(&(to as u64).to_le_bytes());
        key[24..32].copy_from_slice(&counter.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// Transmits `packet` from `from` to `to` through the channel.
    pub fn send(&mut self, from: usize, to: usize, packet: &Tensor) -> Result<(), NetworkError> {
        self.check_agent(from)?;
        self.check_agent(to)?;
        if !self.graph.is_edge(from, to) {
            return Err(NetworkError::NotAnEdge { from, to });
        }
        let delivered = match self.channel {
            Channel::Lossless => Some(packet.clone()),
            Channel::Lossy { p_drop } => {
                let mut rng = self.transmission_rng(from, to);
                if rng.random::<f64>() < p_drop {
                    None
                } else {
                    Some(packet.clone())
                }
            }
            Channel::Noisy { sigma } => {
                let mut rng = self.transmission_rng(from, to);
                let noise = Normal::new(0.0, sigma).expect("validated at construction");
                Some(packet.mapv(|v| v + noise.sample(&mut rng)))
            }
            Channel::Quantized { delta } => {
                Some(packet.mapv(|v| (v / delta).round_ties_even() * delta))
            }
        };
        self.slots[from * self.graph.n + to] = delivered;
        Ok(())
    }

    /// Destructive read of the pending packet sent from `from` to `to`.
    /// `None` means nothing arrived — never sent, already read, or dropped.
    pub fn receive(&mut self, to: usize, from: usize) -> Option<Tensor> {
        assert!(
            to < self.graph.n && from < self.graph.n,
            "agent index out of range for {} agents",
            self.graph.n
        );
        self.slots[from * self.graph.n + to].take()
    }

    /// Sends `packet` to every neighbor of `from`, with independent channel
    /// draws per link.
    pub fn broadcast(&mut self, from: usize, packet: &Tensor) -> Result<(), NetworkError> {
        self.check_agent(from)?;
        for to in self.graph.neighbors(from) {
            self.send(from, to, packet)?;
        }
        Ok(())
    }

    /// One synchronous mixing round: every agent broadcasts its state, then
    /// each agent `i` forms `Σ_j W_ij · (packet from j)`, using its own state
    /// for the diagonal term and substituting its own state wherever a packet
    /// was dropped.
    pub fn consensus_round(
        &mut self,
        states: &[Tensor],
        w: &Array2<f64>,
    ) -> Result<Vec<Tensor>, NetworkError> {
        let n = self.graph.n;
        if states.len() != n {
            return Err(NetworkError::StateMismatch(format!(
                "got {} states for {n} agents",
                states.len()
            )));
        }
        for s in &states[1..] {
            if s.shape() != states[0].shape() {
                return Err(NetworkError::StateMismatch(
                    "all agent states must share one shape".into(),
                ));
            }
        }
        self.check_weights(w)?;
        for (i, state) in states.iter().enumerate() {
            self.broadcast(i, state)?;
        }
        let mut mixed = Vec::with_capacity(n);
        for i in 0..n {
            let mut next = states[i].mapv(|v| v * w[[i, i]]);
            for j in self.graph.neighbors(i) {
                // Drain the slot even when the weight is zero, so stale
                // packets cannot leak into a later round.
                let packet = self.receive(i, j);
                let wij = w[[i, j]];
                if wij != 0.0 {
                    let term = packet.as_ref().unwrap_or(&states[i]);
                    next = next + &term.mapv(|v| v * wij);
                }
            }
            mixed.push(next);
        }
        Ok(mixed)
    }

    fn check_weights(&self, w: &Array2<f64>) -> Result<(), NetworkError> {
        let n = self.graph.n;
        if w.nrows() != n || w.ncols() != n {
            return Err(NetworkError::InvalidWeights(format!(
                "weight matrix must be {n}x{n}, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        for ((i, j), &v) in w.indexed_iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(NetworkError::InvalidWeights(format!(
                    "weight ({i}, {j}) = {v} must be finite and nonnegative"
                )));
            }
            if i != j && v != 0.0 && !self.graph.is_edge(i, j) {
                return Err(NetworkError::InvalidWeights(format!(
                    "weight ({i}, {j}) = {v} lies outside the graph"
                )));
            }
        }
        for i in 0..n {
            let sum: f64 = w.row(i).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(NetworkError::InvalidWeights(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

//! Exponential random graph kernel. Observations are undirected graphs on a
//! fixed node set, compared through their normalized-Laplacian spectra.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::KernelModel;
use crate::error::{Error, Result};

pub const ERGM_PRIOR_MEAN: [f64; 4] = [-4.0, 3.0, 15.0, -20.0];

/// Coefficients on `(2 * edges, #deg 0, #deg in [2, 10], #deg in [11, 50])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgmParams(pub [f64; 4]);

/// Simple undirected graph stored as a dense symmetric adjacency matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    nodes: usize,
    adj: Vec<bool>,
    degree: Vec<usize>,
    edges: usize,
}

impl Graph {
    pub fn empty(nodes: usize) -> Self {
        Self {
            nodes,
            adj: vec![false; nodes * nodes],
            degree: vec![0; nodes],
            edges: 0,
        }
    }

    pub fn from_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(nodes);
        for &(i, j) in edges {
            if i >= nodes || j >= nodes {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for {nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop at node {i}")));
            }
            if !g.has_edge(i, j) {
                g.toggle(i, j);
            }
        }
        Ok(g)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.nodes + j]
    }

    pub fn toggle(&mut self, i: usize, j: usize) {
        debug_assert!(i != j);
        let on = !self.has_edge(i, j);
        self.adj[i * self.nodes + j] = on;
        self.adj[j * self.nodes + i] = on;
        if on {
            self.degree[i] += 1;
            self.degree[j] += 1;
            self.edges += 1;
        } else {
            self.degree[i] -= 1;
            self.degree[j] -= 1;
            self.edges -= 1;
        }
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edges);
        for i in 0..self.nodes {
            for j in i + 1..self.nodes {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Relabels node `v` to `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let edges: Vec<_> = self.edges().into_iter().map(|(i, j)| (perm[i], perm[j])).collect();
        Self::from_edges(self.nodes, &edges).expect("permutation keeps edges valid")
    }
}

fn degree_features(d: usize) -> [f64; 3] {
    [
        (d == 0) as u8 as f64,
        (2..=10).contains(&d) as u8 as f64,
        (11..=50).contains(&d) as u8 as f64,
    ]
}

pub fn ergm_stats(g: &Graph) -> [f64; 4] {
    let mut s = [2.0 * g.edges as f64, 0.0, 0.0, 0.0];
    for &d in &g.degree {
        let f = degree_features(d);
        s[1] += f[0];
        s[2] += f[1];
        s[3] += f[2];
    }
    s
}

/// Change in the statistics when toggling dyad `(i, j)`.
fn toggle_delta(g: &Graph, i: usize, j: usize) -> [f64; 4] {
    let add = !g.has_edge(i, j);
    let step: isize = if add { 1 } else { -1 };
    let mut delta = [2.0 * step as f64, 0.0, 0.0, 0.0];
    for v in [i, j] {
        let before = degree_features(g.degree[v]);
        let after = degree_features((g.degree[v] as isize + step) as usize);
        for k in 0..3 {
            delta[k + 1] += after[k] - before[k];
        }
    }
    delta
}

/// Single-dyad toggle Metropolis from the empty graph. A sweep makes
/// `M (M - 1) / 2` proposals, each on a uniformly chosen dyad, accepted with
/// probability `min(1, exp(theta . delta))`. Random (rather than systematic)
/// dyad order keeps the chain aperiodic when `theta . delta = 0`.
pub fn ergm_sample<R: Rng + ?Sized>(
    nodes: usize,
    theta: &ErgmParams,
    sweeps: usize,
    rng: &mut R,
) -> Graph {
    let mut g = Graph::empty(nodes);
    ergm_continue(&mut g, theta, sweeps, rng);
    g
}

fn ergm_continue<R: Rng + ?Sized>(g: &mut Graph, theta: &ErgmParams, sweeps: usize, rng: &mut R) {
    let n = g.nodes;
    if n < 2 {
        return;
    }
    let dyads = n * (n - 1) / 2;
    for _ in 0..sweeps * dyads {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let d = toggle_delta(g, i, j);
        let log_ratio: f64 = d.iter().zip(theta.0.iter()).map(|(a, b)| a * b).sum();
        if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
            g.toggle(i, j);
        }
    }
}

/// Sorted eigenvalues of `I - D^-1/2 A D^-1/2`; isolated nodes contribute a
/// zero row and column.
pub fn normalized_laplacian_spectrum(g: &Graph) -> Vec<f64> {
    let n = g.nodes;
    if n == 0 {
        return Vec::new();
    }
    let inv_sqrt: Vec<f64> = g
        .degree
        .iter()
        .map(|&d| if d > 0 { 1.0 / (d as f64).sqrt() } else { 0.0 })
        .collect();
    let lap = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            if g.degree[i] > 0 {
                1.0
            } else {
                0.0
            }
        } else if g.has_edge(i, j) {
            -inv_sqrt[i] * inv_sqrt[j]
        } else {
            0.0
        }
    });
    let mut values: Vec<f64> = SymmetricEigen::new(lap).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn spectral_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A graph with its spectrum computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGraph {
    graph: Graph,
    spectrum: Vec<f64>,
}

impl SpectralGraph {
    pub fn new(graph: Graph) -> Self {
        let spectrum = normalized_laplacian_spectrum(&graph);
        Self { graph, spectrum }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgmModel {
    pub nodes: usize,
    pub sweeps: usize,
    pub prior_mean: [f64; 4],
    pub prior_var: f64,
}

impl ErgmModel {
    pub fn new(nodes: usize, sweeps: usize) -> Result<Self> {
        if nodes < 2 || sweeps == 0 {
            return Err(Error::InvalidParameter(format!(
                "ERGM needs at least 2 nodes and 1 sweep, got {nodes} nodes, {sweeps} sweeps"
            )));
        }
        Ok(Self {
            nodes,
            sweeps,
            prior_mean: ERGM_PRIOR_MEAN,
            prior_var: 10.0,
        })
    }

    pub fn preset() -> Self {
        Self::new(100, 20).expect("valid preset")
    }
}

impl KernelModel for ErgmModel {
    type Param = ErgmParams;
    type Obs = SpectralGraph;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> ErgmParams {
        let sd = self.prior_var.sqrt();
        let mut theta = self.prior_mean;
        for t in &mut theta {
            *t += sd * rng.sample::<f64, _>(StandardNormal);
        }
        ErgmParams(theta)
    }

    fn sample_datum<R: Rng + ?Sized>(&self, param: &ErgmParams, rng: &mut R) -> SpectralGraph {
        SpectralGraph::new(ergm_sample(self.nodes, param, self.sweeps, rng))
    }

    fn distance(&self, a: &SpectralGraph, b: &SpectralGraph) -> f64 {
        spectral_distance(&a.spectrum, &b.spectrum)
    }
}

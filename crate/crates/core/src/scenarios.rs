//! Synthetic datasets with known clusterings.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{ergm_sample, ErgmParams, Graph, GkParams};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Gaussian,
    Gk1,
    Gk2,
    Ergm,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "gk1" => Ok(Self::Gk1),
            "gk2" => Ok(Self::Gk2),
            "ergm" => Ok(Self::Ergm),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario {other:?} (expected gaussian, gk1, gk2 or ergm)"
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Gk1 => "gk1",
            Self::Gk2 => "gk2",
            Self::Ergm => "ergm",
        })
    }
}

/// Component parameters of the two-component g-and-k mixtures.
pub fn gk_components() -> [GkParams; 2] {
    [
        GkParams::new(-3.0, 0.75, -0.9, 0.1).expect("valid component"),
        GkParams::new(3.0, 0.5, 0.4, 0.5).expect("valid component"),
    ]
}

/// A near-empty population (the base-measure mean) and a dense, flat one.
pub const ERGM_POPULATIONS: [[f64; 4]; 2] = [[-4.0, 3.0, 15.0, -20.0], [-1.0, 0.0, 0.0, 0.0]];

/// Correlation between coordinates in the bivariate g-and-k scenario.
pub const GK2_RHO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    Scalar(Vec<f64>),
    Bivariate(Vec<[f64; 2]>),
    Graphs { nodes: usize, graphs: Vec<Graph> },
}

impl Observations {
    pub fn len(&self) -> usize {
        match self {
            Self::Scalar(v) => v.len(),
            Self::Bivariate(v) => v.len(),
            Self::Graphs { graphs, .. } => graphs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scenario: Scenario,
    pub observations: Observations,
    pub truth: Partition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOptions {
    /// Node count for graph scenarios.
    pub nodes: usize,
    pub sweeps: usize,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self { nodes: 100, sweeps: 20 }
    }
}

/// Draws `n` observations with their component labels.
pub fn simulate(scenario: Scenario, n: usize, seed: u64, options: ScenarioOptions) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 observations, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight_first = match scenario {
        Scenario::Gaussian | Scenario::Gk1 => 0.75,
        Scenario::Gk2 | Scenario::Ergm => 0.5,
    };
    let labels: Vec<usize> = (0..n)
        .map(|_| usize::from(rng.random::<f64>() >= weight_first))
        .collect();
    let observations = match scenario {
        Scenario::Gaussian => {
            let means = [-3.0, 3.0];
            Observations::Scalar(
                labels
                    .iter()
                    .map(|&c| means[c] + rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            )
        }
        Scenario::Gk1 => {
            let comps = gk_components();
            Observations::Scalar(
                labels
                    .iter()
                    .map(|&c| comps[c].transform(rng.sample(StandardNormal)))
                    .collect(),
            )
        }
        Scenario::Gk2 => {
            let comps = gk_components();
            let tail = (1.0 - GK2_RHO * GK2_RHO).sqrt();
            Observations::Bivariate(
                labels
                    .iter()
                    .map(|&c| {
                        let z1: f64 = rng.sample(StandardNormal);
                        let w: f64 = rng.sample(StandardNormal);
                        let z2 = GK2_RHO * z1 + tail * w;
                        [comps[c].transform(z1), comps[c].transform(z2)]
                    })
                    .collect(),
            )
        }
        Scenario::Ergm => {
            if options.nodes < 2 || options.sweeps == 0 {
                return Err(Error::InvalidParameter(format!(
                    "graph scenario needs >= 2 nodes and >= 1 sweep, got {} and {}",
                    options.nodes, options.sweeps
                )));
            }
            let graphs = labels
                .iter()
                .map(|&c| {
                    ergm_sample(options.nodes, &ErgmParams(ERGM_POPULATIONS[c]), options.sweeps, &mut rng)
                })
                .collect();
            Observations::Graphs {
                nodes: options.nodes,
                graphs,
            }
        }
    };
    Ok(Dataset {
        scenario,
        observations,
        truth: Partition::canonicalize(&labels)?,
    })
}

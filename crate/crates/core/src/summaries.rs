//! Posterior summaries of partition chains.

use std::collections::HashMap;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{Partition, SimilarityMatrix};

fn check_weights(chain: &[Partition], weights: Option<&[f64]>) -> Result<()> {
    if chain.is_empty() {
        return Err(Error::Empty("partition chain"));
    }
    let n = chain[0].n();
    if let Some(bad) = chain.iter().find(|p| p.n() != n) {
        return Err(Error::SizeMismatch { left: n, right: bad.n() });
    }
    if let Some(w) = weights {
        if w.len() != chain.len() {
            return Err(Error::SizeMismatch { left: chain.len(), right: w.len() });
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("weights must be nonnegative with positive sum".into()));
        }
    }
    Ok(())
}

/// Fraction of samples in which each pair of items shares a block.
pub fn similarity(chain: &[Partition]) -> Result<SimilarityMatrix> {
    similarity_weighted(chain, None)
}

pub fn similarity_weighted(chain: &[Partition], weights: Option<&[f64]>) -> Result<SimilarityMatrix> {
    check_weights(chain, weights)?;
    let n = chain[0].n();
    let mut values = vec![0.0; n * n];
    let mut total = 0.0;
    for (t, p) in chain.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[t]);
        if w == 0.0 {
            continue;
        }
        total += w;
        for block in p.blocks() {
            for &i in &block {
                for &j in &block {
                    values[i * n + j] += w;
                }
            }
        }
    }
    values.iter_mut().for_each(|v| *v /= total);
    Ok(SimilarityMatrix::from_raw(n, values, chain.len()))
}

/// Weighted relative frequency of each distinct partition, keyed by its
/// canonical labels.
pub fn partition_frequencies(
    chain: &[Partition],
    weights: Option<&[f64]>,
) -> Result<HashMap<Vec<usize>, f64>> {
    check_weights(chain, weights)?;
    let mut freq: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut total = 0.0;
    for (t, p) in chain.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[t]);
        total += w;
        *freq.entry(p.labels().to_vec()).or_insert(0.0) += w;
    }
    freq.values_mut().for_each(|v| *v /= total);
    Ok(freq)
}

/// Total-variation distance between two distributions given as frequency maps.
pub fn total_variation(a: &HashMap<Vec<usize>, f64>, b: &HashMap<Vec<usize>, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            sum += pb;
        }
    }
    0.5 * sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimateOptions {
    /// Keep every `thin`-th sample when estimating the expected loss.
    pub thin: usize,
    pub greedy_passes: usize,
    pub seed: u64,
}

impl Default for PointEstimateOptions {
    fn default() -> Self {
        Self {
            thin: 10,
            greedy_passes: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimate {
    pub partition: Partition,
    /// Estimated posterior expected normalized VI of `partition`.
    pub expected_vi: f64,
    /// Objective after the initial pick and after every improving move.
    pub trace: Vec<f64>,
}

/// Distinct partitions of a thinned chain with their total weight.
struct LossSupport {
    atoms: Vec<(Partition, f64)>,
}

impl LossSupport {
    fn new(chain: &[Partition], weights: Option<&[f64]>, thin: usize) -> Self {
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut atoms: Vec<(Partition, f64)> = Vec::new();
        let mut total = 0.0;
        for t in (0..chain.len()).step_by(thin.max(1)) {
            let w = weights.map_or(1.0, |w| w[t]);
            if w == 0.0 {
                continue;
            }
            total += w;
            let key = chain[t].labels().to_vec();
            match index.get(&key) {
                Some(&i) => atoms[i].1 += w,
                None => {
                    index.insert(key, atoms.len());
                    atoms.push((chain[t].clone(), w));
                }
            }
        }
        atoms.iter_mut().for_each(|a| a.1 /= total);
        Self { atoms }
    }

    fn expected_vi(&self, candidate: &Partition) -> f64 {
        self.atoms
            .iter()
            .map(|(p, w)| w * candidate.normalized_vi(p).expect("common size"))
            .sum()
    }
}

/// Monte Carlo estimate of the posterior expected normalized VI.
pub fn expected_vi(candidate: &Partition, chain: &[Partition], weights: Option<&[f64]>) -> Result<f64> {
    check_weights(chain, weights)?;
    if candidate.n() != chain[0].n() {
        return Err(Error::SizeMismatch { left: candidate.n(), right: chain[0].n() });
    }
    if candidate.n() < 2 {
        return Ok(0.0);
    }
    Ok(LossSupport::new(chain, weights, 1).expected_vi(candidate))
}

/// Best improving merge of two blocks, if any.
fn best_merge(support: &LossSupport, current: &Partition, loss: f64) -> Option<(Partition, f64)> {
    let k = current.k();
    let mut choice: Option<(Partition, f64)> = None;
    for a in 0..k {
        for b in a + 1..k {
            let labels: Vec<usize> = current.labels().iter().map(|&l| if l == b { a } else { l }).collect();
            let cand = Partition::canonicalize(&labels).expect("nonempty");
            let cand_loss = support.expected_vi(&cand);
            if cand_loss < choice.as_ref().map_or(loss, |c| c.1) - 1e-14 {
                choice = Some((cand, cand_loss));
            }
        }
    }
    choice
}

/// Point partition minimizing the expected normalized VI: the best distinct
/// sampled partition, then passes of greedy single-item moves (to another
/// block or a new one, in a seeded random item order) followed by the best
/// merge of two blocks, until a pass makes no improvement or `greedy_passes`
/// passes have run.
pub fn vi_point_estimate(
    chain: &[Partition],
    weights: Option<&[f64]>,
    options: PointEstimateOptions,
) -> Result<PointEstimate> {
    check_weights(chain, weights)?;
    let n = chain[0].n();
    if n < 2 {
        return Ok(PointEstimate {
            partition: chain[0].clone(),
            expected_vi: 0.0,
            trace: vec![0.0],
        });
    }
    let support = LossSupport::new(chain, weights, options.thin);
    let (mut best, mut best_loss) = support
        .atoms
        .iter()
        .map(|(p, _)| (p.clone(), support.expected_vi(p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("support is nonempty");
    let mut trace = vec![best_loss];

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut items: Vec<usize> = (0..n).collect();
    for pass in 0..options.greedy_passes {
        items.shuffle(&mut rng);
        let mut improved = false;
        for &i in &items {
            let mut labels = best.labels().to_vec();
            let k = best.k();
            let own = labels[i];
            let mut choice: Option<(Partition, f64)> = None;
            for target in 0..=k {
                if target == own || (target == k && best.counts()[own] == 1) {
                    continue;
                }
                labels[i] = target;
                let cand = Partition::canonicalize(&labels).expect("nonempty");
                let loss = support.expected_vi(&cand);
                if loss < choice.as_ref().map_or(best_loss, |c| c.1) - 1e-14 {
                    choice = Some((cand, loss));
                }
            }
            if let Some((cand, loss)) = choice {
                debug_assert!(loss < best_loss);
                best = cand;
                best_loss = loss;
                trace.push(loss);
                improved = true;
            }
        }
        // single-item moves cannot dissolve a block whose members only
        // gain by leaving together
        if let Some((cand, loss)) = best_merge(&support, &best, best_loss) {
            best = cand;
            best_loss = loss;
            trace.push(loss);
            improved = true;
        }
        if !improved {
            debug!("greedy search settled after {} passes", pass + 1);
            break;
        }
    }
    Ok(PointEstimate {
        partition: best,
        expected_vi: best_loss,
        trace,
    })
}

/// Effective sample size by Geyer's initial monotone sequence estimator.
///
/// Sums of adjacent autocorrelation pairs are accumulated while positive and
/// forced to be nonincreasing. The result is clamped to `(0, N]`; a constant
/// series returns `N`.
pub fn ess(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InvalidParameter(format!("ESS needs at least 10 values, got {n}")));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("ESS series"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if c0 == 0.0 || series.iter().all(|x| *x == series[0]) {
        return Ok(n as f64);
    }
    let mut tau = -1.0;
    let mut previous = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous);
        tau += 2.0 * pair;
        previous = pair;
        lag += 2;
    }
    let ess = n as f64 / tau.max(1.0 / n as f64);
    Ok(ess.min(n as f64))
}

/// Summary statistics of a partition chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub similarity: SimilarityMatrix,
    pub point_estimate: PointEstimate,
    pub ess_k: f64,
    pub ess_entropy: f64,
    pub mean_k: f64,
    pub acceptance_rate: f64,
    pub mean_attempts: f64,
    /// Normalized VI from the point estimate to the supplied truth.
    pub vi_to_truth: Option<f64>,
}

pub fn summarize(
    chain: &[Partition],
    weights: Option<&[f64]>,
    acceptance_rate: f64,
    mean_attempts: f64,
    truth: Option<&Partition>,
    options: PointEstimateOptions,
) -> Result<ChainSummary> {
    check_weights(chain, weights)?;
    let ks: Vec<f64> = chain.iter().map(|p| p.k() as f64).collect();
    let entropies: Vec<f64> = chain.iter().map(Partition::entropy).collect();
    let ess_or_nan = |s: &[f64]| ess(s).unwrap_or(f64::NAN);
    let point_estimate = vi_point_estimate(chain, weights, options)?;
    let vi_to_truth = match truth {
        Some(t) => Some(point_estimate.partition.normalized_vi(t)?),
        None => None,
    };
    Ok(ChainSummary {
        similarity: similarity_weighted(chain, weights)?,
        ess_k: ess_or_nan(&ks),
        ess_entropy: ess_or_nan(&entropies),
        mean_k: ks.iter().sum::<f64>() / ks.len() as f64,
        point_estimate,
        acceptance_rate,
        mean_attempts,
        vi_to_truth,
    })
}

//! Marginal Gibbs samplers used as baselines.
//!
//! `gibbs_conjugate` integrates the cluster parameters out analytically.
//! `gibbs_mc` keeps them, refreshing each by random-walk Metropolis, and
//! estimates the new-cluster term by averaging the kernel over `m` fresh
//! draws from the base measure.

use std::time::Instant;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{ConjugateModel, DensityModel};
use crate::partition::Partition;
use crate::pitman_yor::{sample_prior_state, PYParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub prior: PYParams,
    /// Auxiliary base-measure draws per item (Monte Carlo variant).
    pub m: usize,
    /// Metropolis sub-steps per cluster per scan (Monte Carlo variant).
    pub rw_steps: usize,
    pub rw_scale: f64,
    pub seed: u64,
    pub stream: u64,
}

impl GibbsConfig {
    pub fn new(iterations: usize, burnin: usize) -> Self {
        Self {
            iterations,
            burnin,
            prior: PYParams::default(),
            m: 10,
            rw_steps: 5,
            rw_scale: 0.25,
            seed: 0,
            stream: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burnin {
            return Err(Error::InvalidParameter(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burnin
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidParameter("need at least one auxiliary draw".into()));
        }
        if !(self.rw_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "random-walk scale must be positive, got {}",
                self.rw_scale
            )));
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSample<P> {
    pub iteration: usize,
    pub partition: Partition,
    /// Cluster parameters in canonical label order (Monte Carlo variant only).
    pub atoms: Vec<P>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsRun<P> {
    pub samples: Vec<GibbsSample<P>>,
    pub burnin: usize,
    /// Metropolis proposals rejected because the density could not be evaluated.
    pub density_failures: u64,
    pub rw_acceptance: f64,
}

impl<P> GibbsRun<P> {
    pub fn kept(&self) -> &[GibbsSample<P>] {
        &self.samples[self.burnin.min(self.samples.len())..]
    }

    pub fn partitions(&self) -> Vec<Partition> {
        self.kept().iter().map(|s| s.partition.clone()).collect()
    }
}

/// Turns log-weights into probabilities in place. Entries of `-inf` get zero.
pub fn normalize_log_weights(weights: &mut [f64]) {
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let u = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w = u);
        return;
    }
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    // rounding: fall back to the last index with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Cluster labels with their sizes; removing the last member of a cluster
/// deletes it by moving the highest label into its slot.
struct Allocation {
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl Allocation {
    fn from_partition(p: &Partition) -> Self {
        Self {
            labels: p.labels().to_vec(),
            counts: p.counts().to_vec(),
        }
    }

    fn k(&self) -> usize {
        self.counts.len()
    }

    /// Removes item `i`; returns `Some((emptied, moved_from))` when the
    /// cluster `emptied` disappeared and cluster `moved_from` took its label.
    fn remove(&mut self, i: usize) -> Option<(usize, usize)> {
        let c = self.labels[i];
        self.counts[c] -= 1;
        if self.counts[c] > 0 {
            return None;
        }
        let last = self.counts.len() - 1;
        self.counts.swap_remove(c);
        if c != last {
            for l in self.labels.iter_mut() {
                if *l == last {
                    *l = c;
                }
            }
        }
        Some((c, last))
    }

    fn assign(&mut self, i: usize, c: usize) {
        if c == self.counts.len() {
            self.counts.push(0);
        }
        self.counts[c] += 1;
        self.labels[i] = c;
    }

    fn partition(&self) -> Partition {
        Partition::canonicalize(&self.labels).expect("nonempty")
    }
}

fn initial_allocation<R: Rng + ?Sized>(n: usize, prior: &PYParams, rng: &mut R) -> Result<Allocation> {
    let state = sample_prior_state(n, prior, |_| (), rng)?;
    Ok(Allocation::from_partition(state.partition()))
}

/// Conjugate marginal sampler: each item is reallocated with probability
/// proportional to `(n_j - sigma) p(y_i | y_j)` for existing cluster `j` and
/// `(theta + k sigma) p(y_i)` for a new one.
pub fn gibbs_conjugate<K: ConjugateModel>(
    data: &[K::Obs],
    kernel: &K,
    config: &GibbsConfig,
) -> Result<GibbsRun<K::Param>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("observed data"));
    }
    let n = data.len();
    let theta = config.prior.strength();
    let sigma = config.prior.discount();
    let mut rng = config.rng();
    let mut alloc = initial_allocation(n, &config.prior, &mut rng)?;
    let mut stats = vec![kernel.empty_stats(); alloc.k()];
    for (i, y) in data.iter().enumerate() {
        kernel.add(&mut stats[alloc.labels[i]], y);
    }
    let empty = kernel.empty_stats();
    let mut weights = Vec::new();
    let mut samples = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let started = Instant::now();
        for (i, y) in data.iter().enumerate() {
            kernel.remove(&mut stats[alloc.labels[i]], y);
            if let Some((c, _)) = alloc.remove(i) {
                stats.swap_remove(c);
            }
            let k = alloc.k();
            weights.clear();
            for j in 0..k {
                weights.push((alloc.counts[j] as f64 - sigma).ln() + kernel.log_predictive(y, &stats[j]));
            }
            weights.push((theta + k as f64 * sigma).ln() + kernel.log_predictive(y, &empty));
            normalize_log_weights(&mut weights);
            let c = sample_categorical(&weights, &mut rng);
            if c == k {
                stats.push(kernel.empty_stats());
            }
            kernel.add(&mut stats[c], y);
            alloc.assign(i, c);
        }
        samples.push(GibbsSample {
            iteration,
            partition: alloc.partition(),
            atoms: Vec::new(),
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(GibbsRun {
        samples,
        burnin: config.burnin,
        density_failures: 0,
        rw_acceptance: f64::NAN,
    })
}

fn log_density_or_fail<K: DensityModel>(
    kernel: &K,
    y: &K::Obs,
    param: &K::Param,
    failures: &mut u64,
) -> f64 {
    match kernel.log_density(y, param) {
        Ok(v) => v,
        Err(_) => {
            *failures += 1;
            f64::NEG_INFINITY
        }
    }
}

/// Monte Carlo marginal sampler in the style of Neal's Algorithm 8.
///
/// Reallocation of item `i`: existing cluster `j` has weight
/// `(n_j - sigma) K(y_i; phi_j)`, each of `m` auxiliary atoms has weight
/// `(theta + k sigma) / m * K(y_i; phi_a)`. The auxiliary atoms are fresh
/// base-measure draws, except that an item leaving a singleton cluster keeps
/// that cluster's atom as the first auxiliary (required for the move to
/// leave the posterior invariant). After each scan every cluster atom takes
/// `rw_steps` random-walk Metropolis steps targeting its conditional posterior.
pub fn gibbs_mc<K: DensityModel>(
    data: &[K::Obs],
    kernel: &K,
    config: &GibbsConfig,
) -> Result<GibbsRun<K::Param>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("observed data"));
    }
    let n = data.len();
    let m = config.m;
    let theta = config.prior.strength();
    let sigma = config.prior.discount();
    let mut rng = config.rng();
    let mut alloc = initial_allocation(n, &config.prior, &mut rng)?;
    let mut atoms: Vec<K::Param> = (0..alloc.k()).map(|_| kernel.sample_prior(&mut rng)).collect();
    let mut failures = 0u64;
    let mut rw_proposed = 0u64;
    let mut rw_accepted = 0u64;
    let mut weights = Vec::with_capacity(m + 16);
    let mut aux: Vec<K::Param> = Vec::with_capacity(m);
    let mut samples = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let started = Instant::now();
        for (i, y) in data.iter().enumerate() {
            aux.clear();
            if let Some((c, _)) = alloc.remove(i) {
                aux.push(atoms.swap_remove(c));
            }
            while aux.len() < m {
                aux.push(kernel.sample_prior(&mut rng));
            }
            let k = alloc.k();
            weights.clear();
            for j in 0..k {
                weights.push(
                    (alloc.counts[j] as f64 - sigma).ln()
                        + log_density_or_fail(kernel, y, &atoms[j], &mut failures),
                );
            }
            let new_weight = ((theta + k as f64 * sigma) / m as f64).ln();
            for a in &aux {
                weights.push(new_weight + log_density_or_fail(kernel, y, a, &mut failures));
            }
            normalize_log_weights(&mut weights);
            let c = sample_categorical(&weights, &mut rng);
            if c >= k {
                atoms.push(aux.swap_remove(c - k));
                alloc.assign(i, k);
            } else {
                alloc.assign(i, c);
            }
        }

        let members = {
            let mut members = vec![Vec::new(); alloc.k()];
            for (i, &c) in alloc.labels.iter().enumerate() {
                members[c].push(i);
            }
            members
        };
        for (c, items) in members.iter().enumerate() {
            let log_target = |p: &K::Param, failures: &mut u64| -> f64 {
                let lp = kernel.log_prior(p);
                if lp == f64::NEG_INFINITY {
                    return lp;
                }
                let mut total = lp;
                for &i in items {
                    total += log_density_or_fail(kernel, &data[i], p, failures);
                    if total == f64::NEG_INFINITY {
                        break;
                    }
                }
                total
            };
            let mut current = log_target(&atoms[c], &mut failures);
            for _ in 0..config.rw_steps {
                rw_proposed += 1;
                let (proposal, correction) = kernel.random_walk(&atoms[c], config.rw_scale, &mut rng);
                let cand = log_target(&proposal, &mut failures);
                if cand == f64::NEG_INFINITY {
                    continue;
                }
                let log_ratio = cand - current + correction;
                if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
                    atoms[c] = proposal;
                    current = cand;
                    rw_accepted += 1;
                }
            }
        }

        let partition = alloc.partition();
        // canonical order: block of first appearance
        let mut ordered = Vec::with_capacity(alloc.k());
        let mut seen = vec![false; alloc.k()];
        for &c in &alloc.labels {
            if !seen[c] {
                seen[c] = true;
                ordered.push(atoms[c].clone());
            }
        }
        samples.push(GibbsSample {
            iteration,
            partition,
            atoms: ordered,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    if failures > 0 {
        debug!("{failures} density evaluations failed");
    }
    Ok(GibbsRun {
        samples,
        burnin: config.burnin,
        density_failures: failures,
        rw_acceptance: if rw_proposed == 0 {
            f64::NAN
        } else {
            rw_accepted as f64 / rw_proposed as f64
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{GaussianNig, GkModel};
    use proptest::prelude::*;

    #[test]
    fn single_item_is_one_cluster() {
        let kernel = GaussianNig::preset();
        let c = GibbsConfig::new(50, 10);
        let a = gibbs_conjugate(&[1.3], &kernel, &c).unwrap();
        assert!(a.samples.iter().all(|s| s.partition.k() == 1));
        let b = gibbs_mc(&[1.3], &kernel, &c).unwrap();
        assert!(b.samples.iter().all(|s| s.partition.k() == 1 && s.atoms.len() == 1));
    }

    #[test]
    fn far_apart_points_split() {
        // diffuse prior on the mean; exact posterior split probability is 0.9995
        let kernel = GaussianNig::new(2.0, 2.0, 0.0, 100.0).unwrap();
        let mut c = GibbsConfig::new(5_000, 500);
        c.seed = 2;
        let run = gibbs_conjugate(&[-100.0, 100.0], &kernel, &c).unwrap();
        let split = run.kept().iter().filter(|s| s.partition.k() == 2).count();
        assert!(split as f64 / run.kept().len() as f64 > 0.99);
    }

    #[test]
    fn seeded_runs_repeat() {
        let kernel = GaussianNig::preset();
        let data = [-3.0, -2.0, 2.5, 3.1, 0.2];
        let mut c = GibbsConfig::new(200, 50);
        c.seed = 9;
        let a = gibbs_mc(&data, &kernel, &c).unwrap();
        let b = gibbs_mc(&data, &kernel, &c).unwrap();
        assert_eq!(a.partitions(), b.partitions());
        let a = gibbs_conjugate(&data, &kernel, &c).unwrap();
        let b = gibbs_conjugate(&data, &kernel, &c).unwrap();
        assert_eq!(a.partitions(), b.partitions());
    }

    #[test]
    fn atoms_follow_canonical_labels() {
        let data = [-3.0, -2.9, 3.0, 3.2, -3.1, 2.8];
        let mut c = GibbsConfig::new(100, 10);
        c.seed = 4;
        let run = gibbs_mc(&data, &GaussianNig::preset(), &c).unwrap();
        for s in &run.samples {
            assert_eq!(s.atoms.len(), s.partition.k());
        }
        assert!(run.rw_acceptance > 0.0 && run.rw_acceptance < 1.0);
    }

    #[test]
    fn gk_sampler_runs() {
        let data = [-3.5, -2.8, -3.0, 3.1, 2.7, -2.9];
        let mut c = GibbsConfig::new(30, 10);
        c.seed = 1;
        let run = gibbs_mc(&data, &GkModel::default(), &c).unwrap();
        assert_eq!(run.kept().len(), 20);
    }

    #[test]
    fn rejects_bad_config() {
        let kernel = GaussianNig::preset();
        let mut c = GibbsConfig::new(10, 10);
        assert!(gibbs_conjugate(&[1.0], &kernel, &c).is_err());
        c.iterations = 20;
        c.m = 0;
        assert!(gibbs_mc(&[1.0], &kernel, &c).is_err());
    }

    #[test]
    fn allocation_removal_relabels() {
        let p = Partition::canonicalize(&[0, 1, 2, 1]).unwrap();
        let mut a = Allocation::from_partition(&p);
        assert_eq!(a.remove(0), Some((0, 2)));
        assert_eq!(a.labels[2], 0);
        assert_eq!(a.counts, vec![1, 2]);
        assert_eq!(a.remove(1), None);
    }

    proptest! {
        #[test]
        fn normalized_weights_are_probabilities(
            raw in proptest::collection::vec(-800.0f64..50.0, 1..40),
        ) {
            let mut w = raw.clone();
            normalize_log_weights(&mut w);
            let total: f64 = w.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}

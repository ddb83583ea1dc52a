//! ABC-MCMC over latent partitions.
//!
//! Every attempt proposes a fresh latent state for items `n+1..2n` of the
//! Pitman-Yor urn given the current state, simulates synthetic data from it,
//! and computes the optimal transport coupling to the observed data. When the
//! Wasserstein distance is below the threshold, the proposal, relabeled through
//! the coupling so that synthetic item `j` becomes data item `perm[j]`, is the
//! new state. The Metropolis-Hastings ratio of this move is identically one.

mod schedule;
mod tune;

use std::time::Instant;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::partition::Partition;
use crate::pitman_yor::{chain_rule_propose, sample_prior_state, LatentState, PYParams};
use crate::transport::{
    build_cost, hungarian, sinkhorn, SinkhornOptions, SolverKind, SortedReference,
    TransportResult,
};

pub use schedule::{quantile, AdaptMode, EpsilonSchedule};
pub use tune::{default_schedule, tune_eps_star, TuneOptions};

/// Default cap on attempts within one iteration.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;
pub const DEFAULT_INIT_DRAWS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    Fixed(f64),
    Adaptive(EpsilonSchedule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub prior: PYParams,
    /// Wasserstein order `q >= 1`.
    pub order: f64,
    pub solver: SolverKind,
    pub sinkhorn: SinkhornOptions,
    pub threshold: Threshold,
    pub seed: u64,
    /// ChaCha stream, so replications can share a master seed.
    pub stream: u64,
    pub max_attempts: u64,
    /// Keep one record per attempt (needed for schedule audits).
    pub log_attempts: bool,
    /// The chain starts from the closest of this many prior draws; 1 gives a
    /// plain prior draw.
    #[serde(default = "default_init_draws")]
    pub init_draws: usize,
}

fn default_init_draws() -> usize {
    DEFAULT_INIT_DRAWS
}

impl AbcConfig {
    pub fn new(iterations: usize, burnin: usize, threshold: Threshold) -> Self {
        Self {
            iterations,
            burnin,
            prior: PYParams::default(),
            order: 2.0,
            solver: SolverKind::Sorted1d,
            sinkhorn: SinkhornOptions::default(),
            threshold,
            seed: 0,
            stream: 0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            log_attempts: false,
            init_draws: DEFAULT_INIT_DRAWS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burnin {
            return Err(Error::InvalidParameter(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burnin
            )));
        }
        if !(self.order >= 1.0 && self.order.is_finite()) {
            return Err(Error::InvalidParameter(format!("order must be >= 1, got {}", self.order)));
        }
        if self.init_draws == 0 {
            return Err(Error::InvalidParameter("init_draws must be positive".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidParameter("max_attempts must be positive".into()));
        }
        if let Threshold::Fixed(eps) = self.threshold {
            if !(eps > 0.0) {
                return Err(Error::InvalidParameter(format!("threshold must be positive, got {eps}")));
            }
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One kept iteration of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub iteration: usize,
    /// Matched partition of the observed items.
    pub partition: Partition,
    pub distance: f64,
    pub raw_cost: f64,
    pub attempts: u64,
    /// Threshold the accepted distance was compared against.
    pub epsilon: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u64,
    pub iteration: usize,
    pub distance: f64,
    pub epsilon: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbcRun {
    pub samples: Vec<ChainSample>,
    pub attempt_log: Vec<AttemptRecord>,
    pub burnin: usize,
    pub total_attempts: u64,
    pub burnin_attempts: u64,
    /// Final schedule state for adaptive runs.
    pub schedule: Option<EpsilonSchedule>,
}

impl AbcRun {
    /// Post-burn-in samples.
    pub fn kept(&self) -> &[ChainSample] {
        &self.samples[self.burnin.min(self.samples.len())..]
    }

    pub fn partitions(&self) -> Vec<Partition> {
        self.kept().iter().map(|s| s.partition.clone()).collect()
    }

    /// Holding time of each kept sample: the attempts the chain spent on it
    /// before moving on. Weighting by these turns the repeat-until-accept
    /// chain into the Metropolis-Hastings chain that stays put on rejection,
    /// whose stationary law is the ABC posterior itself. The final sample's
    /// holding time is unobserved and gets weight zero.
    pub fn holding_weights(&self) -> Vec<f64> {
        let attempts: Vec<u64> = self.kept().iter().map(|s| s.attempts).collect();
        holding_weights(&attempts)
    }

    /// Post-burn-in accepted iterations per attempt.
    pub fn acceptance_rate(&self) -> f64 {
        let attempts: u64 = self.kept().iter().map(|s| s.attempts).sum();
        if attempts == 0 {
            return 0.0;
        }
        self.kept().len() as f64 / attempts as f64
    }

    pub fn mean_attempts(&self) -> f64 {
        let kept = self.kept();
        if kept.is_empty() {
            return 0.0;
        }
        kept.iter().map(|s| s.attempts as f64).sum::<f64>() / kept.len() as f64
    }
}

/// Holding times from per-iteration attempt counts: sample `i` is weighted
/// by the attempts of iteration `i + 1`; the last gets zero.
pub fn holding_weights(attempts: &[u64]) -> Vec<f64> {
    let mut w: Vec<f64> = attempts.iter().skip(1).map(|&a| a as f64).collect();
    if !attempts.is_empty() {
        w.push(0.0);
    }
    w
}

/// Computes couplings of synthetic samples to the fixed observed data.
pub struct Matcher<'a, K: KernelModel> {
    kernel: &'a K,
    data: &'a [K::Obs],
    sorted: Option<SortedReference>,
    solver: SolverKind,
    order: f64,
    sinkhorn: SinkhornOptions,
}

impl<'a, K: KernelModel> Matcher<'a, K> {
    pub fn new(
        kernel: &'a K,
        data: &'a [K::Obs],
        solver: SolverKind,
        order: f64,
        sinkhorn: SinkhornOptions,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("observed data"));
        }
        let sorted = match solver {
            SolverKind::Sorted1d => {
                let values = data
                    .iter()
                    .map(|y| kernel.as_scalar(y))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| {
                        Error::InvalidParameter(
                            "sorted solver needs scalar observations with |a - b| cost".into(),
                        )
                    })?;
                Some(SortedReference::new(&values)?)
            }
            _ => None,
        };
        Ok(Self {
            kernel,
            data,
            sorted,
            solver,
            order,
            sinkhorn,
        })
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn transport(&self, synthetic: &[K::Obs]) -> Result<TransportResult> {
        if let Some(reference) = &self.sorted {
            let s: Vec<f64> = synthetic
                .iter()
                .map(|x| self.kernel.as_scalar(x).expect("scalar kernel"))
                .collect();
            return reference.transport(&s, self.order);
        }
        let cost = build_cost(self.data, synthetic, |a, b| self.kernel.distance(a, b), self.order)?;
        match self.solver {
            SolverKind::Hungarian => hungarian(&cost),
            SolverKind::Sinkhorn => sinkhorn(&cost, self.sinkhorn),
            SolverKind::Sorted1d => unreachable!("handled above"),
        }
    }
}

/// A raw candidate, its synthetic data and coupling, and the matched state.
#[derive(Debug, Clone)]
pub struct Proposal<P, O> {
    pub raw: LatentState<P>,
    pub synthetic: Vec<O>,
    pub transport: TransportResult,
    pub matched: LatentState<P>,
}

fn simulate<K: KernelModel, R: Rng + ?Sized>(
    kernel: &K,
    state: &LatentState<K::Param>,
    rng: &mut R,
) -> Vec<K::Obs> {
    (0..state.n())
        .map(|i| kernel.sample_datum(state.param(i), rng))
        .collect()
}

fn finish<P: Clone, O, K>(
    raw: LatentState<P>,
    synthetic: Vec<O>,
    transport: TransportResult,
) -> Result<Proposal<P, O>>
where
    K: KernelModel<Param = P, Obs = O>,
{
    let matched = raw.permuted(&transport.permutation)?;
    Ok(Proposal {
        raw,
        synthetic,
        transport,
        matched,
    })
}

/// One attempt of the chain: chain-rule proposal from `current`, synthetic
/// data, coupling and relabeling.
pub fn propose_and_match<K: KernelModel, R: Rng + ?Sized>(
    current: &LatentState<K::Param>,
    kernel: &K,
    prior: &PYParams,
    matcher: &Matcher<'_, K>,
    rng: &mut R,
) -> Result<Proposal<K::Param, K::Obs>> {
    let raw = chain_rule_propose(current, prior, |r| kernel.sample_prior(r), rng)?;
    let synthetic = simulate(kernel, &raw, rng);
    let transport = matcher.transport(&synthetic)?;
    finish::<_, _, K>(raw, synthetic, transport)
}

/// One draw of the rejection sampler: a fresh prior state instead of a
/// chain-rule move.
fn propose_from_prior<K: KernelModel, R: Rng + ?Sized>(
    kernel: &K,
    prior: &PYParams,
    matcher: &Matcher<'_, K>,
    rng: &mut R,
) -> Result<Proposal<K::Param, K::Obs>> {
    let raw = sample_prior_state(matcher.n(), prior, |r| kernel.sample_prior(r), rng)?;
    let synthetic = simulate(kernel, &raw, rng);
    let transport = matcher.transport(&synthetic)?;
    finish::<_, _, K>(raw, synthetic, transport)
}

/// Closest (matched) state among `config.init_draws` prior draws.
pub(crate) fn initial_state<K: KernelModel, R: Rng + ?Sized>(
    kernel: &K,
    config: &AbcConfig,
    matcher: &Matcher<'_, K>,
    rng: &mut R,
) -> Result<LatentState<K::Param>> {
    let mut best: Option<Proposal<K::Param, K::Obs>> = None;
    for _ in 0..config.init_draws.max(1) {
        let p = propose_from_prior(kernel, &config.prior, matcher, rng)?;
        if best.as_ref().is_none_or(|b| p.transport.distance < b.transport.distance) {
            best = Some(p);
        }
    }
    Ok(best.expect("at least one draw").matched)
}

/// Distances between the data and `draws` prior-predictive samples, each from
/// a fresh prior state.
pub fn prior_predictive_distances<K: KernelModel, R: Rng + ?Sized>(
    data: &[K::Obs],
    kernel: &K,
    config: &AbcConfig,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let matcher = Matcher::new(kernel, data, config.solver, config.order, config.sinkhorn)?;
    let mut distances = Vec::with_capacity(draws);
    for _ in 0..draws.max(1) {
        distances.push(propose_from_prior(kernel, &config.prior, &matcher, rng)?.transport.distance);
    }
    Ok(distances)
}

/// Median of [`prior_predictive_distances`]; the tuner's starting threshold.
pub fn prior_predictive_median<K: KernelModel, R: Rng + ?Sized>(
    data: &[K::Obs],
    kernel: &K,
    config: &AbcConfig,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(quantile(&prior_predictive_distances(data, kernel, config, draws, rng)?, 0.5))
}

#[derive(Debug, Clone)]
pub struct RejectionRun {
    pub samples: Vec<ChainSample>,
    pub draws: u64,
}

impl RejectionRun {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.draws as f64
    }

    pub fn partitions(&self) -> Vec<Partition> {
        self.samples.iter().map(|s| s.partition.clone()).collect()
    }
}

/// Rejection ABC: `draws` independent prior draws, keeping the matched
/// partitions of those within `epsilon` of the data.
pub fn rejection_abc<K: KernelModel>(
    data: &[K::Obs],
    kernel: &K,
    config: &AbcConfig,
    epsilon: f64,
    draws: u64,
) -> Result<RejectionRun> {
    if draws == 0 {
        return Err(Error::InvalidParameter("rejection sampler needs at least one draw".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be positive, got {epsilon}")));
    }
    let matcher = Matcher::new(kernel, data, config.solver, config.order, config.sinkhorn)?;
    let mut rng = config.rng();
    let mut samples = Vec::new();
    for draw in 0..draws {
        let started = Instant::now();
        let p = propose_from_prior(kernel, &config.prior, &matcher, &mut rng)?;
        if p.transport.distance < epsilon {
            samples.push(ChainSample {
                iteration: draw as usize,
                partition: p.matched.partition().clone(),
                distance: p.transport.distance,
                raw_cost: p.transport.raw_cost,
                attempts: 1,
                epsilon,
                seconds: started.elapsed().as_secs_f64(),
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::NoAcceptance { draws, epsilon });
    }
    debug!("rejection ABC kept {}/{draws}", samples.len());
    Ok(RejectionRun { samples, draws })
}

/// Shared driver for the fixed and adaptive chains.
fn run_chain<K: KernelModel>(
    data: &[K::Obs],
    kernel: &K,
    config: &AbcConfig,
    mut schedule: Option<EpsilonSchedule>,
    fixed: f64,
) -> Result<AbcRun> {
    config.validate()?;
    let matcher = Matcher::new(kernel, data, config.solver, config.order, config.sinkhorn)?;
    let mut rng = config.rng();
    let mut state = initial_state(kernel, config, &matcher, &mut rng)?;
    let mut samples = Vec::with_capacity(config.iterations);
    let mut log = Vec::new();
    let mut total: u64 = 0;
    let mut burnin_attempts = 0;

    for iteration in 0..config.iterations {
        if iteration == config.burnin {
            burnin_attempts = total;
            if let Some(s) = schedule.as_mut() {
                s.end_burnin();
            }
        }
        let started = Instant::now();
        let mut attempts: u64 = 0;
        let mut closest = f64::INFINITY;
        loop {
            if attempts >= config.max_attempts {
                let epsilon = schedule.as_ref().map_or(fixed, |s| s.current());
                warn!(
                    "iteration {iteration} stalled after {attempts} attempts: eps={epsilon:.4e}, closest={closest:.4e}"
                );
                return Err(Error::Stall {
                    iteration,
                    attempts,
                    epsilon,
                    min_distance: closest,
                });
            }
            attempts += 1;
            total += 1;
            let epsilon = schedule.as_ref().map_or(fixed, |s| s.current());
            let p = propose_and_match(&state, kernel, &config.prior, &matcher, &mut rng)?;
            let d = p.transport.distance;
            closest = closest.min(d);
            let accepted = d < epsilon;
            if let Some(s) = schedule.as_mut() {
                s.update(d);
            }
            if config.log_attempts {
                log.push(AttemptRecord {
                    attempt: total,
                    iteration,
                    distance: d,
                    epsilon,
                    accepted,
                });
            }
            if accepted {
                state = p.matched;
                samples.push(ChainSample {
                    iteration,
                    partition: state.partition().clone(),
                    distance: d,
                    raw_cost: p.transport.raw_cost,
                    attempts,
                    epsilon,
                    seconds: started.elapsed().as_secs_f64(),
                });
                break;
            }
        }
    }
    Ok(AbcRun {
        samples,
        attempt_log: log,
        burnin: config.burnin,
        total_attempts: total,
        burnin_attempts,
        schedule,
    })
}

/// Fixed-threshold ABC-MCMC.
pub fn abc_mcmc_fixed<K: KernelModel>(
    data: &[K::Obs],
    kernel: &K,
    config: &AbcConfig,
) -> Result<AbcRun> {
    match &config.threshold {
        Threshold::Fixed(eps) => run_chain(data, kernel, config, None, *eps),
        Threshold::Adaptive(_) => Err(Error::InvalidParameter(
            "fixed-threshold sampler given an adaptive schedule".into(),
        )),
    }
}

/// Adaptive ABC-MCMC; the threshold is updated after every attempt,
/// accepted or not.
pub fn abc_mcmc_adaptive<K: KernelModel>(
    data: &[K::Obs],
    kernel: &K,
    config: &AbcConfig,
) -> Result<AbcRun> {
    match &config.threshold {
        Threshold::Adaptive(s) => run_chain(data, kernel, config, Some(s.clone()), f64::NAN),
        Threshold::Fixed(_) => Err(Error::InvalidParameter(
            "adaptive sampler given a fixed threshold".into(),
        )),
    }
}

/// Dispatches on the configured threshold.
pub fn run_abc<K: KernelModel>(data: &[K::Obs], kernel: &K, config: &AbcConfig) -> Result<AbcRun> {
    match &config.threshold {
        Threshold::Fixed(_) => abc_mcmc_fixed(data, kernel, config),
        Threshold::Adaptive(_) => abc_mcmc_adaptive(data, kernel, config),
    }
}

/// Converts a threshold on `sqrt(n) * W_2`-type raw scale, such as
/// `sqrt(n log n)`, to the normalized `W_q` scale used by the sampler:
/// `eps_raw / n^(1/q)`.
pub fn raw_threshold_to_normalized(eps_raw: f64, n: usize, order: f64) -> f64 {
    eps_raw / (n as f64).powf(1.0 / order)
}

/// `sqrt(n log n)` on the normalized scale.
pub fn default_fixed_threshold(n: usize, order: f64) -> f64 {
    let n_f = n as f64;
    raw_threshold_to_normalized((n_f * n_f.ln()).sqrt(), n, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{GaussianNig, GkModel, NormalParams};

    fn toy_data() -> Vec<f64> {
        vec![-3.1, -2.7, 2.9, 3.3]
    }

    fn config(eps: f64) -> AbcConfig {
        let mut c = AbcConfig::new(300, 100, Threshold::Fixed(eps));
        c.seed = 11;
        c
    }

    #[test]
    fn matched_partition_follows_permutation() {
        let kernel = GaussianNig::preset();
        let data = toy_data();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let state = sample_prior_state(4, &PYParams::default(), |r| kernel.sample_prior(r), &mut rng).unwrap();
        for solver in [SolverKind::Sorted1d, SolverKind::Hungarian] {
            let m = Matcher::new(&kernel, &data, solver, 2.0, SinkhornOptions::default()).unwrap();
            for _ in 0..50 {
                let p = propose_and_match(&state, &kernel, &PYParams::default(), &m, &mut rng).unwrap();
                let perm = &p.transport.permutation;
                for j in 0..4 {
                    let a: &NormalParams = p.raw.param(j);
                    assert_eq!(a, p.matched.param(perm[j]));
                }
                assert_eq!(p.matched.partition(), &p.raw.partition().permuted(perm).unwrap());
            }
        }
    }

    #[test]
    fn every_accepted_sample_is_within_threshold() {
        let run = abc_mcmc_fixed(&toy_data(), &GaussianNig::preset(), &config(1.5)).unwrap();
        assert_eq!(run.samples.len(), 300);
        for s in &run.samples {
            assert!(s.distance < s.epsilon);
            assert_eq!(s.epsilon, 1.5);
            assert!(s.attempts >= 1);
        }
        assert_eq!(run.total_attempts, run.samples.iter().map(|s| s.attempts).sum::<u64>());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let a = abc_mcmc_fixed(&toy_data(), &GaussianNig::preset(), &config(1.5)).unwrap();
        let b = abc_mcmc_fixed(&toy_data(), &GaussianNig::preset(), &config(1.5)).unwrap();
        let strip = |r: &AbcRun| {
            r.samples
                .iter()
                .map(|s| (s.partition.clone(), s.distance.to_bits(), s.attempts))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn identical_pair_favors_one_block() {
        // prior P(one block) for n = 2 is (1 - 0.2) / (1 + 1) = 0.4
        let data = [0.5, 0.5];
        let mut c = AbcConfig::new(6_000, 500, Threshold::Fixed(0.05));
        c.seed = 5;
        let run = abc_mcmc_fixed(&data, &GaussianNig::preset(), &c).unwrap();
        let w = run.holding_weights();
        let total: f64 = w.iter().sum();
        let together: f64 = run
            .kept()
            .iter()
            .zip(&w)
            .filter(|(s, _)| s.partition.k() == 1)
            .map(|(_, w)| w)
            .sum();
        assert!(together / total > 0.5, "{}", together / total);
    }

    #[test]
    fn stall_is_reported() {
        let mut c = config(1e-9);
        c.max_attempts = 50;
        match abc_mcmc_fixed(&toy_data(), &GaussianNig::preset(), &c) {
            Err(Error::Stall { iteration, attempts, min_distance, .. }) => {
                assert_eq!(iteration, 0);
                assert_eq!(attempts, 50);
                assert!(min_distance > 1e-9);
            }
            other => panic!("expected stall, got {other:?}"),
        }
    }

    #[test]
    fn rejection_acceptance_monotone_in_threshold() {
        let kernel = GaussianNig::preset();
        let c = config(1.0);
        let mut last = 0.0;
        for eps in [0.2, 0.5, 1.0, 3.0, f64::INFINITY] {
            let rate = match rejection_abc(&toy_data(), &kernel, &c, eps, 4_000) {
                Ok(r) => r.acceptance_rate(),
                Err(Error::NoAcceptance { .. }) => 0.0,
                Err(e) => panic!("{e}"),
            };
            assert!(rate >= last);
            last = rate;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn rejection_without_acceptances_errors() {
        let c = config(1.0);
        assert!(matches!(
            rejection_abc(&toy_data(), &GaussianNig::preset(), &c, 1e-12, 100),
            Err(Error::NoAcceptance { draws: 100, .. })
        ));
    }

    #[test]
    fn shuffling_data_preserves_coclustering() {
        let data = toy_data();
        let order = [2, 0, 3, 1];
        let shuffled: Vec<f64> = order.iter().map(|&i| data[i]).collect();
        // position of original item i in the shuffled data
        let pos: Vec<usize> = (0..4).map(|i| order.iter().position(|&o| o == i).unwrap()).collect();
        let kernel = GaussianNig::preset();
        let mut c = AbcConfig::new(20_000, 1_000, Threshold::Fixed(1.0));
        c.seed = 8;
        let a = abc_mcmc_fixed(&data, &kernel, &c).unwrap();
        let b = abc_mcmc_fixed(&shuffled, &kernel, &c).unwrap();
        let together = |run: &AbcRun, i: usize, j: usize| {
            let w = run.holding_weights();
            let total: f64 = w.iter().sum();
            run.kept()
                .iter()
                .zip(&w)
                .filter(|(s, _)| s.partition.label(i) == s.partition.label(j))
                .map(|(_, w)| w)
                .sum::<f64>()
                / total
        };
        for (i, j) in [(0, 1), (0, 2), (2, 3)] {
            let pa = together(&a, i, j);
            let pb = together(&b, pos[i], pos[j]);
            assert!((pa - pb).abs() < 0.05, "pair ({i},{j}): {pa} vs {pb}");
        }
    }

    #[test]
    fn adaptive_threshold_recorded_per_attempt() {
        let sched = EpsilonSchedule::new(5.0, 0.8, AdaptMode::Always).unwrap();
        let mut c = AbcConfig::new(400, 100, Threshold::Adaptive(sched));
        c.log_attempts = true;
        let run = abc_mcmc_adaptive(&toy_data(), &GaussianNig::preset(), &c).unwrap();
        assert_eq!(run.attempt_log.len() as u64, run.total_attempts);
        for (i, rec) in run.attempt_log.iter().enumerate() {
            assert_eq!(rec.attempt, i as u64 + 1);
            assert_eq!(rec.accepted, rec.distance < rec.epsilon);
        }
        assert_eq!(run.attempt_log[0].epsilon, 5.0);
        assert_ne!(run.attempt_log[1].epsilon, 5.0);
        let s = run.schedule.unwrap();
        assert_eq!(s.burnin_attempts(), Some(run.burnin_attempts));
        assert!(run.attempt_log.last().unwrap().epsilon < 5.0);
    }

    #[test]
    fn burnin_only_mode_freezes() {
        let sched = EpsilonSchedule::new(5.0, 0.8, AdaptMode::StopAfterBurnin).unwrap();
        let mut c = AbcConfig::new(300, 150, Threshold::Adaptive(sched));
        c.log_attempts = true;
        let run = abc_mcmc_adaptive(&toy_data(), &GaussianNig::preset(), &c).unwrap();
        let post: Vec<f64> = run
            .attempt_log
            .iter()
            .filter(|r| r.iteration >= 150)
            .map(|r| r.epsilon)
            .collect();
        assert!(post.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn sampler_mode_mismatch_rejected() {
        let kernel = GaussianNig::preset();
        assert!(abc_mcmc_adaptive(&toy_data(), &kernel, &config(1.0)).is_err());
        let mut c = config(1.0);
        c.iterations = 10;
        c.burnin = 10;
        assert!(abc_mcmc_fixed(&toy_data(), &kernel, &c).is_err());
    }

    #[test]
    fn sorted_solver_requires_scalar_kernel() {
        use crate::kernels::Gk2Model;
        let kernel = Gk2Model::preset();
        let data = vec![[0.0, 1.0], [1.0, 0.0]];
        assert!(Matcher::new(&kernel, &data, SolverKind::Sorted1d, 2.0, SinkhornOptions::default()).is_err());
        assert!(Matcher::new(&kernel, &data, SolverKind::Hungarian, 2.0, SinkhornOptions::default()).is_ok());
    }

    #[test]
    fn gk_chain_runs() {
        let data = [-3.0, -2.5, 2.0, 3.5, -3.2];
        let mut c = config(3.0);
        c.iterations = 50;
        c.burnin = 10;
        let run = abc_mcmc_fixed(&data, &GkModel::default(), &c).unwrap();
        assert_eq!(run.kept().len(), 40);
    }

    #[test]
    fn threshold_scale_conversion() {
        let n = 100;
        let eps = default_fixed_threshold(n, 2.0);
        assert!((eps - (100f64).ln().sqrt()).abs() < 1e-12);
        assert!((raw_threshold_to_normalized(10.0, 100, 1.0) - 0.1).abs() < 1e-15);
    }
}

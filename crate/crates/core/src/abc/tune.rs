use log::info;
use serde::{Deserialize, Serialize};

use super::{prior_predictive_distances, initial_state, propose_and_match, quantile, AbcConfig, AdaptMode, EpsilonSchedule, Matcher};
use crate::error::{Error, Result};
use crate::kernels::KernelModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    /// Target acceptance rate in `(0, 1]`.
    pub target: f64,
    /// Attempts spent adapting; at least 500.
    pub pilot_attempts: u64,
    pub batch: u64,
    /// Starting threshold; defaults to the prior-predictive distance quantile
    /// at the target level.
    pub initial: Option<f64>,
    /// Attempts of the fixed-threshold check run after adaptation.
    pub verify_attempts: u64,
    /// Adapt-then-check rounds before giving up.
    pub rounds: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            target: 0.1,
            pilot_attempts: 5_000,
            batch: 100,
            initial: None,
            verify_attempts: 2_000,
            rounds: 4,
        }
    }
}

/// Stochastic approximation for the limit threshold. A pilot chain runs at
/// the current threshold in batches; after batch `b` with acceptance `a_b`,
/// `eps <- eps * exp(gain_b * (target - a_b))` with `gain_b = 2 / b^0.6`.
/// The result is the geometric mean of the thresholds over the second half
/// of the batches, confirmed by a further pilot run at that fixed value whose
/// acceptance must fall in `[target / 2, 2 target]`. A failed check starts
/// another round from the current state and threshold, with the gain
/// sequence continuing where it stopped.
pub fn tune_eps_star<K: KernelModel>(
    data: &[K::Obs],
    kernel: &K,
    config: &AbcConfig,
    options: TuneOptions,
) -> Result<f64> {
    let TuneOptions {
        target,
        pilot_attempts,
        batch,
        initial,
        verify_attempts,
        rounds,
    } = options;
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidParameter(format!("target acceptance must lie in (0, 1], got {target}")));
    }
    if pilot_attempts < 500 || batch == 0 || verify_attempts == 0 || rounds == 0 {
        return Err(Error::InvalidParameter(
            "tuning needs at least 500 pilot attempts and positive batch sizes".into(),
        ));
    }
    let matcher = Matcher::new(kernel, data, config.solver, config.order, config.sinkhorn)?;
    let mut rng = config.rng();
    let mut eps = match initial {
        Some(e) if e > 0.0 => e,
        Some(e) => return Err(Error::InvalidParameter(format!("initial threshold must be positive, got {e}"))),
        None => quantile(&prior_predictive_distances(data, kernel, config, 200, &mut rng)?, target),
    };
    let mut state = initial_state(kernel, config, &matcher, &mut rng)?;

    let batches = pilot_attempts.div_ceil(batch);
    let mut failure = None;
    for round in 0..rounds as u64 {
        let mut log_sum = 0.0;
        let mut averaged = 0u64;
        for b in 1..=batches {
            let mut accepted = 0u64;
            for _ in 0..batch {
                let p = propose_and_match(&state, kernel, &config.prior, &matcher, &mut rng)?;
                if p.transport.distance < eps {
                    accepted += 1;
                    state = p.matched;
                }
            }
            let rate = accepted as f64 / batch as f64;
            let gain = 2.0 / ((round * batches + b) as f64).powf(0.6);
            eps *= (gain * (target - rate)).exp();
            if 2 * b > batches {
                log_sum += eps.ln();
                averaged += 1;
            }
        }
        let eps_star = (log_sum / averaged as f64).exp();

        let mut accepted = 0u64;
        for _ in 0..verify_attempts {
            let p = propose_and_match(&state, kernel, &config.prior, &matcher, &mut rng)?;
            if p.transport.distance < eps_star {
                accepted += 1;
                state = p.matched;
            }
        }
        let acceptance = accepted as f64 / verify_attempts as f64;
        info!("round {round}: eps* = {eps_star:.5e}, check acceptance {acceptance:.3} (target {target})");
        if acceptance >= 0.5 * target && acceptance <= 2.0 * target {
            return Ok(eps_star);
        }
        eps = eps_star;
        failure = Some(Error::TuneFailed {
            epsilon: eps_star,
            acceptance,
            target,
        });
    }
    Err(failure.expect("at least one round"))
}

/// The default adaptive schedule. `eps0` is the largest of 200 prior-predictive
/// distances, loose enough for a chain started from a prior draw to move;
/// `eps*` comes from [`tune_eps_star`], started at the quantile of the same
/// distances at the target acceptance level.
pub fn default_schedule<K: KernelModel>(
    data: &[K::Obs],
    kernel: &K,
    config: &AbcConfig,
    mode: AdaptMode,
    options: TuneOptions,
) -> Result<EpsilonSchedule> {
    let mut rng = config.rng();
    let distances = prior_predictive_distances(data, kernel, config, 200, &mut rng)?;
    let eps0 = quantile(&distances, 1.0);
    let options = TuneOptions {
        initial: options.initial.or(Some(quantile(&distances, options.target))),
        ..options
    };
    let eps_star = tune_eps_star(data, kernel, config, options)?;
    EpsilonSchedule::new(eps0.max(eps_star), eps_star, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::Threshold;
    use crate::kernels::GaussianNig;

    fn data() -> Vec<f64> {
        vec![-3.4, -2.9, -3.1, -2.2, 2.8, 3.1, -3.6, -2.5, 3.3, -3.0]
    }

    fn config() -> AbcConfig {
        let mut c = AbcConfig::new(10, 0, Threshold::Fixed(1.0));
        c.seed = 21;
        c
    }

    #[test]
    fn tuned_threshold_hits_target_band() {
        let eps = tune_eps_star(&data(), &GaussianNig::preset(), &config(), TuneOptions::default()).unwrap();
        assert!(eps > 0.0);
    }

    #[test]
    fn larger_target_gives_larger_threshold() {
        let kernel = GaussianNig::preset();
        let mut last = 0.0;
        for target in [0.05, 0.1, 0.3] {
            let opts = TuneOptions { target, ..TuneOptions::default() };
            let eps = tune_eps_star(&data(), &kernel, &config(), opts).unwrap();
            assert!(eps >= last, "target {target}: {eps} < {last}");
            last = eps;
        }
    }

    #[test]
    fn full_acceptance_target_grows_threshold() {
        let opts = TuneOptions {
            target: 1.0,
            initial: Some(0.1),
            ..TuneOptions::default()
        };
        let eps = tune_eps_star(&data(), &GaussianNig::preset(), &config(), opts).unwrap();
        assert!(eps > 1.0, "{eps}");
    }

    #[test]
    fn default_schedule_is_ordered() {
        let s = default_schedule(&data(), &GaussianNig::preset(), &config(), AdaptMode::Always, TuneOptions::default())
            .unwrap();
        assert!(s.eps0() >= s.eps_star() && s.eps_star() > 0.0);
        assert_eq!(s.current(), s.eps0());
    }

    #[test]
    fn rejects_small_pilot() {
        let opts = TuneOptions { pilot_attempts: 100, ..TuneOptions::default() };
        assert!(tune_eps_star(&data(), &GaussianNig::preset(), &config(), opts).is_err());
    }
}

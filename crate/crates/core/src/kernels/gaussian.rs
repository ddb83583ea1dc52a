use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{ConjugateModel, DensityModel, KernelModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub mean: f64,
    pub var: f64,
}

/// Normal kernel with a Normal-Inverse-Gamma base measure:
/// `var ~ IG(shape, scale)`, `mean | var ~ N(prior_mean, var_scale * var)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianNig {
    shape: f64,
    scale: f64,
    prior_mean: f64,
    var_scale: f64,
}

impl GaussianNig {
    pub fn new(shape: f64, scale: f64, prior_mean: f64, var_scale: f64) -> Result<Self> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(shape) && positive(scale) && positive(var_scale) && prior_mean.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "NIG hyperparameters must be positive: shape={shape} scale={scale} var_scale={var_scale}"
            )));
        }
        Ok(Self {
            shape,
            scale,
            prior_mean,
            var_scale,
        })
    }

    /// `var ~ IG(2, 2)`, `mean | var ~ N(0, 2 var)`.
    pub fn preset() -> Self {
        Self::new(2.0, 2.0, 0.0, 2.0).expect("valid preset")
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn var_scale(&self) -> f64 {
        self.var_scale
    }

    /// Posterior hyperparameters `(mean, var_scale, shape, scale)` after `stats`.
    fn posterior(&self, stats: &NigStats) -> (f64, f64, f64, f64) {
        let count = stats.count as f64;
        let v = 1.0 / (1.0 / self.var_scale + count);
        let m = v * (self.prior_mean / self.var_scale + stats.sum);
        let a = self.shape + 0.5 * count;
        let b = self.scale
            + 0.5
                * (stats.sum_sq + self.prior_mean * self.prior_mean / self.var_scale - m * m / v);
        (m, v, a, b.max(f64::MIN_POSITIVE))
    }
}

fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - 0.5 * (x - mean) * (x - mean) / var
}

impl KernelModel for GaussianNig {
    type Param = NormalParams;
    type Obs = f64;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> NormalParams {
        let precision = Gamma::new(self.shape, 1.0 / self.scale)
            .expect("validated hyperparameters")
            .sample(rng);
        let var = 1.0 / precision;
        let z: f64 = rng.sample(StandardNormal);
        NormalParams {
            mean: self.prior_mean + (self.var_scale * var).sqrt() * z,
            var,
        }
    }

    fn sample_datum<R: Rng + ?Sized>(&self, param: &NormalParams, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        param.mean + param.var.sqrt() * z
    }

    fn distance(&self, a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }

    fn as_scalar(&self, obs: &f64) -> Option<f64> {
        Some(*obs)
    }
}

impl DensityModel for GaussianNig {
    fn log_density(&self, obs: &f64, param: &NormalParams) -> Result<f64> {
        Ok(normal_log_density(*obs, param.mean, param.var))
    }

    fn log_prior(&self, param: &NormalParams) -> f64 {
        if !(param.var > 0.0) {
            return f64::NEG_INFINITY;
        }
        let log_ig = -(self.shape + 1.0) * param.var.ln() - self.scale / param.var;
        log_ig + normal_log_density(param.mean, self.prior_mean, self.var_scale * param.var)
    }

    fn random_walk<R: Rng + ?Sized>(
        &self,
        param: &NormalParams,
        scale: f64,
        rng: &mut R,
    ) -> (NormalParams, f64) {
        let dm: f64 = rng.sample(StandardNormal);
        let dv: f64 = rng.sample(StandardNormal);
        let log_var = param.var.ln() + scale * dv;
        let proposed = NormalParams {
            mean: param.mean + scale * dm,
            var: log_var.exp(),
        };
        // random walk on log-variance: Jacobian var'/var
        (proposed, log_var - param.var.ln())
    }
}

/// Sufficient statistics of a cluster under the Normal kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NigStats {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl ConjugateModel for GaussianNig {
    type Stats = NigStats;

    fn empty_stats(&self) -> NigStats {
        NigStats::default()
    }

    fn add(&self, stats: &mut NigStats, obs: &f64) {
        stats.count += 1;
        stats.sum += obs;
        stats.sum_sq += obs * obs;
    }

    fn remove(&self, stats: &mut NigStats, obs: &f64) {
        stats.count -= 1;
        stats.sum -= obs;
        stats.sum_sq -= obs * obs;
        if stats.count == 0 {
            *stats = NigStats::default();
        }
    }

    /// Student-t with `2 a_n` degrees of freedom, location `m_n` and squared
    /// scale `b_n (1 + v_n) / a_n`.
    fn log_predictive(&self, obs: &f64, stats: &NigStats) -> f64 {
        let (m, v, a, b) = self.posterior(stats);
        let dof = 2.0 * a;
        let scale_sq = b * (1.0 + v) / a;
        let t = (obs - m) * (obs - m) / (dof * scale_sq);
        ln_gamma(0.5 * (dof + 1.0))
            - ln_gamma(0.5 * dof)
            - 0.5 * (dof * PI * scale_sq).ln()
            - 0.5 * (dof + 1.0) * t.ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_at_mode() {
        let m = GaussianNig::preset();
        let v = m
            .log_density(&0.0, &NormalParams { mean: 0.0, var: 1.0 })
            .unwrap();
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(GaussianNig::new(0.0, 2.0, 0.0, 2.0).is_err());
        assert!(GaussianNig::new(2.0, -1.0, 0.0, 2.0).is_err());
        assert!(GaussianNig::new(2.0, 2.0, f64::NAN, 2.0).is_err());
    }

    #[test]
    fn prior_variance_mean() {
        // IG(2, 2) has mean 2 / (2 - 1) = 2; heavy tail, so a loose band
        let m = GaussianNig::preset();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 200_000;
        let mean = (0..draws).map(|_| m.sample_prior(&mut rng).var).sum::<f64>() / draws as f64;
        assert!((mean - 2.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn datum_moments() {
        let m = GaussianNig::preset();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = NormalParams { mean: -3.0, var: 1.0 };
        let draws = 100_000;
        let mean = (0..draws).map(|_| m.sample_datum(&p, &mut rng)).sum::<f64>() / draws as f64;
        assert!((mean + 3.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn predictive_integrates_to_one() {
        let m = GaussianNig::preset();
        let mut stats = m.empty_stats();
        for x in [-3.2, -2.5, -3.9] {
            m.add(&mut stats, &x);
        }
        let h = 1e-3;
        let total: f64 = (-60_000..60_000)
            .map(|i| m.log_predictive(&(i as f64 * h), &stats).exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-4, "total {total}");
    }

    #[test]
    fn add_remove_roundtrip() {
        let m = GaussianNig::preset();
        let mut s = m.empty_stats();
        m.add(&mut s, &1.5);
        m.add(&mut s, &-0.5);
        m.remove(&mut s, &1.5);
        assert_eq!(s.count, 1);
        assert!((s.sum + 0.5).abs() < 1e-15);
        m.remove(&mut s, &-0.5);
        assert_eq!(s, NigStats::default());
    }
}

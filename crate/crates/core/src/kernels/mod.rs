//! Observation models. Every model can simulate; only some can evaluate a
//! density, and only the Gaussian one is conjugate.

mod ergm;
mod gaussian;
mod gk;

use rand::Rng;

use crate::error::Result;

pub use ergm::{
    ergm_sample, ergm_stats, normalized_laplacian_spectrum, spectral_distance, ErgmModel,
    ErgmParams, Graph, SpectralGraph, ERGM_PRIOR_MEAN,
};
pub use gaussian::{GaussianNig, NigStats, NormalParams};
pub use gk::{
    gk_log_density, gk_quantile, standard_normal_quantile, Gk2Model, GkModel, GkParams, GkPrior,
    GK_C,
};

/// A simulable mixture kernel together with its base measure.
pub trait KernelModel {
    type Param: Clone + std::fmt::Debug;
    type Obs: Clone + std::fmt::Debug;

    /// Draw an atom from the base measure.
    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Param;

    fn sample_datum<R: Rng + ?Sized>(&self, param: &Self::Param, rng: &mut R) -> Self::Obs;

    /// Ground metric between observations; symmetric, zero on the diagonal.
    fn distance(&self, a: &Self::Obs, b: &Self::Obs) -> f64;

    /// Real-line view of an observation, available when `distance` is `|a - b|`.
    fn as_scalar(&self, _obs: &Self::Obs) -> Option<f64> {
        None
    }
}

/// Kernels whose density can be evaluated (possibly numerically), with a
/// random-walk move on the atom for Metropolis updates.
pub trait DensityModel: KernelModel {
    fn log_density(&self, obs: &Self::Obs, param: &Self::Param) -> Result<f64>;

    /// Log density of the base measure, up to a constant.
    fn log_prior(&self, param: &Self::Param) -> f64;

    /// Proposes a perturbed atom. Returns it with the log Hastings correction
    /// `log q(param | proposed) - log q(proposed | param)`.
    fn random_walk<R: Rng + ?Sized>(
        &self,
        param: &Self::Param,
        scale: f64,
        rng: &mut R,
    ) -> (Self::Param, f64);
}

/// Kernels with a closed-form posterior predictive under the base measure.
pub trait ConjugateModel: KernelModel {
    type Stats: Clone + std::fmt::Debug;

    fn empty_stats(&self) -> Self::Stats;
    fn add(&self, stats: &mut Self::Stats, obs: &Self::Obs);
    fn remove(&self, stats: &mut Self::Stats, obs: &Self::Obs);

    /// Log predictive density of `obs` given the observations summarized by `stats`.
    fn log_predictive(&self, obs: &Self::Obs, stats: &Self::Stats) -> f64;
}

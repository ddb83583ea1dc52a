//! The g-and-k family, defined through its quantile function
//! `Q(u) = a + b (1 + c tanh(g z / 2)) z (1 + z^2)^k` with `z = Phi^-1(u)`.
//! Sampling pushes standard normals through `Q`; the density is only
//! reachable by numerically inverting `Q`.

use std::f64::consts::{PI, SQRT_2};

use log::debug;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use super::{DensityModel, KernelModel};
use crate::error::{Error, Result};

pub const GK_C: f64 = 0.8;

/// Range of standard-normal scores searched when inverting the quantile.
const Z_LIMIT: f64 = 38.0;
/// Normal scores used for simulation are clipped here (tail mass ~2e-19).
const Z_SIM: f64 = 9.0;
/// Largest simulated magnitude allowed; keeps q-th power costs finite.
const MAX_ABS: f64 = 1e100;

fn simulation_score<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(StandardNormal).clamp(-Z_SIM, Z_SIM)
}

pub fn standard_normal_quantile(u: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkParams {
    pub a: f64,
    pub b: f64,
    pub g: f64,
    pub k: f64,
    pub c: f64,
}

impl GkParams {
    pub fn new(a: f64, b: f64, g: f64, k: f64) -> Result<Self> {
        if !(a.is_finite() && g.is_finite() && b.is_finite() && k.is_finite()) {
            return Err(Error::NonFinite("g-and-k parameters"));
        }
        if b <= 0.0 {
            return Err(Error::InvalidParameter(format!("g-and-k scale must be positive, got {b}")));
        }
        if k <= -0.5 {
            return Err(Error::InvalidParameter(format!("g-and-k k must exceed -0.5, got {k}")));
        }
        Ok(Self { a, b, g, k, c: GK_C })
    }

    /// Quantile as a function of the standard-normal score `z`.
    pub fn transform(&self, z: f64) -> f64 {
        self.a + self.b * (1.0 + self.c * (0.5 * self.g * z).tanh()) * z * (1.0 + z * z).powf(self.k)
    }

    /// `dQ/dz`.
    pub fn transform_slope(&self, z: f64) -> f64 {
        let half = 0.5 * self.g * z;
        let th = half.tanh();
        let sech2 = 1.0 - th * th;
        let w = 1.0 + z * z;
        let wk = w.powf(self.k);
        let skew = 1.0 + self.c * th;
        self.b * (0.5 * self.c * self.g * sech2 * z * wk + skew * wk * (1.0 + 2.0 * self.k * z * z / w))
    }

    /// True when every simulated value (scores within +-9) stays below 1e100
    /// in magnitude, so transport costs remain finite.
    pub fn is_representable(&self) -> bool {
        [-Z_SIM, Z_SIM]
            .iter()
            .all(|&z| self.transform(z).abs() <= MAX_ABS)
    }

    /// Checks `dQ/dz > 0` at 1000 interior quantile levels.
    pub fn is_monotone(&self) -> bool {
        // c = 0.8 with k >= 0 is a valid quantile function for every g
        if self.k >= 0.0 && self.c.abs() <= 0.83 {
            return true;
        }
        (1..=1000).all(|i| {
            let u = i as f64 / 1001.0;
            self.transform_slope(standard_normal_quantile(u)) > 0.0
        })
    }
}

/// `Q(u)` for `u` strictly inside `(0, 1)`.
pub fn gk_quantile(u: f64, p: &GkParams) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level must lie in (0, 1), got {u}")));
    }
    Ok(p.transform(standard_normal_quantile(u)))
}

/// Log density at `x`: find `z` with `Q(z) = x` by bisection, then
/// `log f(x) = log phi(z) - log Q'(z)`. Returns `-inf` for `x` outside the
/// numerically reachable range.
pub fn gk_log_density(x: f64, p: &GkParams) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite("g-and-k density argument"));
    }
    if !p.is_monotone() {
        return Err(Error::NonMonotone);
    }
    let (mut lo, mut hi) = (-Z_LIMIT, Z_LIMIT);
    while !p.transform(lo).is_finite() {
        lo *= 0.5;
    }
    while !p.transform(hi).is_finite() {
        hi *= 0.5;
    }
    if x < p.transform(lo) || x > p.transform(hi) {
        return Ok(f64::NEG_INFINITY);
    }
    let tol = 1e-10 * (1.0 + x.abs());
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        z = 0.5 * (lo + hi);
        let q = p.transform(z);
        if (q - x).abs() <= tol {
            break;
        }
        if q < x {
            lo = z;
        } else {
            hi = z;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let slope = p.transform_slope(z);
    if !(slope > 0.0) {
        return Err(Error::NonMonotone);
    }
    Ok(-0.5 * (2.0 * PI).ln() - 0.5 * z * z - slope.ln())
}

/// Independent base measure over `(a, b, g, k)`:
/// `a ~ N(a_mean, a_var)`, `b ~ IG(b_shape, b_scale)`, `g ~ N(g_mean, g_var)`,
/// `k ~ IG(k_shape, k_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkPrior {
    pub a_mean: f64,
    pub a_var: f64,
    pub b_shape: f64,
    pub b_scale: f64,
    pub g_mean: f64,
    pub g_var: f64,
    pub k_shape: f64,
    pub k_scale: f64,
}

impl Default for GkPrior {
    fn default() -> Self {
        Self {
            a_mean: 0.0,
            a_var: 25.0,
            b_shape: 1.0,
            b_scale: 2.0,
            g_mean: 0.0,
            g_var: 25.0,
            k_shape: 1.0,
            k_scale: 2.0,
        }
    }
}

fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    1.0 / Gamma::new(shape, 1.0 / scale).expect("validated").sample(rng)
}

fn log_inv_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -(shape + 1.0) * x.ln() - scale / x
}

fn log_normal_kernel(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (x - mean) * (x - mean) / var
}

impl GkPrior {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.a_var, self.b_shape, self.b_scale, self.g_var, self.k_shape, self.k_scale,
        ];
        if positive.iter().all(|v| v.is_finite() && *v > 0.0)
            && self.a_mean.is_finite()
            && self.g_mean.is_finite()
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter("g-and-k prior variances/shapes/scales must be positive".into()))
        }
    }

    /// Draws until the parameters give a valid, monotone quantile function
    /// that stays finite on the checking grid.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GkParams {
        loop {
            let za: f64 = rng.sample(StandardNormal);
            let zg: f64 = rng.sample(StandardNormal);
            let a = self.a_mean + self.a_var.sqrt() * za;
            let b = sample_inv_gamma(self.b_shape, self.b_scale, rng);
            let g = self.g_mean + self.g_var.sqrt() * zg;
            let k = sample_inv_gamma(self.k_shape, self.k_scale, rng);
            match GkParams::new(a, b, g, k) {
                Ok(p) if p.is_monotone() && p.is_representable() => return p,
                _ => debug!("rejected g-and-k prior draw a={a} b={b} g={g} k={k}"),
            }
        }
    }

    pub fn log_density(&self, p: &GkParams) -> f64 {
        log_normal_kernel(p.a, self.a_mean, self.a_var)
            + log_inv_gamma(p.b, self.b_shape, self.b_scale)
            + log_normal_kernel(p.g, self.g_mean, self.g_var)
            + log_inv_gamma(p.k, self.k_shape, self.k_scale)
    }

    /// Random walk with additive moves on `a, g` and multiplicative on `b, k`.
    fn random_walk<R: Rng + ?Sized>(p: &GkParams, scale: f64, rng: &mut R) -> (GkParams, f64) {
        let mut step = || -> f64 { scale * rng.sample::<f64, _>(StandardNormal) };
        let (sa, sb, sg, sk) = (step(), step(), step(), step());
        let proposed = GkParams {
            a: p.a + sa,
            b: p.b * sb.exp(),
            g: p.g + sg,
            k: p.k * sk.exp(),
            c: p.c,
        };
        (proposed, sb + sk)
    }
}

/// Univariate g-and-k kernel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GkModel {
    pub prior: GkPrior,
}

impl GkModel {
    pub fn new(prior: GkPrior) -> Result<Self> {
        prior.validate()?;
        Ok(Self { prior })
    }
}

impl KernelModel for GkModel {
    type Param = GkParams;
    type Obs = f64;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> GkParams {
        self.prior.sample(rng)
    }

    fn sample_datum<R: Rng + ?Sized>(&self, param: &GkParams, rng: &mut R) -> f64 {
        param.transform(simulation_score(rng))
    }

    fn distance(&self, a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }

    fn as_scalar(&self, obs: &f64) -> Option<f64> {
        Some(*obs)
    }
}

impl DensityModel for GkModel {
    fn log_density(&self, obs: &f64, param: &GkParams) -> Result<f64> {
        gk_log_density(*obs, param)
    }

    fn log_prior(&self, param: &GkParams) -> f64 {
        if param.b <= 0.0 || param.k <= -0.5 || !param.is_monotone() {
            return f64::NEG_INFINITY;
        }
        self.prior.log_density(param)
    }

    fn random_walk<R: Rng + ?Sized>(
        &self,
        param: &GkParams,
        scale: f64,
        rng: &mut R,
    ) -> (GkParams, f64) {
        GkPrior::random_walk(param, scale, rng)
    }
}

/// Bivariate g-and-k: correlated standard normals pushed coordinatewise
/// through each coordinate's own transform. No density is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gk2Model {
    prior: GkPrior,
    rho: f64,
}

impl Gk2Model {
    pub fn new(prior: GkPrior, rho: f64) -> Result<Self> {
        prior.validate()?;
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("correlation must satisfy |rho| < 1, got {rho}")));
        }
        Ok(Self { prior, rho })
    }

    pub fn preset() -> Self {
        Self::new(GkPrior::default(), 0.5).expect("valid preset")
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl KernelModel for Gk2Model {
    type Param = [GkParams; 2];
    type Obs = [f64; 2];

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> [GkParams; 2] {
        [self.prior.sample(rng), self.prior.sample(rng)]
    }

    fn sample_datum<R: Rng + ?Sized>(&self, param: &[GkParams; 2], rng: &mut R) -> [f64; 2] {
        let z1 = simulation_score(rng);
        let w = simulation_score(rng);
        let z2 = (self.rho * z1 + (1.0 - self.rho * self.rho).sqrt() * w).clamp(-Z_SIM, Z_SIM);
        [param[0].transform(z1), param[1].transform(z2)]
    }

    fn distance(&self, a: &[f64; 2], b: &[f64; 2]) -> f64 {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}

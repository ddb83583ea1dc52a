#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use abcpart::pitman_yor::{ExchangeablePrior, PYParams};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// Every set partition of `n` items as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for l in 0..=max + 1 {
            prefix.push(l);
            go(prefix, max.max(l), n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(&mut vec![0], 0, n, &mut out);
    out
}

pub fn counts_of(labels: &[usize]) -> Vec<usize> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut c = vec![0; k];
    for &l in labels {
        c[l] += 1;
    }
    c
}

pub fn eppf(prior: &PYParams, labels: &[usize]) -> f64 {
    prior.log_eppf(&counts_of(labels)).unwrap().exp()
}

/// Pearson chi-square p-value of observed counts against cell probabilities.
pub fn chi2_pvalue(observed: &[f64], probs: &[f64]) -> f64 {
    let total: f64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(o, p)| {
            let e = p * total;
            (o - e) * (o - e) / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Observed counts of each enumerated partition in a chain of label vectors.
pub fn cell_counts(cells: &[Vec<usize>], draws: impl IntoIterator<Item = Vec<usize>>) -> Vec<f64> {
    let index: HashMap<&Vec<usize>, usize> = cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut counts = vec![0.0; cells.len()];
    for d in draws {
        counts[index[&d]] += 1.0;
    }
    counts
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Log marginal likelihood of `x` under `var ~ IG(a, b)`,
/// `mean | var ~ N(m0, v var)`, Normal likelihood. Closed form.
pub fn nig_log_evidence(x: &[f64], a: f64, b: f64, m0: f64, v: f64) -> f64 {
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    let ss: f64 = x.iter().map(|xi| (xi - mean).powi(2)).sum();
    let k0 = 1.0 / v;
    let kn = k0 + m;
    let an = a + 0.5 * m;
    let bn = b + 0.5 * ss + k0 * m * (mean - m0).powi(2) / (2.0 * kn);
    ln_gamma(an) - ln_gamma(a) + a * b.ln() - an * bn.ln() + 0.5 * (k0 / kn).ln()
        - 0.5 * m * (2.0 * PI).ln()
}

/// Exact posterior over all set partitions of `x` for a PY prior and the
/// NIG-Normal kernel.
pub fn nig_posterior(x: &[f64], prior: &PYParams, hyper: (f64, f64, f64, f64)) -> (Vec<Vec<usize>>, Vec<f64>) {
    let (a, b, m0, v) = hyper;
    let cells = set_partitions(x.len());
    let logs: Vec<f64> = cells
        .iter()
        .map(|labels| {
            let k = labels.iter().max().unwrap() + 1;
            let evidence: f64 = (0..k)
                .map(|c| {
                    let block: Vec<f64> = labels
                        .iter()
                        .zip(x)
                        .filter(|(l, _)| **l == c)
                        .map(|(_, xi)| *xi)
                        .collect();
                    nig_log_evidence(&block, a, b, m0, v)
                })
                .sum();
            prior.log_eppf(&counts_of(labels)).unwrap() + evidence
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    (cells, w.into_iter().map(|x| x / z).collect())
}

//! Pitman-Yor exchangeable partition machinery: EPPF, predictive (urn)
//! probabilities and the sequential chain-rule proposal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// A prior over exchangeable random partitions, described by its EPPF.
///
/// `predictive_weights` has a generic implementation through EPPF ratios;
/// implementors with closed forms should override it.
pub trait ExchangeablePrior {
    /// Log-probability of any particular set partition with block sizes `counts`.
    fn log_eppf(&self, counts: &[usize]) -> Result<f64>;

    /// Probabilities that the next item joins each existing block, followed by
    /// the probability that it opens a new one.
    fn predictive_weights(&self, counts: &[usize]) -> Vec<f64> {
        if counts.is_empty() {
            return vec![1.0];
        }
        let base = self
            .log_eppf(counts)
            .expect("counts are nonempty and valid");
        let mut grown = counts.to_vec();
        let mut weights = Vec::with_capacity(counts.len() + 1);
        for j in 0..counts.len() {
            grown[j] += 1;
            weights.push((self.log_eppf(&grown).expect("valid counts") - base).exp());
            grown[j] -= 1;
        }
        grown.push(1);
        weights.push((self.log_eppf(&grown).expect("valid counts") - base).exp());
        weights
    }
}

/// Strength `theta` and discount `sigma` of a Pitman-Yor process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PYParams {
    strength: f64,
    discount: f64,
}

impl PYParams {
    pub fn new(strength: f64, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidParameter(format!(
                "discount must lie in [0, 1), got {discount}"
            )));
        }
        if !strength.is_finite() || strength <= -discount {
            return Err(Error::InvalidParameter(format!(
                "strength must exceed -discount, got {strength}"
            )));
        }
        Ok(Self { strength, discount })
    }

    /// Dirichlet process with concentration `strength`.
    pub fn dirichlet(strength: f64) -> Result<Self> {
        Self::new(strength, 0.0)
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }
}

impl Default for PYParams {
    fn default() -> Self {
        Self {
            strength: 1.0,
            discount: 0.2,
        }
    }
}

/// `log (x)_m = log x(x+1)...(x+m-1)`, accumulated in log space.
fn log_rising(x: f64, m: usize) -> f64 {
    (0..m).map(|i| (x + i as f64).ln()).sum()
}

impl ExchangeablePrior for PYParams {
    fn log_eppf(&self, counts: &[usize]) -> Result<f64> {
        if counts.is_empty() {
            return Err(Error::Empty("block counts"));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidParameter("block counts must be positive".into()));
        }
        let (theta, sigma) = (self.strength, self.discount);
        let n: usize = counts.iter().sum();
        let k = counts.len();
        let opened: f64 = (1..k).map(|j| (theta + j as f64 * sigma).ln()).sum();
        let blocks: f64 = counts.iter().map(|&c| log_rising(1.0 - sigma, c - 1)).sum();
        Ok(opened + blocks - log_rising(theta + 1.0, n - 1))
    }

    fn predictive_weights(&self, counts: &[usize]) -> Vec<f64> {
        if counts.is_empty() {
            return vec![1.0];
        }
        let n: usize = counts.iter().sum();
        let denom = self.strength + n as f64;
        let mut weights: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64 - self.discount) / denom)
            .collect();
        weights.push((self.strength + counts.len() as f64 * self.discount) / denom);
        weights
    }
}

/// Cluster parameters (atoms) plus the partition linking items to them.
///
/// Atom `j` belongs to block `j` of `partition`. Atoms are identified by
/// position only; payload equality carries no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<P> {
    atoms: Vec<P>,
    partition: Partition,
}

impl<P> LatentState<P> {
    pub fn new(atoms: Vec<P>, partition: Partition) -> Result<Self> {
        if atoms.len() != partition.k() {
            return Err(Error::SizeMismatch {
                left: atoms.len(),
                right: partition.k(),
            });
        }
        Ok(Self { atoms, partition })
    }

    pub fn atoms(&self) -> &[P] {
        &self.atoms
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    /// Parameter attached to `item`.
    pub fn param(&self, item: usize) -> &P {
        &self.atoms[self.partition.label(item)]
    }

    pub fn into_parts(self) -> (Vec<P>, Partition) {
        (self.atoms, self.partition)
    }
}

impl<P: Clone> LatentState<P> {
    /// Same atoms, items rearranged by `permutation` (source index to
    /// destination index).
    pub fn permuted(&self, permutation: &[usize]) -> Result<Self> {
        let partition = self.partition.permuted(permutation)?;
        // canonical relabeling may reorder blocks; carry atoms along
        let mut atoms: Vec<Option<P>> = vec![None; partition.k()];
        for (src, &dst) in permutation.iter().enumerate() {
            let slot = &mut atoms[partition.label(dst)];
            if slot.is_none() {
                *slot = Some(self.atoms[self.partition.label(src)].clone());
            }
        }
        Ok(Self {
            atoms: atoms.into_iter().map(|a| a.expect("every block is hit")).collect(),
            partition,
        })
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Runs `steps` urn steps on top of existing blocks `counts` (with payloads
/// `atoms`). Returns the new items' labels (indexing into the extended atom
/// list) and the extended atom list.
fn run_urn<P, Pr, F, R>(
    mut counts: Vec<usize>,
    mut atoms: Vec<P>,
    steps: usize,
    prior: &Pr,
    base_draw: &mut F,
    rng: &mut R,
) -> (Vec<usize>, Vec<P>)
where
    Pr: ExchangeablePrior + ?Sized,
    F: FnMut(&mut R) -> P,
    R: Rng + ?Sized,
{
    let mut labels = Vec::with_capacity(steps);
    for _ in 0..steps {
        let weights = prior.predictive_weights(&counts);
        let j = sample_index(&weights, rng);
        if j == counts.len() {
            counts.push(1);
            atoms.push(base_draw(rng));
        } else {
            counts[j] += 1;
        }
        labels.push(j);
    }
    (labels, atoms)
}

/// Keeps only the atoms referenced by `labels` and builds the induced state.
fn restrict<P>(labels: &[usize], atoms: Vec<P>) -> LatentState<P> {
    let partition = Partition::canonicalize(labels).expect("labels are nonempty");
    let mut slots: Vec<Option<P>> = atoms.into_iter().map(Some).collect();
    let mut kept = Vec::with_capacity(partition.k());
    let mut next = 0;
    for &raw in labels {
        // first appearance of a raw label is exactly the next canonical label
        if let Some(atom) = slots[raw].take() {
            kept.push(atom);
            next += 1;
        }
    }
    debug_assert_eq!(next, partition.k());
    LatentState {
        atoms: kept,
        partition,
    }
}

/// Draws `n` items from the prior urn, with fresh atoms from `base_draw`.
pub fn sample_prior_state<P, Pr, F, R>(
    n: usize,
    prior: &Pr,
    mut base_draw: F,
    rng: &mut R,
) -> Result<LatentState<P>>
where
    Pr: ExchangeablePrior + ?Sized,
    F: FnMut(&mut R) -> P,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::Empty("item count"));
    }
    let (labels, atoms) = run_urn(Vec::new(), Vec::new(), n, prior, &mut base_draw, rng);
    Ok(restrict(&labels, atoms))
}

/// Chain-rule proposal: generates items `n+1..2n` sequentially from the
/// predictive given the current `n` items and returns the second block.
///
/// Atoms of `current` that receive new items keep their payloads; atoms that
/// receive none are dropped.
pub fn chain_rule_propose<P, Pr, F, R>(
    current: &LatentState<P>,
    prior: &Pr,
    mut base_draw: F,
    rng: &mut R,
) -> Result<LatentState<P>>
where
    P: Clone,
    Pr: ExchangeablePrior + ?Sized,
    F: FnMut(&mut R) -> P,
    R: Rng + ?Sized,
{
    let n = current.n();
    if n == 0 {
        return Err(Error::Empty("current state"));
    }
    let (labels, atoms) = run_urn(
        current.partition.counts().to_vec(),
        current.atoms.clone(),
        n,
        prior,
        &mut base_draw,
        rng,
    );
    Ok(restrict(&labels, atoms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Every set partition of `n` items as a restricted growth string.
    pub(crate) fn set_partitions(n: usize) -> Vec<Vec<usize>> {
        fn go(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
            if prefix.len() == n {
                out.push(prefix.clone());
                return;
            }
            for l in 0..=max + 1 {
                prefix.push(l);
                let next_max = if l > max { l } else { max };
                go(prefix, next_max, n, out);
                prefix.pop();
            }
        }
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        let mut prefix = vec![0];
        go(&mut prefix, 0, n, &mut out);
        out
    }

    fn counts_of(labels: &[usize]) -> Vec<usize> {
        Partition::canonicalize(labels).unwrap().counts().to_vec()
    }

    /// Plain-product EPPF, no log accumulation.
    fn eppf_direct(counts: &[usize], theta: f64, sigma: f64) -> f64 {
        let rising = |x: f64, m: usize| (0..m).fold(1.0, |acc, i| acc * (x + i as f64));
        let n: usize = counts.iter().sum();
        let k = counts.len();
        let num: f64 = (1..k).map(|j| theta + j as f64 * sigma).product();
        let blocks: f64 = counts.iter().map(|&c| rising(1.0 - sigma, c - 1)).product();
        num * blocks / rising(theta + 1.0, n - 1)
    }

    #[test]
    fn params_validation() {
        assert!(PYParams::new(1.0, 0.2).is_ok());
        assert!(PYParams::new(-0.1, 0.2).is_ok());
        assert!(PYParams::new(-0.2, 0.2).is_err());
        assert!(PYParams::new(1.0, 1.0).is_err());
        assert!(PYParams::new(1.0, -0.1).is_err());
    }

    #[test]
    fn eppf_examples() {
        let p = PYParams::new(1.0, 0.2).unwrap();
        assert!((p.log_eppf(&[2]).unwrap() - 0.4f64.ln()).abs() < 1e-14);
        assert!((p.log_eppf(&[1, 1]).unwrap() - 0.6f64.ln()).abs() < 1e-14);
        assert_eq!(p.log_eppf(&[1]).unwrap(), 0.0);
        assert!(p.log_eppf(&[]).is_err());
    }

    #[test]
    fn eppf_matches_direct_products() {
        let p = PYParams::new(2.0, 0.5).unwrap();
        for labels in set_partitions(6) {
            let c = counts_of(&labels);
            let direct = eppf_direct(&c, 2.0, 0.5).ln();
            assert!((p.log_eppf(&c).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn eppf_large_n_is_finite() {
        let p = PYParams::default();
        let v = p.log_eppf(&[400, 300, 1]).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn predictive_examples() {
        let p = PYParams::new(1.0, 0.2).unwrap();
        let w = p.predictive_weights(&[3, 1]);
        for (got, want) in w.iter().zip([0.56, 0.16, 0.28]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert_eq!(p.predictive_weights(&[]), vec![1.0]);
        let dp = PYParams::dirichlet(1.0).unwrap();
        assert_eq!(dp.predictive_weights(&[1]), vec![0.5, 0.5]);
    }

    struct GenericOnly(PYParams);
    impl ExchangeablePrior for GenericOnly {
        fn log_eppf(&self, counts: &[usize]) -> Result<f64> {
            self.0.log_eppf(counts)
        }
    }

    #[test]
    fn generic_ratio_route_matches_closed_form() {
        for (t, s) in [(1.0, 0.2), (0.5, 0.0), (2.0, 0.5), (-0.1, 0.3)] {
            let p = PYParams::new(t, s).unwrap();
            let g = GenericOnly(p);
            for counts in [vec![1], vec![3, 1], vec![2, 2, 5], vec![10, 1, 1, 1]] {
                let a = p.predictive_weights(&counts);
                let b = g.predictive_weights(&counts);
                assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-12, "{counts:?}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn new_cluster_probability_grows_with_strength() {
        let lo = PYParams::new(1.0, 0.2).unwrap();
        let hi = PYParams::new(50.0, 0.2).unwrap();
        for counts in [vec![1], vec![3, 1], vec![5, 5, 2]] {
            let a = *lo.predictive_weights(&counts).last().unwrap();
            let b = *hi.predictive_weights(&counts).last().unwrap();
            assert!(b > a);
        }
    }

    #[test]
    fn additivity_over_all_partitions() {
        for (t, s) in [(1.0, 0.2), (0.5, 0.0), (2.0, 0.5)] {
            let p = PYParams::new(t, s).unwrap();
            for n in 1..=6 {
                let total: f64 = set_partitions(n)
                    .iter()
                    .map(|l| p.log_eppf(&counts_of(l)).unwrap().exp())
                    .sum();
                assert!((total - 1.0).abs() < 1e-10, "n={n}: {total}");
            }
        }
    }

    #[test]
    fn symmetric_in_counts() {
        let p = PYParams::new(1.3, 0.4).unwrap();
        let a = p.log_eppf(&[4, 1, 2]).unwrap();
        let b = p.log_eppf(&[1, 2, 4]).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn single_item_proposal_reuse_rate() {
        let p = PYParams::new(1.0, 0.2).unwrap();
        let current = LatentState::new(vec![-1.0f64], Partition::one_block(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 40_000;
        let mut reused = 0;
        for _ in 0..draws {
            let prop = chain_rule_propose(&current, &p, |r: &mut ChaCha8Rng| r.random::<f64>(), &mut rng)
                .unwrap();
            if prop.atoms()[0] == -1.0 {
                reused += 1;
            }
        }
        let freq = reused as f64 / draws as f64;
        let se = (0.4f64 * 0.6 / draws as f64).sqrt();
        assert!((freq - 0.4).abs() < 4.0 * se, "freq {freq}");
    }

    #[test]
    fn proposal_structure() {
        let p = PYParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counter = 0u32;
        let current = sample_prior_state(
            30,
            &p,
            |_: &mut ChaCha8Rng| {
                counter += 1;
                counter
            },
            &mut rng,
        )
        .unwrap();
        let old: Vec<u32> = current.atoms().to_vec();
        let prop = chain_rule_propose(&current, &p, |_: &mut ChaCha8Rng| 1000u32, &mut rng).unwrap();
        assert_eq!(prop.n(), 30);
        assert_eq!(prop.atoms().len(), prop.partition().k());
        for a in prop.atoms() {
            assert!(*a == 1000 || old.contains(a));
        }
        // items sharing an atom index share a block
        for i in 0..30 {
            for j in 0..30 {
                let same = prop.partition().label(i) == prop.partition().label(j);
                assert_eq!(same, std::ptr::eq(prop.param(i), prop.param(j)));
            }
        }
    }

    #[test]
    fn seeded_replay() {
        let p = PYParams::default();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cur = sample_prior_state(20, &p, |r: &mut ChaCha8Rng| r.random::<f64>(), &mut rng)
                .unwrap();
            chain_rule_propose(&cur, &p, |r: &mut ChaCha8Rng| r.random::<f64>(), &mut rng).unwrap()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn permuted_state_keeps_atom_assignment() {
        let state = LatentState::new(
            vec!['a', 'b'],
            Partition::canonicalize(&[0, 1, 1]).unwrap(),
        )
        .unwrap();
        let perm = [2, 0, 1];
        let moved = state.permuted(&perm).unwrap();
        for (src, &dst) in perm.iter().enumerate() {
            assert_eq!(state.param(src), moved.param(dst));
        }
    }
}

//! Set partitions of `n` items, stored as dense cluster labels, together with
//! the entropy and variation-of-information functionals used to compare them.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// A set partition of `{0, .., n-1}`.
///
/// Labels are dense and ordered by first appearance, so two `Partition`s
/// compare equal exactly when they encode the same set partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl Partition {
    /// Relabels arbitrary tags by order of first appearance.
    pub fn canonicalize<T: Eq + Hash + Copy>(raw: &[T]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("partition labels"));
        }
        let mut seen: HashMap<T, usize> = HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut counts = Vec::new();
        for tag in raw {
            let next = seen.len();
            let label = *seen.entry(*tag).or_insert(next);
            if label == counts.len() {
                counts.push(0);
            }
            counts[label] += 1;
            labels.push(label);
        }
        Ok(Self { labels, counts })
    }

    /// Single block holding all `n` items.
    pub fn one_block(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            counts: if n > 0 { vec![n] } else { Vec::new() },
        }
    }

    /// `n` singleton blocks.
    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            counts: vec![1; n],
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn label(&self, item: usize) -> usize {
        self.labels[item]
    }

    /// Members of each block, in label order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.k()];
        for (item, &label) in self.labels.iter().enumerate() {
            blocks[label].push(item);
        }
        blocks
    }

    /// Shannon entropy of the block-size distribution, in nats.
    pub fn entropy(&self) -> f64 {
        let n = self.n() as f64;
        -self
            .counts
            .iter()
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    }

    /// Variation of information `H(a) + H(b) - 2 I(a, b)` in nats.
    pub fn variation_of_information(&self, other: &Partition) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::SizeMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        let mi = self.mutual_information_unchecked(other);
        Ok((self.entropy() + other.entropy() - 2.0 * mi).max(0.0))
    }

    /// Variation of information divided by `log n`; lies in `[0, 1]`.
    pub fn normalized_vi(&self, other: &Partition) -> Result<f64> {
        if self.n() < 2 {
            return Err(Error::InvalidParameter(
                "normalized VI needs at least two items".into(),
            ));
        }
        let vi = self.variation_of_information(other)?;
        Ok(vi / (self.n() as f64).ln())
    }

    pub fn mutual_information(&self, other: &Partition) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::SizeMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        Ok(self.mutual_information_unchecked(other))
    }

    fn mutual_information_unchecked(&self, other: &Partition) -> f64 {
        let (k1, k2) = (self.k(), other.k());
        let mut joint = vec![0usize; k1 * k2];
        for (&a, &b) in self.labels.iter().zip(&other.labels) {
            joint[a * k2 + b] += 1;
        }
        let n = self.n() as f64;
        let mut mi = 0.0;
        for i in 0..k1 {
            let pi = self.counts[i] as f64 / n;
            for j in 0..k2 {
                let c = joint[i * k2 + j];
                // zero cells contribute nothing in the limit
                if c == 0 {
                    continue;
                }
                let pij = c as f64 / n;
                let pj = other.counts[j] as f64 / n;
                mi += pij * (pij / (pi * pj)).ln();
            }
        }
        mi
    }

    /// Applies `permutation`, which maps a source index to a destination
    /// index: item `permutation[j]` of the result gets the block of item `j`.
    pub fn permuted(&self, permutation: &[usize]) -> Result<Partition> {
        if permutation.len() != self.n() {
            return Err(Error::SizeMismatch {
                left: permutation.len(),
                right: self.n(),
            });
        }
        let mut raw = vec![usize::MAX; self.n()];
        for (src, &dst) in permutation.iter().enumerate() {
            raw[dst] = self.labels[src];
        }
        if raw.contains(&usize::MAX) {
            return Err(Error::InvalidParameter("permutation is not a bijection".into()));
        }
        Partition::canonicalize(&raw)
    }
}

/// Posterior co-clustering frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    sample_count: usize,
}

impl SimilarityMatrix {
    pub(crate) fn from_raw(n: usize, values: Vec<f64>, sample_count: usize) -> Self {
        debug_assert_eq!(values.len(), n * n);
        Self {
            n,
            values,
            sample_count,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n.max(1))
    }
}

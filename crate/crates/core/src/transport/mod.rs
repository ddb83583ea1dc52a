//! Optimal transport between two equally sized samples with uniform weights.
//!
//! With uniform weights an optimal plan can always be taken to be a
//! permutation, so every solver reports one alongside the distance. The
//! permutation maps a synthetic-sample index to the data index it is matched to.

mod hungarian;
mod sinkhorn;
mod sorted;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hungarian::hungarian;
pub use sinkhorn::{sinkhorn, sinkhorn_traced, SinkhornOptions};
pub use sorted::{wasserstein_1d, SortedReference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Sorted1d,
    Hungarian,
    Sinkhorn,
}

/// Square matrix of costs `c(y_i, s_j)^q`; rows index data, columns synthetic items.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    values: Vec<f64>,
    order: f64,
}

impl CostMatrix {
    /// `values` is row-major with `n * n` entries already raised to `order`.
    pub fn new(n: usize, values: Vec<f64>, order: f64) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::SizeMismatch {
                left: values.len(),
                right: n * n,
            });
        }
        if n == 0 {
            return Err(Error::Empty("cost matrix"));
        }
        check_order(order)?;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("cost matrix"));
        }
        Ok(Self { n, values, order })
    }

    /// Builds from rows (each of length `rows.len()`).
    pub fn from_rows(rows: &[Vec<f64>], order: f64) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::SizeMismatch {
                left: bad.len(),
                right: n,
            });
        }
        Self::new(n, rows.concat(), order)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n..(row + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }

    /// Sum of `C[permutation[j], j]` over synthetic indices `j`.
    pub fn assignment_cost(&self, permutation: &[usize]) -> f64 {
        permutation
            .iter()
            .enumerate()
            .map(|(col, &row)| self.get(row, col))
            .sum()
    }

    /// The transposed problem (rows and columns swap roles).
    pub fn transposed(&self) -> Self {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[j * n + i] = self.values[i * n + j];
            }
        }
        Self {
            n,
            values,
            order: self.order,
        }
    }
}

pub(crate) fn check_order(order: f64) -> Result<()> {
    if order.is_finite() && order >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "transport order must be >= 1, got {order}"
        )))
    }
}

/// `C[i][j] = metric(y_i, s_j)^order`.
pub fn build_cost<T, F>(y: &[T], s: &[T], metric: F, order: f64) -> Result<CostMatrix>
where
    F: Fn(&T, &T) -> f64,
{
    if y.len() != s.len() {
        return Err(Error::SizeMismatch {
            left: y.len(),
            right: s.len(),
        });
    }
    check_order(order)?;
    let mut values = Vec::with_capacity(y.len() * s.len());
    for a in y {
        for b in s {
            let d = metric(a, b);
            if !d.is_finite() || d < 0.0 {
                return Err(Error::NonFinite("metric value"));
            }
            values.push(if order == 1.0 { d } else { d.powf(order) });
        }
    }
    CostMatrix::new(y.len(), values, order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    /// `(cost / n)^(1/q)`: the order-q Wasserstein distance between the two
    /// empirical measures.
    pub distance: f64,
    /// Unnormalized transport cost, `n * distance^q`.
    pub raw_cost: f64,
    /// `permutation[j]` is the data index matched to synthetic index `j`.
    pub permutation: Vec<usize>,
    pub solver: SolverKind,
    pub iterations: usize,
    pub converged: bool,
}

impl TransportResult {
    pub(crate) fn from_cost(
        raw_cost: f64,
        n: usize,
        order: f64,
        permutation: Vec<usize>,
        solver: SolverKind,
    ) -> Self {
        Self {
            distance: normalized_distance(raw_cost, n, order),
            raw_cost,
            permutation,
            solver,
            iterations: 0,
            converged: true,
        }
    }

    /// Turns an unconverged Sinkhorn run into an error.
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                error: f64::NAN,
            })
        }
    }
}

pub(crate) fn normalized_distance(raw_cost: f64, n: usize, order: f64) -> f64 {
    let mean = (raw_cost / n as f64).max(0.0);
    if order == 1.0 {
        mean
    } else {
        mean.powf(1.0 / order)
    }
}

/// True when `permutation` is a bijection on `0..n`.
pub fn is_permutation(permutation: &[usize]) -> bool {
    let mut seen = vec![false; permutation.len()];
    for &p in permutation {
        if p >= seen.len() || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_cost_of_identical_samples_has_zero_diagonal() {
        let y = vec![[0.0, 1.0], [2.0, -1.0], [3.5, 0.5]];
        let euclid = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let c = build_cost(&y, &y, euclid, 1.0).unwrap();
        for i in 0..3 {
            assert_eq!(c.get(i, i), 0.0);
        }
    }

    #[test]
    fn order_two_squares_entries() {
        let y = [0.0, 1.0, 4.0];
        let s = [2.0, -1.0, 0.5];
        let abs = |a: &f64, b: &f64| (a - b).abs();
        let c1 = build_cost(&y, &s, abs, 1.0).unwrap();
        let c2 = build_cost(&y, &s, abs, 2.0).unwrap();
        for (a, b) in c1.values().iter().zip(c2.values()) {
            assert!((a * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn build_cost_rejects_bad_metric() {
        let y = [0.0, 1.0];
        assert!(matches!(
            build_cost(&y, &y, |_, _| f64::NAN, 1.0),
            Err(Error::NonFinite(_))
        ));
        assert!(build_cost(&y, &y, |_, _| -1.0, 1.0).is_err());
        assert!(build_cost(&y, &y[..1], |_, _| 1.0, 1.0).is_err());
        assert!(build_cost(&y, &y, |_, _| 1.0, 0.5).is_err());
    }

    #[test]
    fn cost_matrix_validation() {
        assert!(CostMatrix::new(2, vec![1.0, 2.0, 3.0], 1.0).is_err());
        assert!(CostMatrix::new(2, vec![1.0, f64::INFINITY, 3.0, 0.0], 1.0).is_err());
        assert!(CostMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn permutation_check() {
        assert!(is_permutation(&[2, 0, 1]));
        assert!(!is_permutation(&[0, 0, 1]));
        assert!(!is_permutation(&[0, 3, 1]));
    }
}

use super::{check_order, SolverKind, TransportResult};
use crate::error::{Error, Result};

/// Indices that stably sort `values` (ties keep their original order).
pub(crate) fn sort_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// One-dimensional data with its sort order computed once, so repeated
/// matching against fresh synthetic samples only sorts the synthetic side.
#[derive(Debug, Clone)]
pub struct SortedReference {
    values: Vec<f64>,
    order: Vec<usize>,
}

impl SortedReference {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("1-d sample"));
        }
        Ok(Self {
            values: values.to_vec(),
            order: sort_order(values),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Monotone coupling of order statistics.
    pub fn transport(&self, s: &[f64], order: f64) -> Result<TransportResult> {
        let n = self.values.len();
        if s.len() != n {
            return Err(Error::SizeMismatch { left: n, right: s.len() });
        }
        if n == 0 {
            return Err(Error::Empty("1-d sample"));
        }
        check_order(order)?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("1-d sample"));
        }
        let s_order = sort_order(s);
        let mut permutation = vec![0; n];
        let mut raw = 0.0;
        for (&yi, &sj) in self.order.iter().zip(&s_order) {
            permutation[sj] = yi;
            let d = (self.values[yi] - s[sj]).abs();
            raw += if order == 1.0 { d } else { d.powf(order) };
        }
        Ok(TransportResult::from_cost(
            raw,
            n,
            order,
            permutation,
            SolverKind::Sorted1d,
        ))
    }
}

/// Order-`q` Wasserstein distance between two equally sized 1-d samples.
pub fn wasserstein_1d(y: &[f64], s: &[f64], order: f64) -> Result<TransportResult> {
    if y.len() != s.len() {
        return Err(Error::SizeMismatch {
            left: y.len(),
            right: s.len(),
        });
    }
    SortedReference::new(y)?.transport(s, order)
}

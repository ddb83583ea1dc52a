use log::warn;
use serde::{Deserialize, Serialize};

use super::{normalized_distance, CostMatrix, SolverKind, TransportResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOptions {
    /// Entropic regularization strength. `None` means `0.05 * median(C)`.
    pub reg: Option<f64>,
    pub max_iters: usize,
    /// L1 tolerance on the row-marginal violation.
    pub tol: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            reg: None,
            max_iters: 10_000,
            tol: 1e-6,
        }
    }
}

impl SinkhornOptions {
    pub fn with_reg(reg: f64) -> Self {
        Self {
            reg: Some(reg),
            ..Self::default()
        }
    }

    /// `factor * median(C)`, falling back to the mean (or 1) for degenerate costs.
    pub fn relative_reg(cost: &CostMatrix, factor: f64) -> f64 {
        let med = cost.median();
        let scale = if med > 0.0 {
            med
        } else {
            let mean = cost.values().iter().sum::<f64>() / cost.values().len() as f64;
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        };
        factor * scale
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropic transport between uniform marginals, iterated on dual potentials
/// in the log domain.
///
/// Small regularizations are reached by annealing: the potentials are first
/// converged at a coarser `reg` and warm-start the next, halving each stage.
/// The reported distance is the transport cost of the regularized plan,
/// `(<C, P>)^(1/q)`. The permutation is rounded greedily from the plan.
/// Hitting `max_iters` returns the last iterate with `converged = false`.
pub fn sinkhorn(cost: &CostMatrix, options: SinkhornOptions) -> Result<TransportResult> {
    let (result, _) = sinkhorn_traced(cost, options, false)?;
    Ok(result)
}

/// As [`sinkhorn`], optionally recording the dual objective after every
/// iteration of the final stage. The dual objective never decreases.
pub fn sinkhorn_traced(
    cost: &CostMatrix,
    options: SinkhornOptions,
    trace: bool,
) -> Result<(TransportResult, Vec<f64>)> {
    let n = cost.n();
    let reg = options
        .reg
        .unwrap_or_else(|| SinkhornOptions::relative_reg(cost, 0.05));
    if !(reg.is_finite() && reg > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sinkhorn regularization must be positive, got {reg}"
        )));
    }
    if options.max_iters == 0 || !(options.tol > 0.0) {
        return Err(Error::InvalidParameter(
            "sinkhorn needs max_iters >= 1 and tol > 0".into(),
        ));
    }

    let mut stages = vec![reg];
    let coarsest = SinkhornOptions::relative_reg(cost, 0.5);
    while *stages.last().unwrap() * 2.0 < coarsest {
        let next = stages.last().unwrap() * 2.0;
        stages.push(next);
    }
    stages.reverse();

    let mut state = Potentials::new(n);
    let mut trace_values = Vec::new();
    let mut iterations = 0;
    let mut err = f64::INFINITY;
    let mut current_reg = stages[0];
    let last = stages.len() - 1;
    for (stage, &stage_reg) in stages.iter().enumerate() {
        let final_stage = stage == last;
        current_reg = stage_reg;
        loop {
            if iterations >= options.max_iters {
                break;
            }
            iterations += 1;
            err = state.iterate(cost, stage_reg);
            if trace && final_stage {
                trace_values.push(state.dual_objective(cost, stage_reg));
            }
            if err < options.tol {
                break;
            }
        }
        if iterations >= options.max_iters {
            break;
        }
    }
    let converged = err < options.tol && current_reg == reg;
    if !converged {
        warn!("sinkhorn stopped after {iterations} iterations, marginal error {err:.3e}");
    }

    let plan = state.plan(cost, current_reg);
    let expected = plan
        .iter()
        .zip(cost.values())
        .map(|(p, c)| p * c)
        .sum::<f64>();
    let permutation = greedy_round(&plan, n);
    let raw = expected * n as f64;
    Ok((
        TransportResult {
            distance: normalized_distance(raw, n, cost.order()),
            raw_cost: raw,
            permutation,
            solver: SolverKind::Sinkhorn,
            iterations,
            converged,
        },
        trace_values,
    ))
}

struct Potentials {
    f: Vec<f64>,
    g: Vec<f64>,
    log_w: f64,
}

impl Potentials {
    fn new(n: usize) -> Self {
        Self {
            f: vec![0.0; n],
            g: vec![0.0; n],
            log_w: -(n as f64).ln(),
        }
    }

    /// One row and one column scaling; returns the L1 row-marginal error.
    fn iterate(&mut self, cost: &CostMatrix, reg: f64) -> f64 {
        let n = cost.n();
        let (f, g) = (&mut self.f, &mut self.g);
        for i in 0..n {
            let row = cost.row(i);
            let lse = log_sum_exp((0..n).map(|j| (g[j] - row[j]) / reg));
            f[i] = reg * (self.log_w - lse);
        }
        for j in 0..n {
            let lse = log_sum_exp((0..n).map(|i| (f[i] - cost.get(i, j)) / reg));
            g[j] = reg * (self.log_w - lse);
        }
        // columns are exact after the g-step; measure the rows
        let target = 1.0 / n as f64;
        (0..n)
            .map(|i| {
                let row = cost.row(i);
                let mass: f64 = (0..n).map(|j| ((f[i] + g[j] - row[j]) / reg).exp()).sum();
                (mass - target).abs()
            })
            .sum()
    }

    fn dual_objective(&self, cost: &CostMatrix, reg: f64) -> f64 {
        let n = cost.n();
        let w = 1.0 / n as f64;
        let linear: f64 = w * (self.f.iter().sum::<f64>() + self.g.iter().sum::<f64>());
        let mut mass = 0.0;
        for i in 0..n {
            let row = cost.row(i);
            for j in 0..n {
                mass += ((self.f[i] + self.g[j] - row[j]) / reg).exp();
            }
        }
        linear - reg * mass
    }

    fn plan(&self, cost: &CostMatrix, reg: f64) -> Vec<f64> {
        let n = cost.n();
        (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                ((self.f[i] + self.g[j] - cost.get(i, j)) / reg).exp()
            })
            .collect()
    }
}

/// Repeatedly takes the largest remaining plan entry and strikes its row and
/// column. Returns `col_to_row`.
fn greedy_round(plan: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n * n).collect();
    order.sort_by(|&a, &b| plan[b].total_cmp(&plan[a]).then(a.cmp(&b)));
    let mut row_used = vec![false; n];
    let mut col_to_row = vec![usize::MAX; n];
    let mut assigned = 0;
    for idx in order {
        let (i, j) = (idx / n, idx % n);
        if row_used[i] || col_to_row[j] != usize::MAX {
            continue;
        }
        row_used[i] = true;
        col_to_row[j] = i;
        assigned += 1;
        if assigned == n {
            break;
        }
    }
    col_to_row
}

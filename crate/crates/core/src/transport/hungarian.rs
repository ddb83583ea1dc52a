use super::{CostMatrix, SolverKind, TransportResult};
use crate::error::Result;

/// Exact minimum-cost assignment by shortest augmenting paths with dual
/// potentials, O(n^3).
pub fn hungarian(cost: &CostMatrix) -> Result<TransportResult> {
    let n = cost.n();
    let col_to_row = solve(cost);
    let raw = cost.assignment_cost(&col_to_row);
    Ok(TransportResult::from_cost(
        raw,
        n,
        cost.order(),
        col_to_row,
        SolverKind::Hungarian,
    ))
}

/// Returns `col_to_row`. Rows are inserted one at a time; each insertion runs
/// a Dijkstra-like search over columns using reduced costs.
fn solve(cost: &CostMatrix) -> Vec<usize> {
    let n = cost.n();
    // 1-based bookkeeping with a virtual column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        matched[0] = row;
        let mut col0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[col0] = true;
            let r = matched[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            let crow = cost.row(r - 1);
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = crow[j - 1] - u[r] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if matched[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            matched[col0] = matched[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    (1..=n).map(|j| matched[j] - 1).collect()
}

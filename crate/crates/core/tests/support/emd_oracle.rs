//! Independent EMD oracle: enumerate every spanning tree of the bipartite
//! row/column graph, recover its unique flow by peeling leaves, keep the
//! feasible ones (all flows ≥ 0), and take the cheapest. Each feasible
//! tree is a vertex of the transportation polytope, and a linear program
//! attains its optimum at a vertex.
//!
//! Masses are integers (`n` per row, `m` per column) so feasibility is exact.

/// Minimum transport cost with weight `1/m` per row and `1/n` per column.
pub fn brute_force_emd(costs: &[f64], m: usize, n: usize) -> f64 {
    assert!(m > 0 && n > 0 && costs.len() == m * n);
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(m + n - 1);
    let mut parent: Vec<usize> = (0..m + n).collect();
    enumerate(costs, m, n, 0, &mut chosen, &mut parent, &mut best);
    best
}

fn root(parent: &[usize], mut x: usize) -> usize {
    while parent[x] != x {
        x = parent[x];
    }
    x
}

fn enumerate(
    costs: &[f64],
    m: usize,
    n: usize,
    next: usize,
    chosen: &mut Vec<usize>,
    parent: &mut Vec<usize>,
    best: &mut f64,
) {
    let need = m + n - 1;
    if chosen.len() == need {
        if let Some(cost) = tree_cost(costs, m, n, chosen) {
            *best = best.min(cost);
        }
        return;
    }
    if m * n - next < need - chosen.len() {
        return;
    }
    let (i, j) = (next / n, next % n);
    let (ri, rj) = (root(parent, i), root(parent, m + j));
    if ri != rj {
        parent[ri] = rj;
        chosen.push(next);
        enumerate(costs, m, n, next + 1, chosen, parent, best);
        chosen.pop();
        parent[ri] = ri;
    }
    enumerate(costs, m, n, next + 1, chosen, parent, best);
}

fn tree_cost(costs: &[f64], m: usize, n: usize, cells: &[usize]) -> Option<f64> {
    let mut left: Vec<i64> = (0..m).map(|_| n as i64).chain((0..n).map(|_| m as i64)).collect();
    let mut degree = vec![0usize; m + n];
    for &c in cells {
        degree[c / n] += 1;
        degree[m + c % n] += 1;
    }
    let mut used = vec![false; cells.len()];
    let mut total = 0.0;
    for _ in 0..cells.len() {
        // a leaf's single remaining edge must carry all its remaining mass
        let (k, leaf) = cells
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .find_map(|(k, &c)| {
                let (r, s) = (c / n, m + c % n);
                if degree[r] == 1 {
                    Some((k, r))
                } else if degree[s] == 1 {
                    Some((k, s))
                } else {
                    None
                }
            })?;
        let c = cells[k];
        let (r, s) = (c / n, m + c % n);
        let other = if leaf == r { s } else { r };
        let x = left[leaf];
        if x < 0 {
            return None;
        }
        left[leaf] = 0;
        left[other] -= x;
        degree[r] -= 1;
        degree[s] -= 1;
        used[k] = true;
        total += costs[c] * x as f64;
    }
    if left.iter().any(|&l| l != 0) {
        return None;
    }
    Some(total / (m * n) as f64)
}

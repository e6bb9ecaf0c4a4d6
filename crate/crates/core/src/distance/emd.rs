//! Exact balanced transportation solver (transportation simplex / MODI).
//!
//! Masses are integers so feasibility is exact; only costs are floating
//! point. Uniform view weights `1/m` and `1/n` are scaled to `n` per source
//! and `m` per sink, for a total mass of `m * n`.

use std::collections::VecDeque;

/// Reduced costs above `-PRICING_TOLERANCE` are treated as optimal.
const PRICING_TOLERANCE: f64 = 1e-12;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowCell {
    pub row: usize,
    pub col: usize,
    /// Fraction of the total mass moved along this cell.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transport {
    pub rows: usize,
    pub cols: usize,
    /// Σ cost · mass over all cells (total mass is 1).
    pub cost: f64,
    /// Cells carrying positive flow.
    pub flows: Vec<FlowCell>,
    pub pivots: usize,
}

impl Transport {
    /// Dense `rows x cols` flow matrix, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for f in &self.flows {
            out[f.row * self.cols + f.col] += f.mass;
        }
        out
    }
}

/// Solves the transportation problem with weight `1/rows` on every source
/// and `1/cols` on every sink. `costs` is row-major.
pub fn solve_uniform(costs: &[f64], rows: usize, cols: usize) -> Transport {
    assert!(rows > 0 && cols > 0, "transportation problem needs both sides");
    let supply = vec![cols as i64; rows];
    let demand = vec![rows as i64; cols];
    solve(costs, &supply, &demand)
}

/// Solves a balanced problem with integer supplies and demands.
pub fn solve(costs: &[f64], supply: &[i64], demand: &[i64]) -> Transport {
    let (m, n) = (supply.len(), demand.len());
    assert_eq!(costs.len(), m * n, "cost matrix shape");
    let total: i64 = supply.iter().sum();
    assert_eq!(total, demand.iter().sum::<i64>(), "unbalanced problem");
    assert!(supply.iter().chain(demand).all(|&s| s >= 0));

    let mut simplex = Simplex::initial(costs, supply, demand);
    simplex.optimize();

    let scale = total as f64;
    let mut cost = 0.0;
    let mut flows = Vec::new();
    for &cell in &simplex.basis {
        let x = simplex.flow[cell];
        if x > 0 {
            let mass = x as f64 / scale;
            cost += costs[cell] * mass;
            flows.push(FlowCell {
                row: cell / n,
                col: cell % n,
                mass,
            });
        }
    }
    flows.sort_by_key(|f| (f.row, f.col));
    Transport {
        rows: m,
        cols: n,
        cost,
        flows,
        pivots: simplex.pivots,
    }
}

struct Simplex<'a> {
    costs: &'a [f64],
    m: usize,
    n: usize,
    flow: Vec<i64>,
    in_basis: Vec<bool>,
    /// Exactly `m + n - 1` cells forming a spanning tree over rows ∪ cols.
    basis: Vec<usize>,
    pivots: usize,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl<'a> Simplex<'a> {
    /// Least-cost starting solution, padded with zero-flow cells to a spanning tree.
    fn initial(costs: &'a [f64], supply: &[i64], demand: &[i64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut order: Vec<usize> = (0..m * n).collect();
        order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));

        let mut left_supply = supply.to_vec();
        let mut left_demand = demand.to_vec();
        let mut flow = vec![0i64; m * n];
        let mut in_basis = vec![false; m * n];
        let mut basis = Vec::with_capacity(m + n - 1);
        // rows are nodes 0..m, cols are nodes m..m+n
        let mut parent: Vec<usize> = (0..m + n).collect();

        for &cell in &order {
            let (i, j) = (cell / n, cell % n);
            if left_supply[i] == 0 || left_demand[j] == 0 {
                continue;
            }
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, m + j));
            if ri == rj {
                continue;
            }
            let x = left_supply[i].min(left_demand[j]);
            left_supply[i] -= x;
            left_demand[j] -= x;
            flow[cell] = x;
            in_basis[cell] = true;
            basis.push(cell);
            parent[ri] = rj;
        }
        for &cell in &order {
            if basis.len() == m + n - 1 {
                break;
            }
            if in_basis[cell] {
                continue;
            }
            let (i, j) = (cell / n, cell % n);
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, m + j));
            if ri != rj {
                in_basis[cell] = true;
                basis.push(cell);
                parent[ri] = rj;
            }
        }
        debug_assert!(left_supply.iter().all(|&s| s == 0));
        debug_assert!(left_demand.iter().all(|&d| d == 0));
        Simplex {
            costs,
            m,
            n,
            flow,
            in_basis,
            basis,
            pivots: 0,
        }
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for &cell in &self.basis {
            let (i, j) = (cell / self.n, cell % self.n);
            adj[i].push((self.m + j, cell));
            adj[self.m + j].push((i, cell));
        }
        adj
    }

    /// Dual potentials `u` (rows) then `v` (cols) with `u_i + v_j = c_ij` on the tree.
    fn potentials(&self, adj: &[Vec<(usize, usize)>]) -> Vec<f64> {
        let mut pot = vec![f64::NAN; self.m + self.n];
        let mut queue = VecDeque::from([0usize]);
        pot[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &(next, cell) in &adj[node] {
                if pot[next].is_nan() {
                    pot[next] = self.costs[cell] - pot[node];
                    queue.push_back(next);
                }
            }
        }
        debug_assert!(pot.iter().all(|p| !p.is_nan()), "basis is not spanning");
        pot
    }

    fn entering(&self, pot: &[f64], bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let base = i * self.n;
            for j in 0..self.n {
                let cell = base + j;
                if self.in_basis[cell] {
                    continue;
                }
                let reduced = self.costs[cell] - pot[i] - pot[self.m + j];
                if reduced < -PRICING_TOLERANCE {
                    if bland {
                        return Some(cell);
                    }
                    if best.is_none_or(|(_, r)| reduced < r) {
                        best = Some((cell, reduced));
                    }
                }
            }
        }
        best.map(|(cell, _)| cell)
    }

    /// Tree cells on the path from row `i` to column `j`, in order from `i`.
    fn tree_path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let target = self.m + j;
        let mut via: Vec<Option<(usize, usize)>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([i]);
        seen[i] = true;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, cell) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    via[next] = Some((node, cell));
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while let Some((prev, cell)) = via[node] {
            path.push(cell);
            node = prev;
        }
        path.reverse();
        path
    }

    fn optimize(&mut self) {
        let max_pivots = 50 * (self.m * self.n + self.m + self.n) + 1000;
        let mut degenerate = 0usize;
        while self.pivots < max_pivots {
            let adj = self.adjacency();
            let pot = self.potentials(&adj);
            let Some(enter) = self.entering(&pot, degenerate >= DEGENERATE_STREAK) else {
                return;
            };
            let (i, j) = (enter / self.n, enter % self.n);
            let path = self.tree_path(&adj, i, j);
            debug_assert!(path.len() % 2 == 1);

            // odd positions (0-based even) lose flow, the rest gain it
            let mut leave = usize::MAX;
            let mut theta = i64::MAX;
            for &cell in path.iter().step_by(2) {
                let x = self.flow[cell];
                if x < theta || (x == theta && cell < leave) {
                    theta = x;
                    leave = cell;
                }
            }
            for (k, &cell) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[cell] -= theta;
                } else {
                    self.flow[cell] += theta;
                }
            }
            self.flow[enter] += theta;
            self.in_basis[leave] = false;
            self.in_basis[enter] = true;
            let slot = self
                .basis
                .iter()
                .position(|&c| c == leave)
                .expect("leaving cell is basic");
            self.basis[slot] = enter;
            self.pivots += 1;
            degenerate = if theta == 0 { degenerate + 1 } else { 0 };
        }
        debug_assert!(false, "transportation simplex hit the pivot cap");
    }
}

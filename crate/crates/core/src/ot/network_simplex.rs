//! Transportation simplex on the bipartite supply/demand graph.
//!
//! The basis is a spanning tree with `n + m - 1` cells (degenerate zero cells
//! kept). Entering cells are chosen by most negative reduced cost with the
//! lowest `(row, col)` index on ties, switching to Bland's first-improving rule
//! after a run of degenerate pivots.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct TransportSolution {
    /// Row-major `n x m` flow.
    pub flow: Vec<f64>,
    pub objective: f64,
}

pub(crate) fn solve_transport(a: &[f64], b: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    let n = a.len();
    let m = b.len();
    if n == 0 || m == 0 {
        return Err(Error::EmptySupport);
    }
    if cost.len() != n * m {
        return Err(Error::DimensionMismatch { expected: n * m, actual: cost.len() });
    }
    let mut flow = vec![0.0; n * m];
    let mut basic = vec![false; n * m];
    let mut cells: Vec<usize> = Vec::with_capacity(n + m - 1);

    // North-west corner start.
    let (mut s, mut d) = (a.to_vec(), b.to_vec());
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let x = s[i].min(d[j]).max(0.0);
        flow[i * m + j] = x;
        basic[i * m + j] = true;
        cells.push(i * m + j);
        s[i] -= x;
        d[j] -= x;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if j == m - 1 || (i < n - 1 && s[i] <= d[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    let cmax = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-11 * cmax.max(1.0);
    let max_iter = 50 * n * m + 1000;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n + m];
    let mut parent = vec![usize::MAX; n + m];
    let mut stack = Vec::with_capacity(n + m);
    let mut degenerate_run = 0usize;
    let block = ((n * m) as f64).sqrt().ceil().max(16.0) as usize;
    let mut next_start = 0usize;

    for _ in 0..max_iter {
        for l in adj.iter_mut() {
            l.clear();
        }
        for &c in &cells {
            let (r, k) = (c / m, c % m);
            adj[r].push(n + k);
            adj[n + k].push(r);
        }
        // Potentials with u[0] = 0.
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        parent[0] = 0;
        stack.clear();
        stack.push(0usize);
        let mut seen = 1;
        while let Some(node) = stack.pop() {
            for &nb in &adj[node] {
                if parent[nb] != usize::MAX {
                    continue;
                }
                parent[nb] = node;
                seen += 1;
                if node < n {
                    v[nb - n] = cost[node * m + (nb - n)] - u[node];
                } else {
                    u[nb] = cost[nb * m + (node - n)] - v[node - n];
                }
                stack.push(nb);
            }
        }
        if seen != n + m {
            return Err(Error::Solver("transport basis is not a spanning tree".into()));
        }

        let bland = degenerate_run > n + m;
        let mut enter = None;
        if bland {
            enter = (0..n * m).find(|&idx| !basic[idx] && cost[idx] - u[idx / m] - v[idx % m] < -tol);
        } else {
            // Block search: the best candidate of the first block holding one.
            let mut best = -tol;
            let total = n * m;
            let mut scanned = 0;
            while scanned < total && enter.is_none() {
                let end = (scanned + block).min(total);
                for step in scanned..end {
                    let idx = (next_start + step) % total;
                    if basic[idx] {
                        continue;
                    }
                    let rc = cost[idx] - u[idx / m] - v[idx % m];
                    if rc < best {
                        best = rc;
                        enter = Some(idx);
                    }
                }
                scanned = end;
            }
            next_start = (next_start + scanned) % total;
        }
        let Some(enter) = enter else {
            let objective = flow.iter().zip(cost).map(|(f, c)| f * c).sum();
            return Ok(TransportSolution { flow, objective });
        };

        // Tree path from the entering column back to the entering row.
        let (er, ec) = (enter / m, enter % m);
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        parent[er] = er;
        stack.clear();
        stack.push(er);
        while let Some(node) = stack.pop() {
            if node == n + ec {
                break;
            }
            for &nb in &adj[node] {
                if parent[nb] == usize::MAX {
                    parent[nb] = node;
                    stack.push(nb);
                }
            }
        }
        let mut minus = Vec::new();
        let mut plus = vec![enter];
        let mut node = n + ec;
        let mut sign_minus = true;
        while node != er {
            let p = parent[node];
            let cell = if node >= n { p * m + (node - n) } else { node * m + (p - n) };
            if sign_minus {
                minus.push(cell);
            } else {
                plus.push(cell);
            }
            sign_minus = !sign_minus;
            node = p;
        }
        let theta = minus.iter().map(|&c| flow[c]).fold(f64::INFINITY, f64::min);
        let leave = *minus.iter().filter(|&&c| flow[c] <= theta).min().expect("cycle has a minus cell");
        for &c in &plus {
            flow[c] += theta;
        }
        for &c in &minus {
            flow[c] = (flow[c] - theta).max(0.0);
        }
        flow[leave] = 0.0;
        basic[leave] = false;
        basic[enter] = true;
        let pos = cells.iter().position(|&c| c == leave).expect("leaving cell is basic");
        cells[pos] = enter;
        if theta <= 1e-15 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
    Err(Error::Solver(format!("transport simplex exceeded {max_iter} pivots")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_prefers_monotone_plan() {
        let sol = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &[1.0, 9.0, 1.0, 1.0]).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-15);
        assert_eq!(sol.flow, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn unbalanced_sizes() {
        let a = [0.2, 0.3, 0.5];
        let b = [0.6, 0.4];
        let cost = [0.0, 1.0, 1.0, 0.0, 2.0, 0.5];
        let sol = solve_transport(&a, &b, &cost).unwrap();
        for (i, ai) in a.iter().enumerate() {
            assert!((sol.flow[i * 2] + sol.flow[i * 2 + 1] - ai).abs() < 1e-15);
        }
        // row 2 fills col 1 (0.4 * 0.5), the rest of col 0 comes from rows 1 and 2 (0.3 * 1 + 0.1 * 2)
        assert!((sol.objective - 0.7).abs() < 1e-12);
    }
}

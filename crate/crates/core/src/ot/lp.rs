//! Two-phase revised simplex for `min c·x  s.t.  A x = b, x >= 0` with sparse
//! columns and a dense basis inverse. Used for the small oracle LPs
//! (multimarginal plans, encoder plans, label-weight selection).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Lp {
    rows: usize,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

struct State {
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
}

impl Lp {
    pub fn new(rhs: Vec<f64>) -> Self {
        Self { rows: rhs.len(), rhs, cost: Vec::new(), col_ptr: vec![0], row_idx: Vec::new(), vals: Vec::new() }
    }

    pub fn add_column(&mut self, cost: f64, entries: &[(usize, f64)]) -> usize {
        for &(r, v) in entries {
            debug_assert!(r < self.rows);
            self.row_idx.push(r);
            self.vals.push(v);
        }
        self.col_ptr.push(self.row_idx.len());
        self.cost.push(cost);
        self.cost.len() - 1
    }

    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
        self.row_idx[s..e].iter().cloned().zip(self.vals[s..e].iter().cloned())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let r = self.rows;
        let ncol = self.num_cols();
        if r == 0 {
            return Ok(LpSolution { x: vec![0.0; ncol], objective: 0.0 });
        }
        let sign: Vec<f64> = self.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = self.rhs.iter().map(|v| v.abs()).collect();
        let mut binv = vec![0.0; r * r];
        for i in 0..r {
            binv[i * r + i] = 1.0;
        }
        let mut st = State {
            basis: (ncol..ncol + r).collect(),
            is_basic: vec![false; ncol],
            binv,
            xb: b.clone(),
        };

        let phase1_cost = |v: usize| if v >= ncol { 1.0 } else { 0.0 };
        self.iterate(&mut st, &sign, &b, &phase1_cost)?;
        let infeas: f64 = st.basis.iter().zip(&st.xb).filter(|(v, _)| **v >= ncol).map(|(_, x)| *x).sum();
        let bscale: f64 = b.iter().sum::<f64>().max(1.0);
        if infeas > 1e-9 * bscale {
            return Err(Error::Infeasible(format!("phase one residual {infeas:e}")));
        }
        self.drive_out_artificials(&mut st, &sign)?;

        let phase2_cost = |v: usize| if v >= ncol { 0.0 } else { self.cost[v] };
        self.iterate(&mut st, &sign, &b, &phase2_cost)?;

        let mut x = vec![0.0; ncol];
        for (k, &v) in st.basis.iter().enumerate() {
            if v < ncol {
                x[v] = st.xb[k].max(0.0);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        Ok(LpSolution { x, objective })
    }

    fn binv_times_col(&self, st: &State, sign: &[f64], j: usize) -> Vec<f64> {
        let r = self.rows;
        let mut w = vec![0.0; r];
        for (row, val) in self.column(j) {
            let v = val * sign[row];
            for k in 0..r {
                w[k] += st.binv[k * r + row] * v;
            }
        }
        w
    }

    fn pivot(&self, st: &mut State, l: usize, j: usize, w: &[f64]) {
        let r = self.rows;
        let piv = w[l];
        let theta = st.xb[l] / piv;
        for k in 0..r {
            if k != l {
                st.xb[k] -= theta * w[k];
                if st.xb[k] < 0.0 && st.xb[k] > -1e-12 {
                    st.xb[k] = 0.0;
                }
            }
        }
        st.xb[l] = theta.max(0.0);
        let lrow: Vec<f64> = st.binv[l * r..(l + 1) * r].iter().map(|v| v / piv).collect();
        for k in 0..r {
            if k == l || w[k] == 0.0 {
                continue;
            }
            let f = w[k];
            for c in 0..r {
                st.binv[k * r + c] -= f * lrow[c];
            }
        }
        st.binv[l * r..(l + 1) * r].copy_from_slice(&lrow);
        let old = st.basis[l];
        if old < self.num_cols() {
            st.is_basic[old] = false;
        }
        st.basis[l] = j;
        st.is_basic[j] = true;
    }

    fn refactor(&self, st: &mut State, sign: &[f64], b: &[f64]) -> Result<()> {
        let r = self.rows;
        let ncol = self.num_cols();
        let mut bm = DMatrix::<f64>::zeros(r, r);
        for (k, &v) in st.basis.iter().enumerate() {
            if v >= ncol {
                bm[(v - ncol, k)] = 1.0;
            } else {
                for (row, val) in self.column(v) {
                    bm[(row, k)] = val * sign[row];
                }
            }
        }
        let inv = bm.try_inverse().ok_or_else(|| Error::Solver("singular simplex basis".into()))?;
        for i in 0..r {
            for c in 0..r {
                st.binv[i * r + c] = inv[(i, c)];
            }
        }
        for i in 0..r {
            let x: f64 = (0..r).map(|c| inv[(i, c)] * b[c]).sum();
            st.xb[i] = if x < 0.0 && x > -1e-12 { 0.0 } else { x };
        }
        Ok(())
    }

    fn iterate(&self, st: &mut State, sign: &[f64], b: &[f64], cost: &dyn Fn(usize) -> f64) -> Result<()> {
        let r = self.rows;
        let ncol = self.num_cols();
        let cmax = (0..ncol).map(cost).fold(1.0f64, |a, c| a.max(c.abs()));
        let tol = 1e-11 * cmax;
        let max_iter = 50 * (r + ncol) + 10_000;
        let mut degenerate_run = 0usize;
        let mut y = vec![0.0; r];
        for it in 0..max_iter {
            if it > 0 && it % REFACTOR_EVERY == 0 {
                self.refactor(st, sign, b)?;
            }
            for c in 0..r {
                y[c] = (0..r).map(|k| cost(st.basis[k]) * st.binv[k * r + c]).sum();
            }
            let bland = degenerate_run > 2 * r;
            let mut enter = None;
            let mut best = -tol;
            for j in 0..ncol {
                if st.is_basic[j] {
                    continue;
                }
                let d = cost(j) - self.column(j).map(|(row, v)| y[row] * v * sign[row]).sum::<f64>();
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(j) = enter else {
                return Ok(());
            };
            let w = self.binv_times_col(st, sign, j);
            let mut ratio = f64::INFINITY;
            for k in 0..r {
                if w[k] > PIVOT_TOL {
                    ratio = ratio.min(st.xb[k].max(0.0) / w[k]);
                }
            }
            if !ratio.is_finite() {
                return Err(Error::Solver("linear program is unbounded".into()));
            }
            let slack = 1e-12 * (1.0 + ratio);
            let mut leave: Option<usize> = None;
            for k in 0..r {
                if w[k] > PIVOT_TOL && st.xb[k].max(0.0) / w[k] <= ratio + slack {
                    leave = match leave {
                        None => Some(k),
                        Some(l) if bland && st.basis[k] < st.basis[l] => Some(k),
                        Some(l) if !bland && w[k] > w[l] => Some(k),
                        other => other,
                    };
                }
            }
            let l = leave.expect("ratio test found a row");
            if ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(st, l, j, &w);
        }
        Err(Error::Solver(format!("revised simplex exceeded {max_iter} pivots")))
    }

    /// After phase one, replaces zero-level artificial basics with structural
    /// columns where possible. Artificials left in place sit on redundant rows.
    fn drive_out_artificials(&self, st: &mut State, sign: &[f64]) -> Result<()> {
        let r = self.rows;
        let ncol = self.num_cols();
        for l in 0..r {
            if st.basis[l] < ncol {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..ncol {
                if st.is_basic[j] {
                    continue;
                }
                let val: f64 = self.column(j).map(|(row, v)| st.binv[l * r + row] * v * sign[row]).sum();
                if val.abs() > PIVOT_TOL && best.is_none_or(|(_, b)| val.abs() > b) {
                    best = Some((j, val.abs()));
                }
            }
            if let Some((j, _)) = best {
                let w = self.binv_times_col(st, sign, j);
                st.xb[l] = 0.0;
                self.pivot(st, l, j, &w);
            }
        }
        Ok(())
    }
}

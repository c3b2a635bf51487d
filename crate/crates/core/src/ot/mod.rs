//! Optimal transport between discrete measures and between Gaussians.

mod gaussian;
pub(crate) mod lp;
mod metric;
mod monge;
mod multimarginal;
pub(crate) mod network_simplex;
mod sinkhorn;

pub use gaussian::{gaussian_geodesic, gaussian_monge_matrix, gaussian_w2, gaussian_w2_squared};
pub use metric::{LabeledEncoder, MetricKind, MetricSpec};
pub use monge::{monge_map_from_coupling, MongeMap};
pub use multimarginal::{check_alphas, multimarginal_coupling, tuple_cost, MultiCoupling, DEFAULT_MAX_TUPLES};
pub use sinkhorn::{sinkhorn_coupling, SinkhornResult};


use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// Marginal tolerance for couplings.
pub const MARGINAL_TOL: f64 = 1e-8;

/// A transport plan between two discrete measures, `n x m` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    row_support: DiscreteMeasure,
    col_support: DiscreteMeasure,
    matrix: Vec<f64>,
}

impl Coupling {
    /// Validates non-negativity and both marginals within [`MARGINAL_TOL`].
    pub fn new(row_support: DiscreteMeasure, col_support: DiscreteMeasure, matrix: Vec<f64>) -> Result<Self> {
        let (n, m) = (row_support.len(), col_support.len());
        if matrix.len() != n * m {
            return Err(Error::DimensionMismatch { expected: n * m, actual: matrix.len() });
        }
        if let Some((index, &value)) = matrix.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeWeight { index, value });
        }
        let c = Self { row_support, col_support, matrix };
        let err = c.max_marginal_error();
        if err > MARGINAL_TOL {
            return Err(Error::InvalidArgument(format!("coupling marginals off by {err:e}")));
        }
        Ok(c)
    }

    pub(crate) fn from_parts(row_support: DiscreteMeasure, col_support: DiscreteMeasure, matrix: Vec<f64>) -> Self {
        Self { row_support, col_support, matrix }
    }

    pub fn rows(&self) -> usize {
        self.row_support.len()
    }

    pub fn cols(&self) -> usize {
        self.col_support.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.cols() + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn row_support(&self) -> &DiscreteMeasure {
        &self.row_support
    }

    pub fn col_support(&self) -> &DiscreteMeasure {
        &self.col_support
    }

    pub fn max_marginal_error(&self) -> f64 {
        let (n, m) = (self.rows(), self.cols());
        let mut err: f64 = 0.0;
        for i in 0..n {
            let s: f64 = self.matrix[i * m..(i + 1) * m].iter().sum();
            err = err.max((s - self.row_support.weight(i)).abs());
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| self.matrix[i * m + j]).sum();
            err = err.max((s - self.col_support.weight(j)).abs());
        }
        err
    }

    /// `Σ π_ij d(x_i, y_j)^p`.
    pub fn cost(&self, metric: &MetricSpec) -> Result<f64> {
        let c = metric.cost_matrix(&self.row_support, &self.col_support)?;
        Ok(self.matrix.iter().zip(&c).map(|(p, c)| p * c).sum())
    }

    /// Pushforward of the plan under `(x, y) -> (1-t) x + t y`, one atom per
    /// positive cell in row-major order.
    pub fn interpolate(&self, t: f64) -> Result<DiscreteMeasure> {
        let dim = self.row_support.dim();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let w = self.get(i, j);
                if w <= 0.0 {
                    continue;
                }
                let x = self.row_support.point(i);
                let y = self.col_support.point(j);
                points.extend(x.iter().zip(y).map(|(a, b)| if t == 0.0 { *a } else if t == 1.0 { *b } else { (1.0 - t) * a + t * b }));
                weights.push(w);
            }
        }
        DiscreteMeasure::from_flat(dim, points, weights)
    }
}

/// Exact optimal coupling and its cost `Σ π_ij d^p(x_i, y_j)`.
pub fn exact_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: &MetricSpec) -> Result<(Coupling, f64)> {
    let cost = metric.cost_matrix(mu, nu)?;
    let sol = network_simplex::solve_transport(mu.weights(), nu.weights(), &cost)?;
    let total = sol.objective.max(0.0);
    Ok((Coupling::from_parts(mu.clone(), nu.clone(), sol.flow), total))
}

/// `W_p(mu, nu)` under the metric.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: &MetricSpec) -> Result<f64> {
    let (_, cost) = exact_coupling(mu, nu, metric)?;
    Ok(cost.powf(1.0 / metric.p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(v.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    #[test]
    fn point_masses_and_identity() {
        let e1 = MetricSpec::euclidean(1.0).unwrap();
        let (cpl, cost) = exact_coupling(&pts(&[0.0]), &pts(&[1.0]), &e1).unwrap();
        assert_eq!(cpl.get(0, 0), 1.0);
        assert_eq!(cost, 1.0);
        let e2 = MetricSpec::euclidean(2.0).unwrap();
        let (_, cost) = exact_coupling(&pts(&[0.0, 1.0]), &pts(&[0.0, 1.0]), &e2).unwrap();
        assert_eq!(cost, 0.0);
        assert_eq!(wasserstein_p(&pts(&[0.0]), &pts(&[3.0]), &e1).unwrap(), 3.0);
    }

    #[test]
    fn monotone_plan_beats_crossing() {
        let e2 = MetricSpec::euclidean(2.0).unwrap();
        let (cpl, cost) = exact_coupling(&pts(&[0.0, 2.0]), &pts(&[1.0, 3.0]), &e2).unwrap();
        assert!((cost - 1.0).abs() < 1e-15);
        assert_eq!(cpl.matrix(), &[0.5, 0.0, 0.0, 0.5]);
        assert!((wasserstein_p(&pts(&[0.0, 2.0]), &pts(&[1.0, 3.0]), &e2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_midpoint() {
        let e2 = MetricSpec::euclidean(2.0).unwrap();
        let (cpl, _) = exact_coupling(&pts(&[0.0, 2.0]), &pts(&[1.0, 3.0]), &e2).unwrap();
        assert_eq!(cpl.interpolate(0.5).unwrap().points(), vec![vec![0.5], vec![2.5]]);
    }

    #[test]
    fn coupling_validation() {
        let mu = pts(&[0.0, 1.0]);
        assert!(Coupling::new(mu.clone(), mu.clone(), vec![0.5, 0.0, 0.0, 0.5]).is_ok());
        assert!(Coupling::new(mu.clone(), mu.clone(), vec![0.6, 0.0, 0.0, 0.4]).is_err());
        assert!(Coupling::new(mu.clone(), mu, vec![0.6, -0.1, -0.1, 0.6]).is_err());
    }
}

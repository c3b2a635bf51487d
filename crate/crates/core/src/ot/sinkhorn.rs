//! Log-domain Sinkhorn with ε-halving and a final rounding onto the
//! transport polytope.

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

use super::metric::MetricSpec;
use super::Coupling;

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    pub coupling: Coupling,
    /// `<C, π>` of the rounded plan.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn log_sum_exp(vals: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = vals.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Runs Sinkhorn on a precomputed cost matrix. Returns the rounded plan.
pub(crate) fn sinkhorn_plan(
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<f64>, bool, usize)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
    }
    let n = a.len();
    let m = b.len();
    let la: Vec<f64> = a.iter().map(|w| w.ln()).collect();
    let lb: Vec<f64> = b.iter().map(|w| w.ln()).collect();
    let cmax = cost.iter().fold(0.0f64, |x, c| x.max(c.abs()));
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut eps = epsilon.max(cmax);
    let mut iterations = 0;
    let mut converged = false;

    let plan = |f: &[f64], g: &[f64], eps: f64| -> Vec<f64> {
        let mut p = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                let e = (f[i] + g[j] - cost[i * m + j]) / eps + la[i] + lb[j];
                p[i * m + j] = if e.is_finite() { e.exp() } else { 0.0 };
            }
        }
        p
    };

    while iterations < max_iter {
        let last_stage = eps <= epsilon;
        let stage_tol = if last_stage { tol } else { tol.max(1e-4) };
        loop {
            for i in 0..n {
                f[i] = if a[i] > 0.0 {
                    -eps * log_sum_exp((0..m).map(|j| (g[j] - cost[i * m + j]) / eps + lb[j]))
                } else {
                    0.0
                };
            }
            for j in 0..m {
                g[j] = if b[j] > 0.0 {
                    -eps * log_sum_exp((0..n).map(|i| (f[i] - cost[i * m + j]) / eps + la[i]))
                } else {
                    0.0
                };
            }
            iterations += 1;
            let p = plan(&f, &g, eps);
            let err: f64 = (0..n).map(|i| ((0..m).map(|j| p[i * m + j]).sum::<f64>() - a[i]).abs()).sum();
            if err < stage_tol {
                if last_stage {
                    converged = true;
                }
                break;
            }
            if iterations >= max_iter {
                break;
            }
        }
        if last_stage {
            break;
        }
        eps = (eps * 0.5).max(epsilon);
    }

    let mut p = plan(&f, &g, eps);
    round_to_polytope(&mut p, a, b);
    Ok((p, converged, iterations))
}

/// Row/column down-scaling followed by a rank-one correction; the result has
/// the exact marginals `a`, `b` up to rounding.
pub(crate) fn round_to_polytope(p: &mut [f64], a: &[f64], b: &[f64]) {
    let n = a.len();
    let m = b.len();
    for i in 0..n {
        let r: f64 = p[i * m..(i + 1) * m].iter().sum();
        if r > a[i] && r > 0.0 {
            let s = a[i] / r;
            p[i * m..(i + 1) * m].iter_mut().for_each(|v| *v *= s);
        }
    }
    for j in 0..m {
        let c: f64 = (0..n).map(|i| p[i * m + j]).sum();
        if c > b[j] && c > 0.0 {
            let s = b[j] / c;
            (0..n).for_each(|i| p[i * m + j] *= s);
        }
    }
    let er: Vec<f64> = (0..n).map(|i| (a[i] - p[i * m..(i + 1) * m].iter().sum::<f64>()).max(0.0)).collect();
    let ec: Vec<f64> = (0..m).map(|j| (b[j] - (0..n).map(|i| p[i * m + j]).sum::<f64>()).max(0.0)).collect();
    let total: f64 = er.iter().sum();
    if total > 0.0 {
        for i in 0..n {
            for j in 0..m {
                p[i * m + j] += er[i] * ec[j] / total;
            }
        }
    }
}

/// Entropic transport plan between `mu` and `nu` at regularization `epsilon`.
/// On hitting `max_iter` the best iterate is returned with `converged = false`.
pub fn sinkhorn_coupling(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    metric: &MetricSpec,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornResult> {
    let cost = metric.cost_matrix(mu, nu)?;
    let (p, converged, iterations) = sinkhorn_plan(mu.weights(), nu.weights(), &cost, epsilon, max_iter, tol)?;
    let total = p.iter().zip(&cost).map(|(x, c)| x * c).sum();
    let coupling = Coupling::from_parts(mu.clone(), nu.clone(), p);
    Ok(SinkhornResult { coupling, cost: total, converged, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::exact_coupling;

    #[test]
    fn point_masses() {
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let m = MetricSpec::euclidean(1.0).unwrap();
        let r = sinkhorn_coupling(&mu, &nu, &m, 0.01, 1000, 1e-9).unwrap();
        assert!((r.cost - 1.0).abs() < 1e-2);
        assert!(r.converged);
    }

    #[test]
    fn large_epsilon_is_near_product_and_feasible() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let m = MetricSpec::euclidean(2.0).unwrap();
        let r = sinkhorn_coupling(&mu, &mu, &m, 10.0, 1000, 1e-10).unwrap();
        assert!(r.coupling.max_marginal_error() < 1e-10);
        assert!((r.coupling.get(0, 1) - 0.25).abs() < 0.02);
    }

    #[test]
    fn gap_shrinks_with_epsilon() {
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0], vec![3.0]], vec![0.2, 0.5, 0.3]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![0.5], vec![2.0]], vec![0.6, 0.4]).unwrap();
        let m = MetricSpec::euclidean(2.0).unwrap();
        let (_, exact) = exact_coupling(&mu, &nu, &m).unwrap();
        let mut last = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01] {
            let r = sinkhorn_coupling(&mu, &nu, &m, eps, 20_000, 1e-12).unwrap();
            let gap = (r.cost - exact).abs();
            assert!(gap <= last);
            last = gap;
        }
        assert!(last < 1e-3);
    }
}

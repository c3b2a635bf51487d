//! Multimarginal plans for the quadratic barycentric cost
//! `Σ_m α_m ‖x_m - x̄‖²`, `x̄ = Σ_m α_m x_m`.

use crate::error::{Error, Result};
use crate::measures::{normalized_weights, DiscreteMeasure};

use super::lp::Lp;
use super::network_simplex::solve_transport;

/// Default cap on the number of support tuples.
pub const DEFAULT_MAX_TUPLES: usize = 1_000_000;

/// Mass below this is dropped from the sparse tensor.
const TUPLE_TOL: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct MultiCoupling {
    supports: Vec<DiscreteMeasure>,
    tuples: Vec<(Vec<usize>, f64)>,
}

impl MultiCoupling {
    pub fn supports(&self) -> &[DiscreteMeasure] {
        &self.supports
    }

    pub fn tuples(&self) -> &[(Vec<usize>, f64)] {
        &self.tuples
    }

    /// Largest absolute deviation of a marginal from its measure.
    pub fn max_marginal_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for (m, mu) in self.supports.iter().enumerate() {
            let mut marg = vec![0.0; mu.len()];
            for (idx, w) in &self.tuples {
                marg[idx[m]] += w;
            }
            for (a, b) in marg.iter().zip(mu.weights()) {
                err = err.max((a - b).abs());
            }
        }
        err
    }

    /// Pushforward under `(x_1..x_M) -> Σ α_m x_m`; one atom per tuple.
    pub fn barycentric_pushforward(&self, alphas: &[f64]) -> Result<DiscreteMeasure> {
        let dim = self.supports[0].dim();
        let mut points = Vec::with_capacity(self.tuples.len() * dim);
        let mut weights = Vec::with_capacity(self.tuples.len());
        for (idx, w) in &self.tuples {
            points.extend(barycenter_of(&self.supports, alphas, idx));
            weights.push(*w);
        }
        DiscreteMeasure::from_flat(dim, points, weights)
    }
}

fn barycenter_of(supports: &[DiscreteMeasure], alphas: &[f64], idx: &[usize]) -> Vec<f64> {
    let dim = supports[0].dim();
    let mut xbar = vec![0.0; dim];
    for ((mu, &a), &i) in supports.iter().zip(alphas).zip(idx) {
        for (s, x) in xbar.iter_mut().zip(mu.point(i)) {
            *s += a * x;
        }
    }
    xbar
}

/// `Σ_m α_m ‖x_m - x̄‖²` at one tuple.
pub fn tuple_cost(supports: &[DiscreteMeasure], alphas: &[f64], idx: &[usize]) -> f64 {
    let xbar = barycenter_of(supports, alphas, idx);
    supports
        .iter()
        .zip(alphas)
        .zip(idx)
        .map(|((mu, &a), &i)| a * crate::linalg::sq_dist(mu.point(i), &xbar))
        .sum()
}

/// Checks a weight vector on the simplex and renormalizes it.
pub fn check_alphas(alphas: &[f64], m: usize) -> Result<Vec<f64>> {
    if alphas.len() != m {
        return Err(Error::DimensionMismatch { expected: m, actual: alphas.len() });
    }
    normalized_weights(alphas)
}

/// Exact optimal multimarginal plan. Two marginals go through the transport
/// simplex with cost `α_1 α_2 ‖x_1 - x_2‖²` (identical to the tuple cost);
/// three or more through the general LP over all tuples.
pub fn multimarginal_coupling(
    measures: &[DiscreteMeasure],
    alphas: &[f64],
    max_tuples: usize,
) -> Result<(MultiCoupling, f64)> {
    let first = measures.first().ok_or(Error::EmptySupport)?;
    let alphas = check_alphas(alphas, measures.len())?;
    for mu in measures {
        if mu.dim() != first.dim() {
            return Err(Error::DimensionMismatch { expected: first.dim(), actual: mu.dim() });
        }
    }
    let tuples_needed: u128 = measures.iter().map(|m| m.len() as u128).product();
    if tuples_needed > max_tuples as u128 {
        return Err(Error::InstanceTooLarge { tuples: tuples_needed, cap: max_tuples });
    }
    let supports = measures.to_vec();
    let tuples: Vec<(Vec<usize>, f64)> = match measures.len() {
        1 => first.weights().iter().enumerate().map(|(i, &w)| (vec![i], w)).collect(),
        2 => {
            let (a, b) = (&measures[0], &measures[1]);
            let scale = alphas[0] * alphas[1];
            let mut cost = Vec::with_capacity(a.len() * b.len());
            for (x, _) in a.iter() {
                for (y, _) in b.iter() {
                    cost.push(scale * crate::linalg::sq_dist(x, y));
                }
            }
            let sol = solve_transport(a.weights(), b.weights(), &cost)?;
            let m = b.len();
            sol.flow
                .iter()
                .enumerate()
                .filter(|(_, &f)| f > TUPLE_TOL)
                .map(|(k, &f)| (vec![k / m, k % m], f))
                .collect()
        }
        _ => {
            let offsets: Vec<usize> = measures
                .iter()
                .scan(0, |acc, mu| {
                    let o = *acc;
                    *acc += mu.len();
                    Some(o)
                })
                .collect();
            let rhs: Vec<f64> = measures.iter().flat_map(|mu| mu.weights().to_vec()).collect();
            let mut lp = Lp::new(rhs);
            let mut all = Vec::with_capacity(tuples_needed as usize);
            let mut idx = vec![0usize; measures.len()];
            let mut entries = Vec::with_capacity(measures.len());
            'tuples: loop {
                entries.clear();
                entries.extend(idx.iter().zip(&offsets).map(|(&i, &o)| (o + i, 1.0)));
                lp.add_column(tuple_cost(&supports, &alphas, &idx), &entries);
                all.push(idx.clone());
                // odometer, last index fastest
                let mut k = measures.len();
                loop {
                    if k == 0 {
                        break 'tuples;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < measures[k].len() {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            let sol = lp.solve()?;
            all.into_iter().zip(sol.x).filter(|(_, w)| *w > TUPLE_TOL).collect()
        }
    };
    let objective = tuples.iter().map(|(idx, w)| w * tuple_cost(&supports, &alphas, idx)).sum();
    Ok((MultiCoupling { supports, tuples }, objective))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(vec![x]).unwrap()
    }

    #[test]
    fn single_tuple_examples() {
        let (mc, obj) = multimarginal_coupling(&[dirac(0.0), dirac(2.0)], &[0.5, 0.5], DEFAULT_MAX_TUPLES).unwrap();
        assert!((obj - 1.0).abs() < 1e-15);
        assert_eq!(mc.barycentric_pushforward(&[0.5, 0.5]).unwrap().point(0), &[1.0]);
        let third = 1.0 / 3.0;
        let (_, obj) =
            multimarginal_coupling(&[dirac(0.0), dirac(1.0), dirac(2.0)], &[third, third, third], DEFAULT_MAX_TUPLES)
                .unwrap();
        assert!((obj - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]], vec![0.2, 0.3, 0.5]).unwrap();
        for m in [2, 3] {
            let ms = vec![mu.clone(); m];
            let al = vec![1.0 / m as f64; m];
            let (mc, obj) = multimarginal_coupling(&ms, &al, DEFAULT_MAX_TUPLES).unwrap();
            assert!(obj.abs() < 1e-12);
            assert!(mc.max_marginal_error() < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let mu = DiscreteMeasure::uniform((0..10).map(|i| vec![i as f64]).collect()).unwrap();
        let r = multimarginal_coupling(&[mu.clone(), mu.clone(), mu], &[0.3, 0.3, 0.4], 999);
        assert!(matches!(r, Err(Error::InstanceTooLarge { tuples: 1000, cap: 999 })));
    }
}

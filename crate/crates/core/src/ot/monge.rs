//! Deterministic maps read off a coupling.

use crate::error::{Error, Result};

use super::Coupling;

/// Entries at or below this mass are treated as zero when deciding whether a
/// row is deterministic.
pub const SUPPORT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct MongeMap {
    dim: usize,
    /// Target point of each row atom, row-major.
    targets: Vec<f64>,
    /// Column index for rows mapped to a single atom.
    assignment: Vec<Option<usize>>,
    /// True when at least one row splits mass and was replaced by its
    /// barycentric projection.
    pub projected: bool,
}

impl MongeMap {
    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn targets_flat(&self) -> &[f64] {
        &self.targets
    }

    /// Column index when the row is deterministic.
    pub fn assignment(&self, i: usize) -> Option<usize> {
        self.assignment[i]
    }

    /// The permutation, if every row maps to a distinct single column.
    pub fn permutation(&self) -> Option<Vec<usize>> {
        let perm: Option<Vec<usize>> = self.assignment.iter().cloned().collect();
        let perm = perm?;
        let mut seen = vec![false; perm.len()];
        for &j in &perm {
            if j >= seen.len() || seen[j] {
                return None;
            }
            seen[j] = true;
        }
        Some(perm)
    }
}

/// Induced map of a deterministic coupling, or the barycentric projection
/// `x_i -> Σ_j π_ij y_j / Σ_j π_ij` when some row splits mass.
pub fn monge_map_from_coupling(cpl: &Coupling) -> Result<MongeMap> {
    let (n, m) = (cpl.rows(), cpl.cols());
    let dim = cpl.col_support().dim();
    let mut targets = Vec::with_capacity(n * dim);
    let mut assignment = Vec::with_capacity(n);
    let mut projected = false;
    for i in 0..n {
        let row: Vec<f64> = (0..m).map(|j| cpl.get(i, j)).collect();
        let mass: f64 = row.iter().sum();
        if mass <= SUPPORT_TOL {
            return Err(Error::ZeroRow(i));
        }
        let support: Vec<usize> = (0..m).filter(|&j| row[j] > SUPPORT_TOL).collect();
        if support.len() == 1 {
            targets.extend_from_slice(cpl.col_support().point(support[0]));
            assignment.push(Some(support[0]));
        } else {
            projected = true;
            assignment.push(None);
            let mut y = vec![0.0; dim];
            for &j in &support {
                for (a, b) in y.iter_mut().zip(cpl.col_support().point(j)) {
                    *a += row[j] * b;
                }
            }
            targets.extend(y.iter().map(|v| v / mass));
        }
    }
    Ok(MongeMap { dim, targets, assignment, projected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;

    #[test]
    fn split_row_is_projected() {
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        let cpl = Coupling::new(mu, nu, vec![0.5, 0.5]).unwrap();
        let map = monge_map_from_coupling(&cpl).unwrap();
        assert!(map.projected);
        assert_eq!(map.target(0), &[0.0]);
        assert!(map.permutation().is_none());
    }

    #[test]
    fn permutation_is_recovered() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![2.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![1.0], vec![3.0]]).unwrap();
        let cpl = Coupling::new(mu, nu, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let map = monge_map_from_coupling(&cpl).unwrap();
        assert!(!map.projected);
        assert_eq!(map.permutation(), Some(vec![1, 0]));
        assert_eq!(map.target(0), &[3.0]);
    }

    #[test]
    fn zero_row_is_an_error() {
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let cpl = Coupling::new(mu, nu, vec![1.0, 0.0]).unwrap();
        assert_eq!(monge_map_from_coupling(&cpl), Err(Error::ZeroRow(1)));
    }
}

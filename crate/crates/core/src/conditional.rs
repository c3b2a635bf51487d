//! Distances between conditional distributions: the label-averaged
//! Wasserstein cost, the conditional sub-coupling cost, its encoder-plan LP
//! form, and the Gaussian membership test for conditional sub-couplings.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::measures::{ConditionalFamily, DiscreteMeasure};
use crate::ot::lp::Lp;
use crate::ot::{exact_coupling, Coupling, MetricSpec};

/// Membership tolerance for the PSD test.
pub const PSD_TOL: f64 = 1e-9;

fn check_compatible(p: &ConditionalFamily, q: &ConditionalFamily) -> Result<()> {
    p.check_same_labels(q)?;
    for (a, b) in p.label_weights().iter().zip(q.label_weights()) {
        if (a - b).abs() > 1e-9 {
            return Err(Error::LabelMismatch(format!("label weights differ: {a} vs {b}")));
        }
    }
    if p.data_dim() != q.data_dim() {
        return Err(Error::DimensionMismatch { expected: p.data_dim(), actual: q.data_dim() });
    }
    Ok(())
}

/// `(Σ_c P(c) W_p^p(P_{X|c}, Q_{Y|c}))^{1/p}` with each inner term solved exactly.
pub fn expected_conditional_wasserstein(
    fam_p: &ConditionalFamily,
    fam_q: &ConditionalFamily,
    metric: &MetricSpec,
) -> Result<f64> {
    check_compatible(fam_p, fam_q)?;
    let mut total = 0.0;
    for (k, w) in fam_p.label_weights().iter().enumerate() {
        let (_, cost) = exact_coupling(fam_p.measure(k), fam_q.measure(k), metric)?;
        total += w * cost;
    }
    Ok(total.max(0.0).powf(1.0 / metric.p))
}

/// Minimum transport cost over conditional sub-couplings, solved as one LP
/// over all label blocks jointly. Returns the cost (p-th root) and the
/// per-label conditional couplings.
pub fn subcoupling_cost(
    fam_p: &ConditionalFamily,
    fam_q: &ConditionalFamily,
    metric: &MetricSpec,
) -> Result<(f64, Vec<Coupling>)> {
    check_compatible(fam_p, fam_q)?;
    let mut rhs = Vec::new();
    let mut blocks = Vec::new();
    for (k, &w) in fam_p.label_weights().iter().enumerate() {
        let (mu, nu) = (fam_p.measure(k), fam_q.measure(k));
        let row0 = rhs.len();
        rhs.extend(mu.weights().iter().map(|v| w * v));
        rhs.extend(nu.weights().iter().map(|v| w * v));
        blocks.push((row0, metric.cost_matrix(mu, nu)?));
    }
    let mut lp = Lp::new(rhs);
    for (k, (row0, cost)) in blocks.iter().enumerate() {
        let (n, m) = (fam_p.measure(k).len(), fam_q.measure(k).len());
        for i in 0..n {
            for j in 0..m {
                lp.add_column(cost[i * m + j], &[(row0 + i, 1.0), (row0 + n + j, 1.0)]);
            }
        }
    }
    let sol = lp.solve()?;
    let mut couplings = Vec::with_capacity(fam_p.len());
    let mut offset = 0;
    for (k, &w) in fam_p.label_weights().iter().enumerate() {
        let (mu, nu) = (fam_p.measure(k), fam_q.measure(k));
        let size = mu.len() * nu.len();
        let block: Vec<f64> = sol.x[offset..offset + size].iter().map(|v| if w > 0.0 { v / w } else { 0.0 }).collect();
        offset += size;
        couplings.push(Coupling::from_parts(mu.clone(), nu.clone(), block));
    }
    Ok((sol.objective.max(0.0).powf(1.0 / metric.p), couplings))
}

/// Generator outputs for every latent atom under every label.
#[derive(Debug, Clone, PartialEq)]
pub struct GenTable {
    per_label: Vec<Vec<Vec<f64>>>,
}

impl GenTable {
    pub fn new(per_label: Vec<Vec<Vec<f64>>>) -> Self {
        Self { per_label }
    }

    /// Tabulates `gen(z, c)` over the latent family.
    pub fn from_fn(fam_z: &ConditionalFamily, gen: impl Fn(&[f64], &[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let mut per_label = Vec::with_capacity(fam_z.len());
        for k in 0..fam_z.len() {
            let c = fam_z.label(k);
            per_label.push(fam_z.measure(k).iter().map(|(z, _)| gen(z, c)).collect::<Result<Vec<_>>>()?);
        }
        Ok(Self { per_label })
    }

    pub fn get(&self, label: usize, z: usize) -> &[f64] {
        &self.per_label[label][z]
    }

    /// The generated family `Gen(·, c)♯P_{Z|c}`.
    pub fn pushforward(&self, fam_z: &ConditionalFamily) -> Result<ConditionalFamily> {
        fam_z.try_map(|k, m| {
            let pts = self.per_label.get(k).ok_or(Error::LabelMismatch("generator table misses a label".into()))?;
            if pts.len() != m.len() {
                return Err(Error::DimensionMismatch { expected: m.len(), actual: pts.len() });
            }
            DiscreteMeasure::new(pts.clone(), m.weights().to_vec())
        })
    }
}

/// Conditional encoder `Q(z | x, c)`, one row-major `n_x x n_z` table per label.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderPlan {
    pub tables: Vec<Vec<f64>>,
    pub shapes: Vec<(usize, usize)>,
}

impl EncoderPlan {
    pub fn get(&self, label: usize, x: usize, z: usize) -> f64 {
        self.tables[label][x * self.shapes[label].1 + z]
    }

    /// Largest violation of the row-sum and aggregate constraints.
    pub fn constraint_violation(&self, fam_x: &ConditionalFamily, fam_z: &ConditionalFamily) -> (f64, f64) {
        let mut row_err: f64 = 0.0;
        let mut agg_err: f64 = 0.0;
        for (k, &(n, m)) in self.shapes.iter().enumerate() {
            for i in 0..n {
                let s: f64 = (0..m).map(|j| self.get(k, i, j)).sum();
                row_err = row_err.max((s - 1.0).abs());
            }
            for j in 0..m {
                let s: f64 = (0..n).map(|i| self.get(k, i, j) * fam_x.measure(k).weight(i)).sum();
                agg_err = agg_err.max((s - fam_z.measure(k).weight(j)).abs());
            }
        }
        (row_err, agg_err)
    }
}

/// Optimal reconstruction cost over encoders whose aggregate posterior matches
/// the latent family, solved directly over `Q(z|x,c)`.
pub fn encoder_lp_cost(
    fam_x: &ConditionalFamily,
    fam_z: &ConditionalFamily,
    gen_table: &GenTable,
    metric: &MetricSpec,
) -> Result<(f64, EncoderPlan)> {
    fam_x.check_same_labels(fam_z)?;
    for (a, b) in fam_x.label_weights().iter().zip(fam_z.label_weights()) {
        if (a - b).abs() > 1e-9 {
            return Err(Error::LabelMismatch(format!("label weights differ: {a} vs {b}")));
        }
    }
    let generated = gen_table.pushforward(fam_z)?;
    let mut rhs = Vec::new();
    let mut blocks = Vec::new();
    for k in 0..fam_x.len() {
        let (mx, mz) = (fam_x.measure(k), fam_z.measure(k));
        let row0 = rhs.len();
        rhs.extend(std::iter::repeat_n(1.0, mx.len()));
        rhs.extend(mz.weights().iter().cloned());
        blocks.push((row0, metric.cost_matrix(mx, generated.measure(k))?));
    }
    let mut lp = Lp::new(rhs);
    for (k, (row0, cost)) in blocks.iter().enumerate() {
        let (mx, mz) = (fam_x.measure(k), fam_z.measure(k));
        let pc = fam_x.label_weights()[k];
        let (n, m) = (mx.len(), mz.len());
        for i in 0..n {
            for j in 0..m {
                let px = mx.weight(i);
                lp.add_column(cost[i * m + j] * px * pc, &[(row0 + i, 1.0), (row0 + n + j, px)]);
            }
        }
    }
    let sol = lp.solve().map_err(|e| match e {
        Error::Infeasible(msg) => Error::Solver(format!("encoder LP reported infeasible although the product plan is feasible: {msg}")),
        other => other,
    })?;
    let mut tables = Vec::new();
    let mut shapes = Vec::new();
    let mut offset = 0;
    for k in 0..fam_x.len() {
        let (n, m) = (fam_x.measure(k).len(), fam_z.measure(k).len());
        tables.push(sol.x[offset..offset + n * m].to_vec());
        shapes.push((n, m));
        offset += n * m;
    }
    Ok((sol.objective.max(0.0).powf(1.0 / metric.p), EncoderPlan { tables, shapes }))
}

/// Covariance blocks of `(X, C)`, `(Y, C)` and a candidate cross-covariance of
/// a coupling of `X` and `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianJointSpec {
    pub sxx: DMatrix<f64>,
    pub syy: DMatrix<f64>,
    pub scc: DMatrix<f64>,
    pub sxc: DMatrix<f64>,
    pub syc: DMatrix<f64>,
    pub sxy: DMatrix<f64>,
}

impl GaussianJointSpec {
    /// Unit-variance scalar case with the given correlations.
    pub fn correlations(rho_xy: f64, rho_xc: f64, rho_yc: f64) -> Self {
        let s = |v: f64| DMatrix::from_element(1, 1, v);
        Self { sxx: s(1.0), syy: s(1.0), scc: s(1.0), sxc: s(rho_xc), syc: s(rho_yc), sxy: s(rho_xy) }
    }

    /// The full covariance of `(X, Y, C)`.
    pub fn assemble(&self) -> Result<DMatrix<f64>> {
        let (dx, dy, dc) = (self.sxx.nrows(), self.syy.nrows(), self.scc.nrows());
        let shapes = [
            (&self.sxx, dx, dx),
            (&self.syy, dy, dy),
            (&self.scc, dc, dc),
            (&self.sxc, dx, dc),
            (&self.syc, dy, dc),
            (&self.sxy, dx, dy),
        ];
        for (m, r, c) in shapes {
            if m.nrows() != r || m.ncols() != c {
                return Err(Error::DimensionMismatch { expected: r * c, actual: m.nrows() * m.ncols() });
            }
        }
        let n = dx + dy + dc;
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((0, 0), (dx, dx)).copy_from(&self.sxx);
        full.view_mut((dx, dx), (dy, dy)).copy_from(&self.syy);
        full.view_mut((dx + dy, dx + dy), (dc, dc)).copy_from(&self.scc);
        full.view_mut((0, dx), (dx, dy)).copy_from(&self.sxy);
        full.view_mut((dx, 0), (dy, dx)).copy_from(&self.sxy.transpose());
        full.view_mut((0, dx + dy), (dx, dc)).copy_from(&self.sxc);
        full.view_mut((dx + dy, 0), (dc, dx)).copy_from(&self.sxc.transpose());
        full.view_mut((dx, dx + dy), (dy, dc)).copy_from(&self.syc);
        full.view_mut((dx + dy, dx), (dc, dy)).copy_from(&self.syc.transpose());
        Ok(full)
    }
}

/// True iff the joint covariance of `(X, Y, C)` is PSD, i.e. the Gaussian
/// coupling belongs to the conditional sub-coupling.
pub fn gaussian_subcoupling_member(spec: &GaussianJointSpec) -> Result<bool> {
    Ok(min_eigenvalue(&spec.assemble()?) >= -PSD_TOL)
}

/// `sqrt((1 - ρ_xc²)(1 - ρ_yc²))`: the largest admissible `|ρ* - ρ_xc ρ_yc|`.
pub fn example1_threshold(rho_xc: f64, rho_yc: f64) -> Result<f64> {
    for r in [rho_xc, rho_yc] {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::OutOfRange(r));
        }
    }
    Ok(((1.0 - rho_xc * rho_xc) * (1.0 - rho_yc * rho_yc)).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(parts: &[(&[f64], f64)]) -> ConditionalFamily {
        let labels = (0..parts.len()).map(|k| vec![k as f64]).collect();
        let ms = parts.iter().map(|(p, _)| DiscreteMeasure::uniform(p.iter().map(|x| vec![*x]).collect()).unwrap()).collect();
        ConditionalFamily::new(labels, ms, parts.iter().map(|(_, w)| *w).collect()).unwrap()
    }

    #[test]
    fn two_labels_mix_per_label_costs() {
        let p = fam(&[(&[0.0], 0.5), (&[0.0], 0.5)]);
        let q = fam(&[(&[1.0], 0.5), (&[2.0], 0.5)]);
        let e2 = MetricSpec::euclidean(2.0).unwrap();
        let v = expected_conditional_wasserstein(&p, &q, &e2).unwrap();
        assert!((v - 2.5f64.sqrt()).abs() < 1e-12);
        let (s, cpls) = subcoupling_cost(&p, &q, &e2).unwrap();
        assert!((s - v).abs() < 1e-12);
        assert!(cpls.iter().all(|c| c.max_marginal_error() < 1e-12));
    }

    #[test]
    fn label_mismatch_is_reported() {
        let p = fam(&[(&[0.0], 0.5), (&[0.0], 0.5)]);
        let q = fam(&[(&[0.0], 1.0)]);
        let e2 = MetricSpec::euclidean(2.0).unwrap();
        assert!(matches!(expected_conditional_wasserstein(&p, &q, &e2), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn identity_generator_gives_zero_cost() {
        let x = fam(&[(&[0.0, 1.0, 3.0], 0.4), (&[2.0, 5.0], 0.6)]);
        let table = GenTable::from_fn(&x, |z, _| Ok(z.to_vec())).unwrap();
        let e2 = MetricSpec::euclidean(2.0).unwrap();
        let (v, plan) = encoder_lp_cost(&x, &x, &table, &e2).unwrap();
        assert!(v.abs() < 1e-9);
        let (r, a) = plan.constraint_violation(&x, &x);
        assert!(r < 1e-8 && a < 1e-8);
        for i in 0..3 {
            assert!((plan.get(0, i, i) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn example1_values() {
        assert_eq!(example1_threshold(0.0, 0.0).unwrap(), 1.0);
        assert!((example1_threshold(0.8, 0.8).unwrap() - 0.36).abs() < 1e-15);
        assert_eq!(example1_threshold(1.0, 0.3).unwrap(), 0.0);
        assert!(matches!(example1_threshold(1.2, 0.0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn membership_examples() {
        assert!(gaussian_subcoupling_member(&GaussianJointSpec::correlations(0.99, 0.0, 0.0)).unwrap());
        assert!(!gaussian_subcoupling_member(&GaussianJointSpec::correlations(-0.5, 0.8, 0.8)).unwrap());
        assert!(gaussian_subcoupling_member(&GaussianJointSpec::correlations(0.64, 0.8, 0.8)).unwrap());
    }
}

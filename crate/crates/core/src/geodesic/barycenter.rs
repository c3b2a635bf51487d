use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrtm, sq_dist, sqrtm, symmetrize};
use crate::measures::{normalized_weights, DiscreteMeasure, GaussianMeasure};
use crate::ot::lp::Lp;
use crate::ot::{check_alphas, multimarginal_coupling};

pub const GAUSSIAN_BARYCENTER_TOL: f64 = 1e-10;
pub const GAUSSIAN_BARYCENTER_MAX_ITER: usize = 200;

/// Convex weights over observed labels and the label they average to.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterWeights {
    alphas: Vec<f64>,
    labels: Vec<Vec<f64>>,
    cbar: Vec<f64>,
}

impl BarycenterWeights {
    pub fn new(alphas: Vec<f64>, labels: Vec<Vec<f64>>) -> Result<Self> {
        let first = labels.first().ok_or(Error::EmptySupport)?;
        let alphas = check_alphas(&alphas, labels.len())?;
        let k = first.len();
        let mut cbar = vec![0.0; k];
        for (a, c) in alphas.iter().zip(&labels) {
            if c.len() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: c.len() });
            }
            for (s, v) in cbar.iter_mut().zip(c) {
                *s += a * v;
            }
        }
        Ok(Self { alphas, labels, cbar })
    }

    /// Like [`BarycenterWeights::new`] but also checks a supplied `cbar`.
    pub fn with_cbar(alphas: Vec<f64>, labels: Vec<Vec<f64>>, cbar: &[f64]) -> Result<Self> {
        let bw = Self::new(alphas, labels)?;
        if cbar.len() != bw.cbar.len() || bw.cbar.iter().zip(cbar).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(Error::InvalidArgument(format!("cbar {cbar:?} does not match weighted labels {:?}", bw.cbar)));
        }
        Ok(bw)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn labels(&self) -> &[Vec<f64>] {
        &self.labels
    }

    pub fn cbar(&self) -> &[f64] {
        &self.cbar
    }

    /// `Σ α_m ‖c̄ - c_m‖²`.
    pub fn label_term(&self) -> f64 {
        self.alphas.iter().zip(&self.labels).map(|(a, c)| a * sq_dist(&self.cbar, c)).sum()
    }
}

/// Drops entries below the LP tolerance and re-solves the barycentric
/// equations on the remaining labels, which removes the drift left by the
/// cut slack. Falls back to clamping when the support is degenerate.
fn polish_on_support(labels: &[Vec<f64>], target: &[f64], alphas: &[f64]) -> Vec<f64> {
    let support: Vec<usize> = (0..alphas.len()).filter(|&j| alphas[j] > 1e-9).collect();
    let k = target.len();
    let clamp = || {
        let a: Vec<f64> = alphas.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = a.iter().sum();
        a.iter().map(|v| v / s).collect::<Vec<f64>>()
    };
    let a = DMatrix::from_fn(k + 1, support.len(), |r, c| if r < k { labels[support[c]][r] } else { 1.0 });
    let mut b = DVector::from_column_slice(target);
    b = b.push(1.0);
    let svd = a.svd(true, true);
    if svd.rank(1e-10) < support.len() {
        return clamp();
    }
    match svd.solve(&b, 1e-12) {
        Ok(x) if x.iter().all(|v| *v >= 0.0) => {
            let mut out = vec![0.0; alphas.len()];
            for (i, &j) in support.iter().enumerate() {
                out[j] = x[i];
            }
            let s: f64 = out.iter().sum();
            out.iter().map(|v| v / s).collect()
        }
        _ => clamp(),
    }
}

/// Convex weights reaching `target` with the least label spread
/// `Σ α_m ‖target - c_m‖²`, ties broken towards the lexicographically smallest
/// weight vector. Fails with `UnknownLabel` outside the convex hull.
pub fn select_label_weights(labels: &[Vec<f64>], target: &[f64]) -> Result<BarycenterWeights> {
    let m = labels.len();
    if m == 0 {
        return Err(Error::EmptySupport);
    }
    let k = target.len();
    if labels.iter().any(|c| c.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, actual: labels[0].len() });
    }
    let sq: Vec<f64> = labels.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    // Rows: k coordinates, the simplex row, then optional cut rows.
    let build = |cuts: &[(Vec<f64>, f64)]| -> Lp {
        let mut rhs: Vec<f64> = target.to_vec();
        rhs.push(1.0);
        rhs.extend(cuts.iter().map(|(_, b)| *b));
        Lp::new(rhs)
    };
    let solve = |objective: &[f64], cuts: &[(Vec<f64>, f64)]| -> Result<(Vec<f64>, f64)> {
        let mut lp = build(cuts);
        for j in 0..m {
            let mut e: Vec<(usize, f64)> = (0..k).map(|r| (r, labels[j][r])).collect();
            e.push((k, 1.0));
            for (q, (row, _)) in cuts.iter().enumerate() {
                e.push((k + 1 + q, row[j]));
            }
            lp.add_column(objective[j], &e);
        }
        for q in 0..cuts.len() {
            lp.add_column(0.0, &[(k + 1 + q, 1.0)]);
        }
        let sol = lp.solve().map_err(|e| match e {
            Error::Infeasible(_) => Error::UnknownLabel(target.to_vec()),
            other => other,
        })?;
        Ok((sol.x[..m].to_vec(), sol.objective))
    };
    let (mut alphas, best) = solve(&sq, &[])?;
    let slack = 1e-12 * (1.0 + best.abs());
    let mut cuts = vec![(sq.clone(), best + slack)];
    for j in 0..m.saturating_sub(1) {
        let mut obj = vec![0.0; m];
        obj[j] = 1.0;
        let (a, v) = solve(&obj, &cuts)?;
        alphas = a;
        let mut row = vec![0.0; m];
        row[j] = 1.0;
        cuts.push((row, v + 1e-12));
    }
    let alphas = polish_on_support(labels, target, &alphas);
    let bw = BarycenterWeights::new(alphas, labels.to_vec())?;
    if bw.cbar.iter().zip(target).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs())) {
        return Err(Error::UnknownLabel(target.to_vec()));
    }
    Ok(BarycenterWeights { cbar: target.to_vec(), ..bw })
}

/// `inf_P Σ α_m W₂²(P, P_m)` via the exact multimarginal plan.
pub fn wasserstein_variance(measures: &[DiscreteMeasure], alphas: &[f64], max_tuples: usize) -> Result<f64> {
    Ok(multimarginal_coupling(measures, alphas, max_tuples)?.1.max(0.0))
}

/// Barycenter as the pushforward of the optimal multimarginal plan under the
/// weighted mean.
pub fn barycenter_multimarginal(measures: &[DiscreteMeasure], alphas: &[f64], max_tuples: usize) -> Result<DiscreteMeasure> {
    let alphas = check_alphas(alphas, measures.len())?;
    let (mc, _) = multimarginal_coupling(measures, &alphas, max_tuples)?;
    mc.barycentric_pushforward(&alphas)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Terms {
    pub variance_term: f64,
    pub label_term: f64,
    /// Wasserstein variance of the joint `(z, c_m)` measures, solved directly.
    pub total: f64,
}

/// Splits the joint variance of `(z, c_m)` families into the latent variance
/// and the label spread. `total` is computed by its own multimarginal LP on
/// the joint points, so `total = variance_term + label_term` is a check.
pub fn lemma2_decomposition(latents: &[DiscreteMeasure], bw: &BarycenterWeights, max_tuples: usize) -> Result<Lemma2Terms> {
    if latents.len() != bw.labels.len() {
        return Err(Error::DimensionMismatch { expected: bw.labels.len(), actual: latents.len() });
    }
    let variance_term = wasserstein_variance(latents, &bw.alphas, max_tuples)?;
    let joints: Vec<DiscreteMeasure> = latents.iter().zip(&bw.labels).map(|(m, c)| m.with_suffix(c)).collect();
    let total = wasserstein_variance(&joints, &bw.alphas, max_tuples)?;
    Ok(Lemma2Terms { variance_term, label_term: bw.label_term(), total })
}

/// One step of the fixed-point map `S -> Σ α_m (S^{1/2} Σ_m S^{1/2})^{1/2}`.
fn fixed_point_sum(s: &DMatrix<f64>, gaussians: &[GaussianMeasure], alphas: &[f64]) -> DMatrix<f64> {
    let r = sqrtm(s);
    let d = s.nrows();
    let mut acc = DMatrix::zeros(d, d);
    for (g, a) in gaussians.iter().zip(alphas) {
        acc += sqrtm(&(&r * &g.cov * &r)) * *a;
    }
    symmetrize(&acc)
}

/// Frobenius residual `‖S - Σ α_m (S^{1/2} Σ_m S^{1/2})^{1/2}‖` of a candidate
/// barycenter covariance.
pub fn gaussian_barycenter_residual(s: &DMatrix<f64>, gaussians: &[GaussianMeasure], alphas: &[f64]) -> f64 {
    (s - fixed_point_sum(s, gaussians, alphas)).norm()
}

/// W2 barycenter of Gaussians. The covariance iteration is
/// `S <- S^{-1/2} (Σ α_m (S^{1/2} Σ_m S^{1/2})^{1/2})² S^{-1/2}`, which has the
/// same fixed points as the plain map and converges from any positive
/// definite start; here it starts at `Σ α_m Σ_m`.
pub fn gaussian_barycenter(gaussians: &[GaussianMeasure], alphas: &[f64], tol: f64, max_iter: usize) -> Result<GaussianMeasure> {
    let first = gaussians.first().ok_or(Error::EmptySupport)?;
    let alphas = normalized_weights(alphas)?;
    if alphas.len() != gaussians.len() {
        return Err(Error::DimensionMismatch { expected: gaussians.len(), actual: alphas.len() });
    }
    let d = first.dim();
    let mut mean = DVector::zeros(d);
    let mut s = DMatrix::zeros(d, d);
    for (g, a) in gaussians.iter().zip(&alphas) {
        if g.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: g.dim() });
        }
        inv_sqrtm(&g.cov).map_err(|_| Error::SingularCovariance)?;
        mean += &g.mean * *a;
        s += &g.cov * *a;
    }
    for _ in 0..max_iter {
        let t = fixed_point_sum(&s, gaussians, &alphas);
        let is = inv_sqrtm(&s).map_err(|_| Error::SingularCovariance)?;
        let next = symmetrize(&(&is * &t * &t * &is));
        let change = (&next - &s).norm();
        s = next;
        if change < tol {
            return GaussianMeasure::new(mean, s);
        }
    }
    Err(Error::MaxIterExceeded(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::DEFAULT_MAX_TUPLES;

    fn pts(v: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(v.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    #[test]
    fn variance_examples() {
        assert!((wasserstein_variance(&[pts(&[0.0]), pts(&[2.0])], &[0.5, 0.5], DEFAULT_MAX_TUPLES).unwrap() - 1.0).abs() < 1e-15);
        let v = wasserstein_variance(&[pts(&[0.0, 2.0]), pts(&[1.0, 3.0])], &[0.5, 0.5], DEFAULT_MAX_TUPLES).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
        let b = barycenter_multimarginal(&[pts(&[0.0]), pts(&[4.0])], &[0.5, 0.5], DEFAULT_MAX_TUPLES).unwrap();
        assert_eq!(b.points(), vec![vec![2.0]]);
        let third = 1.0 / 3.0;
        let b = barycenter_multimarginal(&[pts(&[0.0]), pts(&[1.0]), pts(&[2.0])], &[third; 3], DEFAULT_MAX_TUPLES).unwrap();
        assert!((b.point(0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lemma2_examples() {
        let labels = vec![vec![0.0], vec![1.0]];
        let bw = BarycenterWeights::new(vec![0.5, 0.5], labels).unwrap();
        let t = lemma2_decomposition(&[pts(&[0.0]), pts(&[0.0])], &bw, DEFAULT_MAX_TUPLES).unwrap();
        assert!((t.variance_term).abs() < 1e-15 && (t.label_term - 0.25).abs() < 1e-15 && (t.total - 0.25).abs() < 1e-12);
        let t = lemma2_decomposition(&[pts(&[0.0]), pts(&[2.0])], &bw, DEFAULT_MAX_TUPLES).unwrap();
        assert!((t.variance_term - 1.0).abs() < 1e-12 && (t.total - 1.25).abs() < 1e-12);
        let one = BarycenterWeights::new(vec![1.0], vec![vec![3.0]]).unwrap();
        let t = lemma2_decomposition(&[pts(&[0.0, 5.0])], &one, DEFAULT_MAX_TUPLES).unwrap();
        assert_eq!((t.variance_term, t.label_term, t.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn label_weight_selection_prefers_nearest_labels() {
        let labels = vec![vec![0.0], vec![1.0], vec![2.0]];
        let bw = select_label_weights(&labels, &[0.5]).unwrap();
        assert!((bw.alphas()[0] - 0.5).abs() < 1e-12 && (bw.alphas()[1] - 0.5).abs() < 1e-12, "{:?}", bw.alphas());
        assert!(matches!(select_label_weights(&labels, &[2.5]), Err(Error::UnknownLabel(_))));
        let bw = select_label_weights(&labels, &[1.0]).unwrap();
        assert!((bw.alphas()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn label_weight_ties_go_lexicographically_smallest() {
        // Square corners: both diagonals reach the centre with equal spread.
        let labels = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let bw = select_label_weights(&labels, &[0.5, 0.5]).unwrap();
        let a = bw.alphas();
        assert!(a[0].abs() < 1e-9 && (a[1] - 0.5).abs() < 1e-9 && a[2].abs() < 1e-9 && (a[3] - 0.5).abs() < 1e-9, "{a:?}");
    }

    #[test]
    fn gaussian_barycenter_examples() {
        let g = |m: f64, s: f64| GaussianMeasure::from_slices(&[m], &[s * s]).unwrap();
        let b = gaussian_barycenter(&[g(0.0, 1.0), g(4.0, 1.0)], &[0.5, 0.5], 1e-12, 200).unwrap();
        assert!((b.mean[0] - 2.0).abs() < 1e-12 && (b.cov[(0, 0)] - 1.0).abs() < 1e-12);
        let b = gaussian_barycenter(&[g(0.0, 1.0), g(0.0, 3.0)], &[0.5, 0.5], 1e-12, 200).unwrap();
        assert!((b.cov[(0, 0)].sqrt() - 2.0).abs() < 1e-10);
        let a = GaussianMeasure::from_slices(&[0.0, 0.0], &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let c = GaussianMeasure::from_slices(&[1.0, 0.0], &[1.0, -0.3, -0.3, 0.5]).unwrap();
        let e = GaussianMeasure::from_slices(&[0.0, 2.0], &[3.0, 0.0, 0.0, 0.2]).unwrap();
        let gs = [a, c, e];
        let al = [0.2, 0.5, 0.3];
        let b = gaussian_barycenter(&gs, &al, 1e-12, 200).unwrap();
        assert!(gaussian_barycenter_residual(&b.cov, &gs, &al) < 1e-9);
    }
}

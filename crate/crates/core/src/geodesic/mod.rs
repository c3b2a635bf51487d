//! Wasserstein geodesics, barycenters and the variance decomposition over
//! labels.

mod barycenter;

pub use barycenter::{
    barycenter_multimarginal, gaussian_barycenter, gaussian_barycenter_residual, lemma2_decomposition,
    select_label_weights, wasserstein_variance, BarycenterWeights, Lemma2Terms, GAUSSIAN_BARYCENTER_MAX_ITER,
    GAUSSIAN_BARYCENTER_TOL,
};
pub use crate::generator::{theorem4_bound, Theorem4Report};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::ot::{exact_coupling, wasserstein_p, MetricKind, MetricSpec};

/// Displacement interpolation: pushforward of the optimal plan under
/// `(a, b) -> (1-t) a + t b`, taken in the metric's embedding. Atoms are not
/// merged.
pub fn mccann_interpolant(mu: &DiscreteMeasure, nu: &DiscreteMeasure, t: f64, metric: &MetricSpec) -> Result<DiscreteMeasure> {
    McCann::new(mu, nu, metric)?.at(t)
}

/// Optimal plan computed once, evaluated at any `t`.
#[derive(Debug, Clone)]
struct McCann {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cells: Vec<(usize, usize, f64)>,
    metric: MetricSpec,
}

impl McCann {
    fn new(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: &MetricSpec) -> Result<Self> {
        if metric.p != 2.0 {
            return Err(Error::InvalidArgument(format!("displacement interpolation needs p = 2, got {}", metric.p)));
        }
        let (cpl, _) = exact_coupling(mu, nu, metric)?;
        let mut cells = Vec::new();
        for i in 0..cpl.rows() {
            for j in 0..cpl.cols() {
                let w = cpl.get(i, j);
                if w > 0.0 {
                    cells.push((i, j, w));
                }
            }
        }
        Ok(Self { mu: mu.clone(), nu: nu.clone(), cells, metric: metric.clone() })
    }

    fn at(&self, t: f64) -> Result<DiscreteMeasure> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange(t));
        }
        let dim = self.mu.dim();
        let mut points = Vec::with_capacity(self.cells.len() * dim);
        let mut weights = Vec::with_capacity(self.cells.len());
        for &(i, j, w) in &self.cells {
            let (a, b) = (self.mu.point(i), self.nu.point(j));
            if t == 0.0 {
                points.extend_from_slice(a);
            } else if t == 1.0 {
                points.extend_from_slice(b);
            } else {
                points.extend(interpolate_point(&self.metric, a, b, t)?);
            }
            weights.push(w);
        }
        DiscreteMeasure::from_flat(dim, points, weights)
    }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// Point at time `t` on the segment from `a` to `b` in the metric's geometry.
fn interpolate_point(metric: &MetricSpec, a: &[f64], b: &[f64], t: f64) -> Result<Vec<f64>> {
    match &metric.kind {
        MetricKind::Euclidean | MetricKind::WeightedProduct { .. } => Ok(lerp(a, b, t)),
        MetricKind::EncoderInduced { encoder, .. } => {
            let d = encoder.data_dim();
            let ct = lerp(&a[d..], &b[d..], t);
            let za = encoder.encode(&a[..d], &a[d..])?;
            let zb = encoder.encode(&b[..d], &b[d..])?;
            let mut x = encoder.decode(&lerp(&za, &zb, t), &ct)?;
            x.extend(ct);
            Ok(x)
        }
    }
}

type Sampler = dyn Fn(f64) -> Result<DiscreteMeasure> + Send + Sync;

/// A curve `t -> w(t)` of discrete measures together with the metric used to
/// measure it.
#[derive(Clone)]
pub struct GeodesicCurve {
    sampler: Arc<Sampler>,
    pub metric: MetricSpec,
}

impl fmt::Debug for GeodesicCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeodesicCurve").field("metric", &self.metric).finish_non_exhaustive()
    }
}

impl GeodesicCurve {
    pub fn new(sampler: impl Fn(f64) -> Result<DiscreteMeasure> + Send + Sync + 'static, metric: MetricSpec) -> Self {
        Self { sampler: Arc::new(sampler), metric }
    }

    pub fn at(&self, t: f64) -> Result<DiscreteMeasure> {
        (self.sampler)(t)
    }

    /// Displacement interpolation between `mu` and `nu`.
    pub fn mccann(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: &MetricSpec) -> Result<Self> {
        let m = McCann::new(mu, nu, metric)?;
        Ok(Self::new(move |t| m.at(t), metric.clone()))
    }

    /// Linear mixture `(1-t) mu + t nu`, which is not a geodesic in general.
    pub fn mixture(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: &MetricSpec) -> Self {
        let (mu, nu) = (mu.clone(), nu.clone());
        Self::new(
            move |t| {
                if t == 0.0 {
                    return Ok(mu.clone());
                }
                if t == 1.0 {
                    return Ok(nu.clone());
                }
                DiscreteMeasure::mixture(&[(&mu, 1.0 - t), (&nu, t)])
            },
            metric.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSpeedReport {
    pub max_abs_deviation: f64,
    pub pass: bool,
    /// `W_p(w(0), w(1))`.
    pub endpoint_distance: f64,
    /// `(t, s, W_p(w(t), w(s)))` for every evaluated pair.
    pub pairs: Vec<(f64, f64, f64)>,
}

/// Largest `|W_p(w(t), w(s)) - |t-s| W_p(w(0), w(1))|` over all pairs of
/// `times` (0 and 1 are added when missing).
pub fn verify_constant_speed(curve: &GeodesicCurve, times: &[f64], tol: f64) -> Result<ConstantSpeedReport> {
    let mut ts: Vec<f64> = times.to_vec();
    for end in [0.0, 1.0] {
        if !ts.contains(&end) {
            ts.push(end);
        }
    }
    if let Some(bad) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::OutOfRange(*bad));
    }
    ts.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    ts.dedup();
    let snaps = ts.iter().map(|&t| curve.at(t)).collect::<Result<Vec<_>>>()?;
    let end = wasserstein_p(&snaps[0], &snaps[snaps.len() - 1], &curve.metric)?;
    let mut dev: f64 = 0.0;
    let mut pairs = Vec::new();
    for a in 0..ts.len() {
        for b in a + 1..ts.len() {
            let w = wasserstein_p(&snaps[a], &snaps[b], &curve.metric)?;
            dev = dev.max((w - (ts[b] - ts[a]) * end).abs());
            pairs.push((ts[a], ts[b], w));
        }
    }
    Ok(ConstantSpeedReport { max_abs_deviation: dev, pass: dev <= tol, endpoint_distance: end, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(v.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    #[test]
    fn midpoints() {
        let e2 = MetricSpec::euclidean(2.0).unwrap();
        assert_eq!(mccann_interpolant(&pts(&[0.0]), &pts(&[2.0]), 0.5, &e2).unwrap().points(), vec![vec![1.0]]);
        let m = mccann_interpolant(&pts(&[0.0, 2.0]), &pts(&[1.0, 3.0]), 0.5, &e2).unwrap();
        assert_eq!(m.points(), vec![vec![0.5], vec![2.5]]);
        let mu = pts(&[0.3, -1.0, 2.0]);
        let nu = pts(&[5.0, 1.0, 0.0]);
        assert_eq!(mccann_interpolant(&mu, &nu, 0.0, &e2).unwrap(), mu);
        let end = mccann_interpolant(&mu, &nu, 1.0, &e2).unwrap();
        let mut a = end.points();
        let mut b = nu.points();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn mccann_curve_has_constant_speed() {
        let e2 = MetricSpec::euclidean(2.0).unwrap();
        let c = GeodesicCurve::mccann(&pts(&[0.0, 2.0]), &pts(&[1.0, 3.0]), &e2).unwrap();
        let r = verify_constant_speed(&c, &[0.0, 0.25, 0.5, 0.75, 1.0], 1e-8).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn mixture_curve_is_not_a_geodesic() {
        let e2 = MetricSpec::euclidean(2.0).unwrap();
        let c = GeodesicCurve::mixture(&pts(&[0.0]), &pts(&[1.0]), &e2);
        let r = verify_constant_speed(&c, &[0.0, 0.5, 1.0], 1e-6).unwrap();
        assert!(!r.pass);
        assert!((r.max_abs_deviation - (0.5f64.sqrt() - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_other_orders() {
        let e1 = MetricSpec::euclidean(1.0).unwrap();
        assert!(mccann_interpolant(&pts(&[0.0]), &pts(&[1.0]), 0.5, &e1).is_err());
    }
}

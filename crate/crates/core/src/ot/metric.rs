//! Ground metrics. Every kind is the Euclidean distance after an embedding
//! of the point, so the transport cost is `‖e(a) - e(b)‖^p`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::DiscreteMeasure;

/// A label-conditioned bijection between data and latent space, used by the
/// encoder-induced metric.
pub trait LabeledEncoder: Send + Sync + fmt::Debug {
    fn data_dim(&self) -> usize;
    fn label_dim(&self) -> usize;
    fn encode(&self, x: &[f64], c: &[f64]) -> Result<Vec<f64>>;
    fn decode(&self, z: &[f64], c: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug)]
pub enum MetricKind {
    Euclidean,
    /// Points are `(x, c)` with `c` the trailing `label_dim` coordinates;
    /// distance `(‖x - x'‖² + ε‖c - c'‖²)^{1/2}`.
    WeightedProduct { label_dim: usize, label_weight: f64 },
    /// Points are `(x, c)`; distance `(‖Enc(x,c) - Enc(x',c')‖² + ε‖c - c'‖²)^{1/2}`.
    EncoderInduced { encoder: Arc<dyn LabeledEncoder>, label_weight: f64 },
}

#[derive(Clone, Debug)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub p: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("Wasserstein order p = {p} must lie in [1, inf)")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("label weight {eps} must be >= 0")));
    }
    Ok(())
}

impl MetricSpec {
    pub fn euclidean(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self { kind: MetricKind::Euclidean, p })
    }

    pub fn weighted_product(p: f64, label_dim: usize, label_weight: f64) -> Result<Self> {
        check_p(p)?;
        check_eps(label_weight)?;
        Ok(Self { kind: MetricKind::WeightedProduct { label_dim, label_weight }, p })
    }

    pub fn encoder_induced(p: f64, encoder: Arc<dyn LabeledEncoder>, label_weight: f64) -> Result<Self> {
        check_p(p)?;
        check_eps(label_weight)?;
        Ok(Self { kind: MetricKind::EncoderInduced { encoder, label_weight }, p })
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self { kind: self.kind.clone(), p })
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, MetricKind::Euclidean)
    }

    /// Maps a point to the space where the metric is Euclidean.
    pub fn embed(&self, point: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            MetricKind::Euclidean => Ok(point.to_vec()),
            MetricKind::WeightedProduct { label_dim, label_weight } => {
                if point.len() <= *label_dim {
                    return Err(Error::DimensionMismatch { expected: label_dim + 1, actual: point.len() });
                }
                let s = label_weight.sqrt();
                let k = point.len() - label_dim;
                Ok(point[..k].iter().cloned().chain(point[k..].iter().map(|c| s * c)).collect())
            }
            MetricKind::EncoderInduced { encoder, label_weight } => {
                let d = encoder.data_dim();
                let k = encoder.label_dim();
                if point.len() != d + k {
                    return Err(Error::DimensionMismatch { expected: d + k, actual: point.len() });
                }
                let mut z = encoder.encode(&point[..d], &point[d..])?;
                let s = label_weight.sqrt();
                z.extend(point[d..].iter().map(|c| s * c));
                Ok(z)
            }
        }
    }

    pub fn embed_measure(&self, m: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        if self.is_euclidean() {
            return Ok(m.clone());
        }
        m.map_points(|p| self.embed(p))
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
        }
        Ok(linalg::dist(&self.embed(a)?, &self.embed(b)?))
    }

    /// Row-major matrix of `d(x_i, y_j)^p`.
    pub fn cost_matrix(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Vec<f64>> {
        if mu.dim() != nu.dim() {
            return Err(Error::DimensionMismatch { expected: mu.dim(), actual: nu.dim() });
        }
        let em = self.embed_measure(mu)?;
        let en = self.embed_measure(nu)?;
        Ok(embedded_cost(&em, &en, self.p))
    }
}

pub(crate) fn power_cost(sq: f64, p: f64) -> f64 {
    if p == 2.0 {
        sq
    } else if p == 1.0 {
        sq.sqrt()
    } else {
        sq.sqrt().powf(p)
    }
}

pub(crate) fn embedded_cost(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for (x, _) in a.iter() {
        for (y, _) in b.iter() {
            c.push(power_cost(linalg::sq_dist(x, y), p));
        }
    }
    c
}

//! Per-label affine encoder/generator pairs `Enc(x, c) = A_c x + b_c`,
//! `Gen(z, c) = A_c^{-1} (z - b_c)`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesic::select_label_weights;
use crate::linalg::sq_dist;
use crate::measures::{ConditionalFamily, DiscreteMeasure, GaussianMeasure};
use crate::ot::{LabeledEncoder, MetricSpec};

/// Smallest admissible `|det A|`.
pub const DET_TOL: f64 = 1e-12;

/// Invertible affine map with its inverse cached.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
    inverse: DMatrix<f64>,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != offset.len() {
            return Err(Error::DimensionMismatch { expected: offset.len(), actual: matrix.nrows() });
        }
        let det = matrix.determinant();
        if !(det.abs() > DET_TOL) {
            return Err(Error::NotInvertible(det.abs()));
        }
        let inverse = matrix.clone().try_inverse().ok_or(Error::NotInvertible(det.abs()))?;
        Ok(Self { matrix, offset, inverse })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim), offset: DVector::zeros(dim), inverse: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x) + &self.offset).as_slice().to_vec()
    }

    pub fn apply_inverse(&self, z: &[f64]) -> Vec<f64> {
        (&self.inverse * (DVector::from_column_slice(z) - &self.offset)).as_slice().to_vec()
    }
}

/// Encoder/generator pair over a finite set of observed labels. Unobserved
/// labels inside the convex hull of the observed ones use the blended map
/// `Σ α_m A_m`, `Σ α_m b_m` with the least-spread convex weights.
#[derive(Debug)]
pub struct AffineBijectionPair {
    labels: Vec<Vec<f64>>,
    maps: Vec<AffineMap>,
    blended: RwLock<HashMap<Vec<u64>, Arc<AffineMap>>>,
}

impl Clone for AffineBijectionPair {
    fn clone(&self) -> Self {
        Self { labels: self.labels.clone(), maps: self.maps.clone(), blended: RwLock::new(HashMap::new()) }
    }
}

impl PartialEq for AffineBijectionPair {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels && self.maps == other.maps
    }
}

fn label_key(c: &[f64]) -> Vec<u64> {
    c.iter().map(|v| v.to_bits()).collect()
}

impl AffineBijectionPair {
    pub fn new(labels: Vec<Vec<f64>>, maps: Vec<AffineMap>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptySupport);
        }
        if labels.len() != maps.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), actual: maps.len() });
        }
        let (k, d) = (labels[0].len(), maps[0].dim());
        for (i, (c, m)) in labels.iter().zip(&maps).enumerate() {
            if c.len() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: c.len() });
            }
            if m.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: m.dim() });
            }
            if labels[..i].iter().any(|o| label_key(o) == label_key(c)) {
                return Err(Error::LabelMismatch(format!("duplicate label {c:?}")));
            }
        }
        Ok(Self { labels, maps, blended: RwLock::new(HashMap::new()) })
    }

    pub fn from_parts(labels: Vec<Vec<f64>>, matrices: Vec<DMatrix<f64>>, offsets: Vec<DVector<f64>>) -> Result<Self> {
        let maps = matrices.into_iter().zip(offsets).map(|(a, b)| AffineMap::new(a, b)).collect::<Result<Vec<_>>>()?;
        Self::new(labels, maps)
    }

    pub fn identity(dim: usize, labels: Vec<Vec<f64>>) -> Result<Self> {
        let maps = vec![AffineMap::identity(dim); labels.len()];
        Self::new(labels, maps)
    }

    pub fn labels(&self) -> &[Vec<f64>] {
        &self.labels
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn dim(&self) -> usize {
        self.maps[0].dim()
    }

    pub fn label_dim(&self) -> usize {
        self.labels[0].len()
    }

    pub fn index_of(&self, c: &[f64]) -> Option<usize> {
        let key = label_key(c);
        self.labels.iter().position(|l| label_key(l) == key)
    }

    /// The affine encoder at label `c`.
    pub fn at_label(&self, c: &[f64]) -> Result<Arc<AffineMap>> {
        if c.len() != self.label_dim() {
            return Err(Error::DimensionMismatch { expected: self.label_dim(), actual: c.len() });
        }
        if let Some(i) = self.index_of(c) {
            return Ok(Arc::new(self.maps[i].clone()));
        }
        let key = label_key(c);
        if let Some(m) = self.blended.read().expect("label cache lock").get(&key) {
            return Ok(m.clone());
        }
        let bw = select_label_weights(&self.labels, c)?;
        let d = self.dim();
        let mut a = DMatrix::zeros(d, d);
        let mut b = DVector::zeros(d);
        for (w, m) in bw.alphas().iter().zip(&self.maps) {
            a += m.matrix() * *w;
            b += m.offset() * *w;
        }
        let map = Arc::new(AffineMap::new(a, b)?);
        self.blended.write().expect("label cache lock").insert(key, map.clone());
        Ok(map)
    }

    pub fn encode(&self, x: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.at_label(c)?.apply(x))
    }

    pub fn generate(&self, z: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok(self.at_label(c)?.apply_inverse(z))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        Ok(())
    }

    pub fn encode_measure(&self, m: &DiscreteMeasure, c: &[f64]) -> Result<DiscreteMeasure> {
        let map = self.at_label(c)?;
        m.map_points(|x| Ok(map.apply(x)))
    }

    pub fn generate_measure(&self, m: &DiscreteMeasure, c: &[f64]) -> Result<DiscreteMeasure> {
        let map = self.at_label(c)?;
        m.map_points(|z| Ok(map.apply_inverse(z)))
    }

    pub fn encode_gaussian(&self, g: &GaussianMeasure, c: &[f64]) -> Result<GaussianMeasure> {
        let map = self.at_label(c)?;
        g.affine_pushforward(map.matrix(), map.offset())
    }

    pub fn generate_gaussian(&self, g: &GaussianMeasure, c: &[f64]) -> Result<GaussianMeasure> {
        let map = self.at_label(c)?;
        let shift = -(map.inverse_matrix() * map.offset());
        g.affine_pushforward(map.inverse_matrix(), &shift)
    }

    /// Latent family `Enc(·, c)♯P_{X|c}` for every label.
    pub fn encode_family(&self, fam: &ConditionalFamily) -> Result<ConditionalFamily> {
        fam.try_map(|k, m| self.encode_measure(m, fam.label(k)))
    }

    /// The metric `d_Enc` with label weight `eps` acting on `(x, c)` points.
    pub fn metric(self: &Arc<Self>, p: f64, eps: f64) -> Result<MetricSpec> {
        MetricSpec::encoder_induced(p, self.clone(), eps)
    }
}

impl LabeledEncoder for AffineBijectionPair {
    fn data_dim(&self) -> usize {
        self.dim()
    }

    fn label_dim(&self) -> usize {
        AffineBijectionPair::label_dim(self)
    }

    fn encode(&self, x: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        AffineBijectionPair::encode(self, x, c)
    }

    fn decode(&self, z: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        self.generate(z, c)
    }
}

/// `(‖Enc(x,c) - Enc(x',c')‖² + ε‖c - c'‖²)^{1/2}`.
pub fn d_enc(pair: &AffineBijectionPair, a: (&[f64], &[f64]), b: (&[f64], &[f64]), eps: f64) -> Result<f64> {
    let za = pair.encode(a.0, a.1)?;
    let zb = pair.encode(b.0, b.1)?;
    Ok((sq_dist(&za, &zb) + eps * sq_dist(a.1, b.1)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair2() -> AffineBijectionPair {
        AffineBijectionPair::from_parts(
            vec![vec![0.0], vec![1.0]],
            vec![DMatrix::identity(1, 1) * 2.0, DMatrix::identity(1, 1) * 4.0],
            vec![DVector::zeros(1), DVector::from_element(1, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn scaled_encoder_distance() {
        let p = pair2();
        let d = d_enc(&p, (&[0.0], &[0.0]), (&[1.5], &[0.0]), 1.0).unwrap();
        assert!((d - 3.0).abs() < 1e-15);
        assert_eq!(d_enc(&p, (&[0.3], &[1.0]), (&[0.3], &[1.0]), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn identity_pair_is_euclidean_on_joint_points() {
        let p = AffineBijectionPair::identity(2, vec![vec![0.0], vec![1.0]]).unwrap();
        let d = d_enc(&p, (&[0.0, 0.0], &[0.0]), (&[1.0, 2.0], &[1.0]), 1.0).unwrap();
        assert!((d - 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn intermediate_labels_blend_the_maps() {
        let p = pair2();
        let m = p.at_label(&[0.25]).unwrap();
        assert!((m.matrix()[(0, 0)] - 2.5).abs() < 1e-12);
        assert!((m.offset()[0] - 0.25).abs() < 1e-12);
        assert!(matches!(p.encode(&[0.0], &[2.0]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn round_trip_is_exact_to_rounding() {
        let p = pair2();
        for x in [-3.0, 0.1, 7.5] {
            for c in [[0.0], [1.0], [0.6]] {
                let z = p.encode(&[x], &c).unwrap();
                assert!((p.generate(&z, &c).unwrap()[0] - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        assert!(matches!(
            AffineMap::new(DMatrix::zeros(2, 2), DVector::zeros(2)),
            Err(Error::NotInvertible(_))
        ));
    }
}

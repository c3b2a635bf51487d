//! Closed forms for Gaussian measures under W2 (Bures geometry).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrtm, sqrtm, symmetrize};
use crate::measures::GaussianMeasure;

fn check_dims(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    Ok(())
}

/// Squared Bures-Wasserstein distance.
pub fn gaussian_w2_squared(g1: &GaussianMeasure, g2: &GaussianMeasure) -> Result<f64> {
    check_dims(g1, g2)?;
    let s2 = sqrtm(&g2.cov);
    let cross = sqrtm(&(&s2 * &g1.cov * &s2));
    let tr = (&g1.cov + &g2.cov - cross * 2.0).trace();
    let dm = (&g1.mean - &g2.mean).norm_squared();
    Ok((dm + tr).max(0.0))
}

pub fn gaussian_w2(g1: &GaussianMeasure, g2: &GaussianMeasure) -> Result<f64> {
    Ok(gaussian_w2_squared(g1, g2)?.sqrt())
}

/// Symmetric matrix `A` of the Monge map `x -> m1 + A (x - m0)` from `s0` to `s1`.
pub fn gaussian_monge_matrix(s0: &DMatrix<f64>, s1: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r0 = sqrtm(s0);
    let ir0 = inv_sqrtm(s0).map_err(|_| Error::SingularCovariance)?;
    let mid = sqrtm(&(&r0 * s1 * &r0));
    Ok(symmetrize(&(&ir0 * mid * &ir0)))
}

/// Point on the W2 geodesic between two Gaussians.
pub fn gaussian_geodesic(g0: &GaussianMeasure, g1: &GaussianMeasure, t: f64) -> Result<GaussianMeasure> {
    check_dims(g0, g1)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(t));
    }
    let a = gaussian_monge_matrix(&g0.cov, &g1.cov)?;
    let d = g0.dim();
    let m = DMatrix::identity(d, d) * (1.0 - t) + a * t;
    let cov = symmetrize(&(&m * &g0.cov * &m));
    GaussianMeasure::new(&g0.mean * (1.0 - t) + &g1.mean * t, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1d(m: f64, s: f64) -> GaussianMeasure {
        GaussianMeasure::from_slices(&[m], &[s * s]).unwrap()
    }

    #[test]
    fn one_dimensional_closed_forms() {
        assert!((gaussian_w2(&g1d(0.0, 1.0), &g1d(2.0, 1.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!((gaussian_w2(&g1d(0.0, 1.0), &g1d(0.0, 3.0)).unwrap() - 2.0).abs() < 1e-12);
        let mid = gaussian_geodesic(&g1d(0.0, 1.0), &g1d(0.0, 3.0), 0.5).unwrap();
        assert!((mid.cov[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn translation_in_higher_dimension() {
        let a = GaussianMeasure::from_slices(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = GaussianMeasure::from_slices(&[3.0, 4.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((gaussian_w2(&a, &b).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn geodesic_endpoints_and_monge_pushforward() {
        let a = GaussianMeasure::from_slices(&[0.0, 1.0], &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let b = GaussianMeasure::from_slices(&[1.0, -1.0], &[1.0, -0.4, -0.4, 3.0]).unwrap();
        let m = gaussian_monge_matrix(&a.cov, &b.cov).unwrap();
        assert!((&m * &a.cov * &m - &b.cov).abs().max() < 1e-10);
        let g1 = gaussian_geodesic(&a, &b, 1.0).unwrap();
        assert!((g1.cov - &b.cov).abs().max() < 1e-10);
        let g0 = gaussian_geodesic(&a, &b, 0.0).unwrap();
        assert!((g0.cov - &a.cov).abs().max() < 1e-12);
        // constant speed along the geodesic
        let w = gaussian_w2(&a, &b).unwrap();
        let h = gaussian_geodesic(&a, &b, 0.25).unwrap();
        assert!((gaussian_w2(&a, &h).unwrap() - 0.25 * w).abs() < 1e-9);
    }
}

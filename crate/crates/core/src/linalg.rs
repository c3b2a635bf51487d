//! Small dense helpers for symmetric matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this (relative to the spectral radius) are clamped to zero.
pub const PSD_CLAMP: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let vals = eig.eigenvalues.map(|l| if l <= PSD_CLAMP * scale.max(1.0) { f(0.0) } else { f(l) });
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&vals) * q.transpose()))
}

/// Principal square root of a symmetric PSD matrix, tiny negative eigenvalues clamped.
pub fn sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, f64::sqrt)
}

/// Inverse principal square root; fails on a singular input.
pub fn inv_sqrtm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if eig.eigenvalues.iter().any(|&l| l <= PSD_CLAMP * scale.max(1.0)) {
        return Err(Error::NotPsd(eig.eigenvalues.min()));
    }
    let vals = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let q = &eig.eigenvectors;
    Ok(symmetrize(&(q * DMatrix::from_diagonal(&vals) * q.transpose())))
}

/// Checks symmetry and PSD-ness up to `tol`.
pub fn check_psd(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), actual: m.ncols() });
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > tol * (1.0 + m.abs().max()) {
        return Err(Error::NotPsd(f64::NAN));
    }
    let lmin = min_eigenvalue(m);
    if lmin < -tol {
        return Err(Error::NotPsd(lmin));
    }
    Ok(())
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Row-major slice into a matrix.
pub fn matrix_from_rows(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

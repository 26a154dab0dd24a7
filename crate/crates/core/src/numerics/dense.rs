//! Dense reference computations through full SVD / eigendecompositions.
//! Independent of the banded factorizations and Krylov estimators, so they
//! serve as oracles for small systems.

use nalgebra::{DMatrix, SymmetricEigen};

use super::NormMode;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::C64;

fn to_c(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Lower Cholesky factor of a real SPD matrix.
pub fn cholesky(d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(d.clone())
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite {
            row: 0,
            pivot: f64::NAN,
        })
}

fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("Cholesky factor has a positive diagonal")
}

pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn sigma_max(m: &DMatrix<C64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn sigma_min(m: &DMatrix<C64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// `sigma_max` of `L^T C L^{-T}`, `L^{-1} C L`, or `C`.
pub fn weighted_norm(c: &DMatrix<C64>, d: &DMatrix<f64>, mode: NormMode) -> Result<f64> {
    let t = match mode {
        NormMode::Euclid => c.clone(),
        NormMode::D => {
            let l = cholesky(d)?;
            to_c(&l.transpose()) * c * to_c(&lower_inverse(&l).transpose())
        }
        NormMode::DInv => {
            let l = cholesky(d)?;
            to_c(&lower_inverse(&l)) * c * to_c(&l)
        }
    };
    Ok(sigma_max(&t))
}

/// `sigma_min(L^{-1} A L^{-T})`.
pub fn inf_sup(a: &DMatrix<C64>, d: &DMatrix<f64>) -> Result<f64> {
    let li = to_c(&lower_inverse(&cholesky(d)?));
    Ok(sigma_min(&(&li * a * li.transpose())))
}

/// `(||L^T A^{-1} L||, ||L^T A^{-1} R||, ||R^T A^{-1} R||)` as reciprocals
/// of smallest singular values of `L^{-1} A L^{-T}`, `R^{-1} A L^{-T}` and
/// `R^{-1} A R^{-T}`.
pub fn solution_operator_norms(a: &DMatrix<C64>, d: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(f64, f64, f64)> {
    let li = to_c(&lower_inverse(&cholesky(d)?));
    let ri = to_c(&lower_inverse(&cholesky(m)?));
    let inv = |x: f64| if x == 0.0 { f64::INFINITY } else { 1.0 / x };
    Ok((
        inv(sigma_min(&(&li * a * li.transpose()))),
        inv(sigma_min(&(&ri * a * li.transpose()))),
        inv(sigma_min(&(&ri * a * ri.transpose()))),
    ))
}

/// Smallest and largest eigenvalue of a real symmetric matrix.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn csr_dense(m: &CsrMatrix<C64>) -> DMatrix<C64> {
    m.to_dense()
}

pub fn csr_dense_real(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    m.to_dense()
}

//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::linalg::{Cholesky, SymmetricEigen, LU};
use nalgebra::Dyn;

use crate::{ImitationError, Matrix, Result};

/// Eigenvalues below this floor make a matrix unusable as an SPD argument.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes and replaces negative eigenvalues by zero. The flag reports
/// whether any eigenvalue was actually clamped.
pub fn clamp_psd(m: &Matrix) -> (Matrix, bool) {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return (sym, false);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let out = &eig.eigenvectors * Matrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    (symmetrize(&out), true)
}

pub fn is_spd(m: &Matrix) -> bool {
    m.is_square() && Cholesky::new(m.clone()).is_some()
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    Cholesky::new(m.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| ImitationError::NotSpd("Cholesky factorization failed".into()))
}

/// Applies a scalar function to the spectrum of a symmetric matrix whose
/// eigenvalues must all exceed [`EIGEN_FLOOR`].
pub fn spd_map(m: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| !(l > EIGEN_FLOOR)) {
        return Err(ImitationError::NotSpd(format!(
            "eigenvalue {bad:.3e} below floor {EIGEN_FLOOR:.0e}"
        )));
    }
    let mapped = eig.eigenvalues.map(f);
    Ok(&eig.eigenvectors * Matrix::from_diagonal(&mapped) * eig.eigenvectors.transpose())
}

/// 1-norm condition number estimate `‖A‖₁ ‖A⁻¹‖₁` from an existing LU factor.
/// Returns infinity when the factor is singular.
pub fn condition_1norm(a: &Matrix, lu: &LU<f64, Dyn, Dyn>) -> f64 {
    let Some(inv) = lu.try_inverse() else {
        return f64::INFINITY;
    };
    let norm1 = |m: &Matrix| {
        m.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let c = norm1(a) * norm1(&inv);
    if c.is_finite() {
        c
    } else {
        f64::INFINITY
    }
}

/// Relative asymmetry `‖M − Mᵀ‖_F / ‖M‖_F` (zero for the zero matrix).
pub fn asymmetry(m: &Matrix) -> f64 {
    let n = m.norm();
    if n == 0.0 {
        0.0
    } else {
        (m - m.transpose()).norm() / n
    }
}

//! Imitation fidelity metrics: cumulative mean error `C_m` and the
//! affine-invariant covariance error `C_cov`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::linalg::spd_map;
use crate::{ImitationError, Matrix, Result, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub c_m: f64,
    pub c_cov: f64,
    /// `(‖ŝ_m − μ_n‖, per-point affine-invariant distance)` for every index.
    pub per_point_errors: Vec<(f64, f64)>,
    /// Seconds.
    pub wall_time: f64,
}

impl EvalReport {
    /// Fixed-width table with the columns `C_m`, `C_cov`, `Time`.
    pub fn table(&self) -> String {
        format!(
            "{:>14} {:>14} {:>12}\n{:>14.6e} {:>14.6e} {:>12.4}\n",
            "C_m", "C_cov", "Time [s]", self.c_m, self.c_cov, self.wall_time
        )
    }
}

/// `C_m = sqrt(Σ_n ‖ŝ_m(x_n) − μ_n‖²)`; cumulative, no `1/N`.
pub fn mean_error(predicted: &[Vector], reference: &[Vector]) -> Result<f64> {
    Ok(mean_terms(predicted, reference)?
        .iter()
        .map(|e| e * e)
        .sum::<f64>()
        .sqrt())
}

fn mean_terms(predicted: &[Vector], reference: &[Vector]) -> Result<Vec<f64>> {
    if predicted.len() != reference.len() {
        return Err(ImitationError::dim(
            "predicted vs reference means",
            reference.len(),
            predicted.len(),
        ));
    }
    predicted
        .iter()
        .zip(reference)
        .enumerate()
        .map(|(i, (p, r))| {
            if p.len() != r.len() {
                return Err(ImitationError::dim(format!("mean {i}"), r.len(), p.len()));
            }
            Ok((p - r).norm())
        })
        .collect()
}

/// Affine-invariant distance `‖logm(A^{-1/2} B A^{-1/2})‖_F` between SPD
/// matrices, both square roots and logarithms through symmetric
/// eigendecompositions.
pub fn spd_distance(reference: &Matrix, predicted: &Matrix) -> Result<f64> {
    if reference.shape() != predicted.shape() || !reference.is_square() {
        return Err(ImitationError::dim(
            "covariance shapes",
            reference.nrows(),
            predicted.nrows(),
        ));
    }
    let inv_sqrt = spd_map(reference, |l| 1.0 / l.sqrt())?;
    // validates the predicted matrix as well
    spd_map(predicted, |l| l)?;
    if reference == predicted {
        return Ok(0.0);
    }
    let whitened = &inv_sqrt * predicted * &inv_sqrt;
    Ok(spd_map(&whitened, f64::ln)?.norm())
}

/// `C_cov = sqrt(Σ_n d(Σ_n, Ŝ_c(x_n))²)` with the affine-invariant distance.
pub fn cov_error(predicted: &[Matrix], reference: &[Matrix]) -> Result<f64> {
    Ok(cov_terms(predicted, reference)?
        .iter()
        .map(|e| e * e)
        .sum::<f64>()
        .sqrt())
}

fn cov_terms(predicted: &[Matrix], reference: &[Matrix]) -> Result<Vec<f64>> {
    if predicted.len() != reference.len() {
        return Err(ImitationError::dim(
            "predicted vs reference covariances",
            reference.len(),
            predicted.len(),
        ));
    }
    predicted
        .iter()
        .zip(reference)
        .map(|(p, r)| spd_distance(r, p))
        .collect()
}

/// Both metrics plus per-point errors; `wall_time` is the caller-supplied
/// prediction time.
pub fn evaluate(
    predicted_means: &[Vector],
    predicted_covs: &[Matrix],
    reference_means: &[Vector],
    reference_covs: &[Matrix],
    wall_time: Duration,
) -> Result<EvalReport> {
    let m = mean_terms(predicted_means, reference_means)?;
    let c = cov_terms(predicted_covs, reference_covs)?;
    if m.len() != c.len() {
        return Err(ImitationError::dim("mean vs covariance count", m.len(), c.len()));
    }
    Ok(EvalReport {
        c_m: m.iter().map(|e| e * e).sum::<f64>().sqrt(),
        c_cov: c.iter().map(|e| e * e).sum::<f64>().sqrt(),
        per_point_errors: m.into_iter().zip(c).collect(),
        wall_time: wall_time.as_secs_f64(),
    })
}

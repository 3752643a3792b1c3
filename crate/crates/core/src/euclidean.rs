//! Closed-form Gaussian decoding of the surrogate weights under the KL and
//! reverse-KL imitation modes.
//!
//! With `α = α(x)`:
//!
//! | mode | mean | covariance |
//! |------|------|------------|
//! | KL   | `Σ α_n μ_n / Σ α_n` | `Σ α_n ((μ−μ_n)(μ−μ_n)ᵀ + Σ_n) / Σ α_n` |
//! | RKL  | `(Σ α_n Σ_n⁻¹)⁻¹ Σ α_n Σ_n⁻¹ μ_n` | `(Σ α_n Σ_n⁻¹ / Σ α_n)⁻¹` |
//!
//! The approximate KL covariance drops the outer-product term.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{ProbabilisticTrajectory, SuperpositionSet};
use crate::kernel::SurrogateModel;
use crate::linalg::{clamp_psd, spd_inverse, symmetrize};
use crate::{ImitationError, Matrix, Result, Vector};

/// `|Σ α|` at or below this is treated as degenerate.
pub const DEGENERATE_ALPHA_SUM: f64 = 1e-12;
/// Smallest admissible singular value of the weighted precision sum.
pub const MIN_PRECISION_SINGULAR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Divergence {
    /// `f(u) = u log u`
    #[default]
    Kl,
    /// `f(u) = −log u`
    Rkl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceVariant {
    #[default]
    Exact,
    /// Drops the mean-spread term from the covariance.
    #[serde(alias = "approx")]
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImitationMode {
    #[serde(default)]
    pub divergence: Divergence,
    /// Only consulted by the KL mode.
    #[serde(default)]
    pub kl_cov_variant: CovarianceVariant,
}

impl ImitationMode {
    pub fn kl(variant: CovarianceVariant) -> Self {
        Self {
            divergence: Divergence::Kl,
            kl_cov_variant: variant,
        }
    }

    pub fn rkl() -> Self {
        Self {
            divergence: Divergence::Rkl,
            kl_cov_variant: CovarianceVariant::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PredictionFlags {
    /// Negative covariance eigenvalues were clamped to zero.
    pub clamped: bool,
    /// The manifold mean iteration hit its iteration cap.
    pub not_converged: bool,
}

impl PredictionFlags {
    pub fn label(&self) -> &'static str {
        match (self.clamped, self.not_converged) {
            (false, false) => "ok",
            (true, false) => "clamped",
            (false, true) => "nonconverged",
            (true, true) => "clamped|nonconverged",
        }
    }
}

/// Predicted Gaussian. For manifold outputs `mu` is a point in ambient
/// coordinates and `sigma` acts on the tangent space at `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mu: Vector,
    pub sigma: Matrix,
    pub flags: PredictionFlags,
}

/// Decoding rule turning weights and training Gaussians into a prediction.
///
/// KL and reverse KL are provided by [`ImitationMode`]; other divergences can
/// be plugged into [`predict_with`] by implementing this trait with their own
/// mean and covariance minimizers.
pub trait ModeEstimator {
    fn mean(&self, alpha: &[f64], means: &[&Vector], covs: &[&Matrix]) -> Result<Vector>;

    /// Called after [`mean`](Self::mean) with its result.
    fn covariance(&self, alpha: &[f64], means: &[&Vector], covs: &[&Matrix], mu: &Vector) -> Result<Matrix>;
}

impl ModeEstimator for ImitationMode {
    fn mean(&self, alpha: &[f64], means: &[&Vector], covs: &[&Matrix]) -> Result<Vector> {
        match self.divergence {
            Divergence::Kl => kl_mean(alpha, means),
            Divergence::Rkl => rkl_mean(alpha, means, covs),
        }
    }

    fn covariance(&self, alpha: &[f64], means: &[&Vector], covs: &[&Matrix], mu: &Vector) -> Result<Matrix> {
        match self.divergence {
            Divergence::Kl => kl_cov(alpha, means, covs, mu, self.kl_cov_variant),
            Divergence::Rkl => rkl_cov(alpha, covs),
        }
    }
}

fn alpha_sum(alpha: &[f64]) -> Result<f64> {
    let sum: f64 = alpha.iter().sum();
    if !(sum.abs() > DEGENERATE_ALPHA_SUM) {
        return Err(ImitationError::DegenerateWeights { sum });
    }
    Ok(sum)
}

fn check_lengths(alpha: &[f64], n: usize, what: &str) -> Result<()> {
    if alpha.is_empty() {
        return Err(ImitationError::Empty("alpha weights"));
    }
    if alpha.len() != n {
        return Err(ImitationError::dim(format!("alpha vs {what}"), alpha.len(), n));
    }
    Ok(())
}

fn kl_mean(alpha: &[f64], means: &[&Vector]) -> Result<Vector> {
    check_lengths(alpha, means.len(), "means")?;
    let sum = alpha_sum(alpha)?;
    let mut acc = Vector::zeros(means[0].len());
    for (&a, m) in alpha.iter().zip(means) {
        acc.axpy(a, m, 1.0);
    }
    Ok(acc / sum)
}

fn kl_cov(
    alpha: &[f64],
    means: &[&Vector],
    covs: &[&Matrix],
    mu: &Vector,
    variant: CovarianceVariant,
) -> Result<Matrix> {
    check_lengths(alpha, means.len(), "means")?;
    check_lengths(alpha, covs.len(), "covariances")?;
    let sum = alpha_sum(alpha)?;
    let dim = mu.len();
    let mut acc = Matrix::zeros(dim, dim);
    for ((&a, m), c) in alpha.iter().zip(means).zip(covs) {
        acc += *c * a;
        if variant == CovarianceVariant::Exact {
            let d = mu - *m;
            acc += (&d * d.transpose()) * a;
        }
    }
    Ok(acc / sum)
}

/// `Σ α_n Σ_n⁻¹` and `Σ α_n Σ_n⁻¹ μ_n` (the latter only when means are given).
fn weighted_precision(alpha: &[f64], covs: &[&Matrix], means: Option<&[&Vector]>) -> Result<(Matrix, Vector)> {
    let dim = covs[0].nrows();
    let mut p = Matrix::zeros(dim, dim);
    let mut b = Vector::zeros(dim);
    for (n, (&a, c)) in alpha.iter().zip(covs).enumerate() {
        let inv = spd_inverse(c)?;
        if let Some(means) = means {
            b += &inv * means[n] * a;
        }
        p += inv * a;
    }
    let min_singular = p.singular_values().min();
    if !(min_singular > MIN_PRECISION_SINGULAR) {
        return Err(ImitationError::SingularPrecision { min_singular });
    }
    Ok((p, b))
}

fn rkl_mean(alpha: &[f64], means: &[&Vector], covs: &[&Matrix]) -> Result<Vector> {
    check_lengths(alpha, means.len(), "means")?;
    check_lengths(alpha, covs.len(), "covariances")?;
    let (p, b) = weighted_precision(alpha, covs, Some(means))?;
    let min_singular = 0.0;
    p.lu()
        .solve(&b)
        .ok_or(ImitationError::SingularPrecision { min_singular })
}

fn rkl_cov(alpha: &[f64], covs: &[&Matrix]) -> Result<Matrix> {
    check_lengths(alpha, covs.len(), "covariances")?;
    let sum = alpha_sum(alpha)?;
    let (p, _) = weighted_precision(alpha, covs, None)?;
    let inv = p
        .try_inverse()
        .ok_or(ImitationError::SingularPrecision { min_singular: 0.0 })?;
    Ok(inv * sum)
}

fn refs<T>(xs: &[T]) -> Vec<&T> {
    xs.iter().collect()
}

/// `μ = Σ α_n μ_n / Σ α_n`.
pub fn predict_mean_kl(alpha: &[f64], means: &[Vector]) -> Result<Vector> {
    kl_mean(alpha, &refs(means))
}

/// KL covariance around an already predicted mean.
pub fn predict_cov_kl(
    alpha: &[f64],
    means: &[Vector],
    covs: &[Matrix],
    predicted_mu: &Vector,
    variant: CovarianceVariant,
) -> Result<Matrix> {
    kl_cov(alpha, &refs(means), &refs(covs), predicted_mu, variant)
}

/// `μ = (Σ α_n Σ_n⁻¹)⁻¹ Σ α_n Σ_n⁻¹ μ_n`.
pub fn predict_mean_rkl(alpha: &[f64], means: &[Vector], covs: &[Matrix]) -> Result<Vector> {
    rkl_mean(alpha, &refs(means), &refs(covs))
}

/// `Σ = (Σ α_n Σ_n⁻¹ / Σ α_n)⁻¹`.
pub fn predict_cov_rkl(alpha: &[f64], covs: &[Matrix]) -> Result<Matrix> {
    rkl_cov(alpha, &refs(covs))
}

/// Symmetrizes a predicted covariance and, when some weight is negative,
/// clamps negative eigenvalues to zero.
pub(crate) fn finalize_covariance(sigma: &Matrix, alpha: &[f64]) -> (Matrix, bool) {
    if alpha.iter().any(|&a| a < 0.0) {
        let (out, clamped) = clamp_psd(sigma);
        if clamped {
            warn!("negative weights produced an indefinite covariance; clamped negative eigenvalues to 0");
        }
        (out, clamped)
    } else {
        (symmetrize(sigma), false)
    }
}

fn require_euclidean(data: &ProbabilisticTrajectory) -> Result<()> {
    if data.manifold().is_some() {
        return Err(ImitationError::Unsupported(
            "manifold-valued trajectory passed to the Euclidean estimator",
        ));
    }
    Ok(())
}

fn require_model_matches(model: &SurrogateModel, data: &ProbabilisticTrajectory) -> Result<()> {
    if model.len() != data.len() {
        return Err(ImitationError::dim(
            "model rows vs trajectory points",
            model.len(),
            data.len(),
        ));
    }
    Ok(())
}

/// Prediction at `x` with any decoding rule.
pub fn predict_with<E: ModeEstimator + ?Sized>(
    estimator: &E,
    model: &SurrogateModel,
    data: &ProbabilisticTrajectory,
    x: &[f64],
) -> Result<Prediction> {
    require_euclidean(data)?;
    require_model_matches(model, data)?;
    let alpha = model.alpha_weights(x)?;
    let means = refs(data.means());
    let covs = refs(data.covariances());
    decode(estimator, alpha.as_slice(), &means, &covs)
}

fn decode<E: ModeEstimator + ?Sized>(
    estimator: &E,
    alpha: &[f64],
    means: &[&Vector],
    covs: &[&Matrix],
) -> Result<Prediction> {
    let mu = estimator.mean(alpha, means, covs)?;
    let sigma = estimator.covariance(alpha, means, covs, &mu)?;
    let (sigma, clamped) = finalize_covariance(&sigma, alpha);
    Ok(Prediction {
        mu,
        sigma,
        flags: PredictionFlags {
            clamped,
            not_converged: false,
        },
    })
}

/// Gaussian prediction at `x`: weights from the surrogate, then the mode's
/// mean followed by its covariance.
pub fn predict(
    model: &SurrogateModel,
    data: &ProbabilisticTrajectory,
    mode: ImitationMode,
    x: &[f64],
) -> Result<Prediction> {
    predict_with(&mode, model, data, x)
}

/// Prediction that trades off `H` prioritized trajectories. The weighted
/// objective `Σ_n α_n Σ_h w_h D(·)` has the same stationary points as a single
/// trajectory whose terms carry the products `α_n w_h`, so the single-set
/// formulas are reused on the flattened double sum.
pub fn superpose_predict(
    model: &SurrogateModel,
    sets: &SuperpositionSet,
    mode: ImitationMode,
    x: &[f64],
) -> Result<Prediction> {
    for (h, t) in sets.trajectories().iter().enumerate() {
        require_euclidean(t)?;
        let on_grid = t.len() == model.len()
            && t.inputs()
                .iter()
                .zip(model.inputs())
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b.iter()).all(|(p, q)| (p - q).abs() <= 1e-9));
        if !on_grid {
            return Err(ImitationError::GridMismatch(h));
        }
    }
    let alpha = model.alpha_weights(x)?;
    let h_count = sets.trajectories().len();
    let mut weights = Vec::with_capacity(alpha.len() * h_count);
    let mut means = Vec::with_capacity(weights.capacity());
    let mut covs = Vec::with_capacity(weights.capacity());
    for (t, &w) in sets.trajectories().iter().zip(sets.priorities()) {
        if w == 0.0 {
            continue;
        }
        for ((&a, m), c) in alpha.iter().zip(t.means()).zip(t.covariances()) {
            weights.push(a * w);
            means.push(m);
            covs.push(c);
        }
    }
    decode(&mode, &weights, &means, &covs)
}

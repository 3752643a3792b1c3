//! Manifold-valued prediction: the mean is the weighted Fréchet mean
//! `argmin_μ Σ α_n dist²(μ_n, μ)` found by Riemannian gradient descent with a
//! retraction, and the covariance averages training covariances that were
//! parallel transported to the predicted mean.

use log::warn;
use nalgebra::linalg::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::data::ProbabilisticTrajectory;
use crate::euclidean::{finalize_covariance, CovarianceVariant, Prediction, PredictionFlags, DEGENERATE_ALPHA_SUM};
use crate::kernel::SurrogateModel;
use crate::linalg::symmetrize;
use crate::manifold::ManifoldSpec;
use crate::{ImitationError, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RgdInit {
    FirstAnchor,
    /// Anchor with the largest weight, lowest index on ties.
    #[default]
    MaxAlphaAnchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RgdConfig {
    pub eta: f64,
    pub max_iter: usize,
    /// Stop once the Riemannian gradient norm is at most this.
    pub tol: f64,
    pub init: RgdInit,
}

impl Default for RgdConfig {
    fn default() -> Self {
        Self {
            eta: 0.01,
            max_iter: 1000,
            tol: 1e-9,
            init: RgdInit::MaxAlphaAnchor,
        }
    }
}

impl RgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(ImitationError::InvalidParameter {
                name: "eta",
                value: self.eta,
                reason: "step size must be positive",
            });
        }
        if !(self.tol > 0.0) {
            return Err(ImitationError::InvalidParameter {
                name: "tol",
                value: self.tol,
                reason: "tolerance must be positive",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrechetResult {
    pub point: Vector,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

/// Weighted Fréchet mean by fixed-step Riemannian gradient descent,
/// `μ ← R_μ(−η ∇F(μ))`.
pub fn frechet_predict_mean(
    spec: &ManifoldSpec,
    alpha: &[f64],
    anchors: &[Vector],
    cfg: &RgdConfig,
) -> Result<FrechetResult> {
    frechet_predict_mean_observed(spec, alpha, anchors, cfg, |_, _| {})
}

/// Same as [`frechet_predict_mean`], calling `on_iterate(i, μ_i)` for the
/// initial point and every subsequent iterate.
pub fn frechet_predict_mean_observed(
    spec: &ManifoldSpec,
    alpha: &[f64],
    anchors: &[Vector],
    cfg: &RgdConfig,
    mut on_iterate: impl FnMut(usize, &Vector),
) -> Result<FrechetResult> {
    cfg.validate()?;
    spec.validate()?;
    if anchors.is_empty() {
        return Err(ImitationError::Empty("anchors"));
    }
    if alpha.len() != anchors.len() {
        return Err(ImitationError::dim("alpha vs anchors", anchors.len(), alpha.len()));
    }
    if alpha.iter().all(|a| a.abs() <= DEGENERATE_ALPHA_SUM) {
        return Err(ImitationError::DegenerateWeights {
            sum: alpha.iter().sum(),
        });
    }
    for a in anchors {
        spec.check_point(a)?;
    }

    let start = match cfg.init {
        RgdInit::FirstAnchor => 0,
        RgdInit::MaxAlphaAnchor => alpha
            .iter()
            .enumerate()
            .fold(0, |best, (i, &a)| if a > alpha[best] { i } else { best }),
    };
    let mut mu = anchors[start].clone();
    on_iterate(0, &mu);
    for i in 0..cfg.max_iter {
        let grad = spec.grad_unchecked(alpha, anchors, &mu)?;
        let grad_norm = grad.norm();
        if grad_norm <= cfg.tol {
            return Ok(FrechetResult {
                point: mu,
                iterations: i,
                converged: true,
                grad_norm,
            });
        }
        mu = spec.retract_unchecked(&mu, &(grad * -cfg.eta))?;
        on_iterate(i + 1, &mu);
    }
    let grad_norm = spec.grad_unchecked(alpha, anchors, &mu)?.norm();
    let converged = grad_norm <= cfg.tol;
    if !converged {
        warn!(
            "Riemannian gradient descent stopped after {} iterations with gradient norm {grad_norm:.3e}",
            cfg.max_iter
        );
    }
    Ok(FrechetResult {
        point: mu,
        iterations: cfg.max_iter,
        converged,
        grad_norm,
    })
}

/// Columns `u_j = √λ_j e_j` of an eigendecomposition `Σ = Σ_j u_j u_jᵀ`,
/// projected onto the tangent space at `base`.
fn covariance_factors(spec: &ManifoldSpec, base: &Vector, sigma: &Matrix) -> Vec<Vector> {
    let eig = SymmetricEigen::new(crate::linalg::symmetrize(sigma));
    eig.eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .filter(|(&l, _)| l > 0.0)
        .map(|(&l, e)| spec.project_tangent(base, &(e.into_owned() * l.sqrt())))
        .collect()
}

fn transport_factors(spec: &ManifoldSpec, factors: &[Vector], from: &Vector, to: &Vector) -> Result<Matrix> {
    let dim = from.len();
    let mut out = Matrix::zeros(dim, dim);
    for u in factors {
        let t = spec.transport_unchecked(from, to, u)?;
        out += &t * t.transpose();
    }
    Ok(crate::linalg::symmetrize(&out))
}

/// `Σ_∥ = Σ_j Γ_{μ_n→μ}(u_j) Γ_{μ_n→μ}(u_j)ᵀ` from the eigendecomposition of
/// `Σ_n`. Returns `Σ_n` itself when the points coincide.
pub fn transported_covariance(spec: &ManifoldSpec, sigma_n: &Matrix, mu_n: &Vector, mu: &Vector) -> Result<Matrix> {
    spec.check_point(mu_n)?;
    spec.check_point(mu)?;
    let n = spec.ambient_dim();
    if sigma_n.shape() != (n, n) {
        return Err(ImitationError::dim("covariance", n, sigma_n.nrows()));
    }
    if spec.dist_unchecked(mu_n, mu) < 1e-12 {
        return Ok(sigma_n.clone());
    }
    transport_factors(spec, &covariance_factors(spec, mu_n, sigma_n), mu_n, mu)
}

/// Manifold predictor with the per-sample covariance factors computed once.
#[derive(Debug, Clone)]
pub struct ManifoldImitator<'a> {
    model: &'a SurrogateModel,
    data: &'a ProbabilisticTrajectory,
    spec: &'a ManifoldSpec,
    factors: Vec<Vec<Vector>>,
    cfg: RgdConfig,
    variant: CovarianceVariant,
}

impl<'a> ManifoldImitator<'a> {
    pub fn new(
        model: &'a SurrogateModel,
        data: &'a ProbabilisticTrajectory,
        cfg: RgdConfig,
        variant: CovarianceVariant,
    ) -> Result<Self> {
        let spec = data.manifold().ok_or(ImitationError::Unsupported(
            "manifold prediction needs a manifold-valued trajectory",
        ))?;
        cfg.validate()?;
        if model.len() != data.len() {
            return Err(ImitationError::dim(
                "model rows vs trajectory points",
                model.len(),
                data.len(),
            ));
        }
        let factors = data
            .means()
            .iter()
            .zip(data.covariances())
            .map(|(m, c)| covariance_factors(spec, m, c))
            .collect();
        Ok(Self {
            model,
            data,
            spec,
            factors,
            cfg,
            variant,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let alpha = self.model.alpha_weights(x)?;
        let alpha = alpha.as_slice();
        let sum: f64 = alpha.iter().sum();
        if !(sum.abs() > DEGENERATE_ALPHA_SUM) {
            return Err(ImitationError::DegenerateWeights { sum });
        }
        let mean = frechet_predict_mean(self.spec, alpha, self.data.means(), &self.cfg)?;
        let (sigma, clamped) = assemble_covariance(
            self.spec,
            alpha,
            self.data.means(),
            |n| &self.data.covariances()[n],
            |n| &self.factors[n],
            &mean.point,
            self.variant,
        )?;
        Ok(Prediction {
            mu: mean.point,
            sigma,
            flags: PredictionFlags {
                clamped,
                not_converged: !mean.converged,
            },
        })
    }
}

fn assemble_covariance<'c>(
    spec: &ManifoldSpec,
    alpha: &[f64],
    means: &[Vector],
    cov: impl Fn(usize) -> &'c Matrix,
    factors: impl Fn(usize) -> &'c [Vector],
    mu: &Vector,
    variant: CovarianceVariant,
) -> Result<(Matrix, bool)> {
    let sum: f64 = alpha.iter().sum();
    if !(sum.abs() > DEGENERATE_ALPHA_SUM) {
        return Err(ImitationError::DegenerateWeights { sum });
    }
    let dim = mu.len();
    let mut acc = Matrix::zeros(dim, dim);
    for (n, (&a, mu_n)) in alpha.iter().zip(means).enumerate() {
        let transported = if spec.dist_unchecked(mu_n, mu) < 1e-12 {
            cov(n).clone()
        } else {
            transport_factors(spec, factors(n), mu_n, mu).map_err(|_| ImitationError::CutLocus { anchor: Some(n) })?
        };
        acc += transported * a;
        if variant == CovarianceVariant::Exact {
            let l = spec
                .log_unchecked(mu, mu_n)
                .map_err(|_| ImitationError::CutLocus { anchor: Some(n) })?;
            acc += (&l * l.transpose()) * a;
        }
    }
    // clamp in tangent coordinates: the ambient matrix is singular along the
    // normal directions and rounding there must not count as indefiniteness
    let b = spec.tangent_basis(mu);
    let (tangent, clamped) = finalize_covariance(&(b.transpose() * (acc / sum) * &b), alpha);
    Ok((symmetrize(&(&b * tangent * b.transpose())), clamped))
}

/// Tangent covariance at `mu`: exact `Σ α_n (Log_μ(μ_n)Log_μ(μ_n)ᵀ + Σ_∥n) / Σ α_n`
/// or approximate `Σ α_n Σ_∥n / Σ α_n`, symmetrized and, for negative
/// weights, clamped. The flag reports clamping.
pub fn manifold_covariance(
    spec: &ManifoldSpec,
    alpha: &[f64],
    means: &[Vector],
    covs: &[Matrix],
    mu: &Vector,
    variant: CovarianceVariant,
) -> Result<(Matrix, bool)> {
    if alpha.len() != means.len() || covs.len() != means.len() {
        return Err(ImitationError::dim(
            "alpha/means/covariances",
            means.len(),
            alpha.len().min(covs.len()),
        ));
    }
    spec.check_point(mu)?;
    for m in means {
        spec.check_point(m)?;
    }
    let factors: Vec<Vec<Vector>> = means
        .iter()
        .zip(covs)
        .map(|(m, c)| covariance_factors(spec, m, c))
        .collect();
    assemble_covariance(spec, alpha, means, |n| &covs[n], |n| &factors[n], mu, variant)
}

/// One-shot manifold prediction at `x`.
pub fn predict_manifold(
    model: &SurrogateModel,
    data: &ProbabilisticTrajectory,
    x: &[f64],
    cfg: &RgdConfig,
    variant: CovarianceVariant,
) -> Result<Prediction> {
    ManifoldImitator::new(model, data, *cfg, variant)?.predict(x)
}

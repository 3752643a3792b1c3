//! Kernel evaluation and the kernel ridge surrogate that produces the
//! input-dependent weights `α(x)`.
//!
//! For a fitted model the weights solve `(K' + N'λI) α = k'_x`, where `K'` and
//! `k'_x` are the Gram matrix and kernel vector with the rows of weighted
//! (via-point) samples multiplied by their weight, and `N'` is the sum of the
//! row weights. Row scaling makes the system asymmetric, so it is factored
//! with partial-pivoting LU.

use log::warn;
use nalgebra::linalg::LU;
use nalgebra::Dyn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::condition_1norm;
use crate::{ImitationError, Matrix, Result, Vector};

pub const DEFAULT_KAPPA: f64 = 6.0;
pub const DEFAULT_LAMBDA: f64 = 1e-5;

/// Condition estimate above which diagonal jitter is added.
const CONDITION_WARN: f64 = 1e12;
const JITTER: f64 = 1e-10;
/// Condition estimate above which the system is rejected even after jitter.
const CONDITION_FAIL: f64 = 1e16;

/// Kernel families. New families only need a variant here and a branch in
/// [`KernelKind::eval_sq_dist`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `exp(-κ‖x − x'‖²)`
    #[default]
    Gaussian,
}

impl KernelKind {
    #[inline]
    pub fn eval_sq_dist(self, kappa: f64, sq_dist: f64) -> f64 {
        match self {
            KernelKind::Gaussian => (-kappa * sq_dist).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub kind: KernelKind,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelKind::Gaussian,
            kappa: DEFAULT_KAPPA,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl KernelConfig {
    pub fn gaussian(kappa: f64, lambda: f64) -> Result<Self> {
        let cfg = Self {
            kind: KernelKind::Gaussian,
            kappa,
            lambda,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(ImitationError::InvalidParameter {
                name: "kappa",
                value: self.kappa,
                reason: "must be positive and finite",
            });
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ImitationError::InvalidParameter {
                name: "lambda",
                value: self.lambda,
                reason: "must be positive and finite",
            });
        }
        Ok(())
    }

    /// Kernel value for two inputs of equal length (not checked).
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
        self.kind.eval_sq_dist(self.kappa, sq)
    }

    /// Kernel value for two scalar inputs.
    #[inline]
    pub fn eval_scalar(&self, t: f64, t2: f64) -> f64 {
        self.kind.eval_sq_dist(self.kappa, (t - t2) * (t - t2))
    }
}

/// `k(x, x2)`; errors when the lengths differ.
pub fn kernel_eval(x: &[f64], x2: &[f64], config: &KernelConfig) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(ImitationError::dim("kernel inputs", x.len(), x2.len()));
    }
    Ok(config.eval_unchecked(x, x2))
}

/// Dense Gram matrix `K[i][j] = k(x_i, x_j)`. Rows are built in parallel;
/// every entry is computed independently so the result does not depend on
/// the thread count.
pub fn gram_matrix(inputs: &[Vector], config: &KernelConfig) -> Result<Matrix> {
    let first = inputs.first().ok_or(ImitationError::Empty("gram inputs"))?;
    let dim = first.len();
    if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
        return Err(ImitationError::dim("gram inputs", dim, bad.len()));
    }
    let n = inputs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j < i {
                        // filled from the mirrored entry below
                        0.0
                    } else {
                        config.eval_unchecked(inputs[i].as_slice(), inputs[j].as_slice())
                    }
                })
                .collect()
        })
        .collect();
    Ok(Matrix::from_fn(
        n,
        n,
        |i, j| {
            if j >= i {
                rows[i][j]
            } else {
                rows[j][i]
            }
        },
    ))
}

/// Fitted kernel ridge surrogate. Immutable after [`fit`]; `alpha_weights`
/// may be called from many threads at once.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    inputs: Vec<Vector>,
    row_weights: Vec<f64>,
    config: KernelConfig,
    n_effective: f64,
    system: Matrix,
    lu: LU<f64, Dyn, Dyn>,
    condition: f64,
    jittered: bool,
}

/// Factors `(K' + N'λI)` for the given inputs and row weights.
pub fn fit(inputs: &[Vector], row_weights: &[f64], config: &KernelConfig) -> Result<SurrogateModel> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(ImitationError::Empty("training inputs"));
    }
    if inputs.len() != row_weights.len() {
        return Err(ImitationError::dim("row weights", inputs.len(), row_weights.len()));
    }
    if let Some(&w) = row_weights.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
        return Err(ImitationError::InvalidParameter {
            name: "row_weight",
            value: w,
            reason: "row weights must be positive and finite",
        });
    }

    let mut system = gram_matrix(inputs, config)?;
    for (mut row, &w) in system.row_iter_mut().zip(row_weights) {
        if w != 1.0 {
            row *= w;
        }
    }
    let n_effective: f64 = row_weights.iter().sum();
    let n = inputs.len();
    for i in 0..n {
        system[(i, i)] += n_effective * config.lambda;
    }

    let (system, lu, condition, jittered) = factor_with_jitter(system)?;
    Ok(SurrogateModel {
        inputs: inputs.to_vec(),
        row_weights: row_weights.to_vec(),
        config: *config,
        n_effective,
        system,
        lu,
        condition,
        jittered,
    })
}

/// Possibly jittered system, its LU factors, condition estimate, jitter flag.
pub(crate) type Factored = (Matrix, LU<f64, Dyn, Dyn>, f64, bool);

/// LU-factors `system`, adding diagonal jitter once if the condition estimate
/// exceeds the warning threshold. Shared with the temporal model.
pub(crate) fn factor_with_jitter(mut system: Matrix) -> Result<Factored> {
    let mut lu = system.clone().lu();
    let mut condition = condition_1norm(&system, &lu);
    let mut jittered = false;
    if condition > CONDITION_WARN {
        warn!(
            "kernel system condition estimate {condition:.3e} exceeds {CONDITION_WARN:.0e}; \
             adding {JITTER:.0e} diagonal jitter"
        );
        for i in 0..system.nrows() {
            system[(i, i)] += JITTER;
        }
        lu = system.clone().lu();
        condition = condition_1norm(&system, &lu);
        jittered = true;
    }
    if !(condition <= CONDITION_FAIL) {
        return Err(ImitationError::SingularSystem { condition });
    }
    Ok((system, lu, condition, jittered))
}

impl SurrogateModel {
    pub fn inputs(&self) -> &[Vector] {
        &self.inputs
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    /// Number of rows `N'` (training samples including via-points).
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// `N' = Σ row_weights`, the count multiplying `λ` in the regularizer.
    pub fn n_effective(&self) -> f64 {
        self.n_effective
    }

    /// The factored matrix `K' + N'λI` (including jitter, if any was added).
    pub fn system_matrix(&self) -> &Matrix {
        &self.system
    }

    /// 1-norm condition estimate of the factored system.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    /// `k'_x[n] = w_n k(x, x_n)`.
    pub fn weighted_kernel_vector(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.input_dim() {
            return Err(ImitationError::dim("query input", self.input_dim(), x.len()));
        }
        Ok(Vector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .zip(&self.row_weights)
                .map(|(xn, &w)| w * self.config.eval_unchecked(x, xn.as_slice())),
        ))
    }

    /// `α(x) = (K' + N'λI)⁻¹ k'_x`.
    pub fn alpha_weights(&self, x: &[f64]) -> Result<Vector> {
        let k = self.weighted_kernel_vector(x)?;
        self.lu.solve(&k).ok_or(ImitationError::SingularSystem {
            condition: self.condition,
        })
    }
}

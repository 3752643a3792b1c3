//! Probabilistic trajectory imitation as kernel-based structured prediction.
//!
//! Demonstrations are aggregated into a [`ProbabilisticTrajectory`] of Gaussian
//! samples. A kernel ridge surrogate ([`SurrogateModel`]) turns any query input
//! into a vector of weights over the training samples, and the weights are then
//! decoded into a Gaussian prediction:
//!
//! - [`euclidean`]: closed-form KL and reverse-KL estimators, superposition.
//! - [`temporal`]: joint position/velocity prediction with derivative kernels.
//! - [`riemannian`]: Fréchet-mean prediction by Riemannian gradient descent and
//!   parallel-transported covariances on the sphere and the circular cylinder.
//!
//! Via-point adaptation is the same mechanism everywhere: desired samples are
//! appended to the dataset and their kernel rows are scaled by a weight.

// `!(x > bound)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod euclidean;
pub mod kernel;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod riemannian;
pub mod temporal;

pub use data::{
    ingest_demonstrations, merge_via_points, GaussianPoint, ProbabilisticTrajectory, SuperpositionSet, ViaPointSet,
};
pub use error::{ImitationError, Result};
pub use euclidean::{
    predict, superpose_predict, CovarianceVariant, Divergence, ImitationMode, Prediction, PredictionFlags,
};
pub use kernel::{fit, gram_matrix, kernel_eval, KernelConfig, KernelKind, SurrogateModel};
pub use manifold::ManifoldSpec;
pub use metrics::{cov_error, mean_error, EvalReport};
pub use riemannian::{frechet_predict_mean, predict_manifold, RgdConfig, RgdInit};
pub use temporal::{phase_map, DesiredState, TemporalModel, TemporalSample};

/// Dense column vector used for inputs, means and tangent vectors.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for covariances and kernel systems.
pub type Matrix = nalgebra::DMatrix<f64>;

//! Probabilistic trajectories, via-point and superposition sets, ingestion of
//! raw demonstrations, and the JSON file formats.
//!
//! JSON layout of a trajectory:
//!
//! ```json
//! {"inputs": [[0.0], ...], "means": [[1.0, 2.0], ...],
//!  "covariances": [[[1.0, 0.0], [0.0, 1.0]], ...],
//!  "manifold": null}
//! ```
//!
//! `manifold` is `null`, `{"kind":"sphere","radius":r}`, `{"kind":"cylinder"}`
//! or `{"kind":"product","components":[...]}`. A via-point file has the same
//! fields plus `"weights"`; a superposition file is
//! `{"priorities": [...], "trajectories": [<trajectory>, ...]}`.
//!
//! Manifold means are stored in ambient coordinates and covariances act on
//! the ambient representation of the tangent space at the mean.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{asymmetry, is_spd};
use crate::manifold::ManifoldSpec;
use crate::{ImitationError, Matrix, Result, Vector};

/// Symmetry tolerance on stored covariances, relative to their Frobenius norm.
const SYMMETRY_TOL: f64 = 1e-12;
/// Largest input discrepancy tolerated between aligned demonstrations.
const GRID_TOL: f64 = 1e-9;
/// Update size at which the per-index Fréchet mean iteration stops.
const FRECHET_STEP_TOL: f64 = 1e-9;
const FRECHET_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPoint {
    pub x: Vector,
    pub mu: Vector,
    pub sigma: Matrix,
}

impl GaussianPoint {
    pub fn new(x: Vector, mu: Vector, sigma: Matrix) -> Self {
        Self { x, mu, sigma }
    }
}

/// Ordered Gaussian samples sharing input and output dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticTrajectory {
    inputs: Vec<Vector>,
    means: Vec<Vector>,
    covariances: Vec<Matrix>,
    manifold: Option<ManifoldSpec>,
}

impl ProbabilisticTrajectory {
    pub fn new(points: Vec<GaussianPoint>, manifold: Option<ManifoldSpec>) -> Result<Self> {
        let mut inputs = Vec::with_capacity(points.len());
        let mut means = Vec::with_capacity(points.len());
        let mut covariances = Vec::with_capacity(points.len());
        for p in points {
            inputs.push(p.x);
            means.push(p.mu);
            covariances.push(p.sigma);
        }
        Self::from_parts(inputs, means, covariances, manifold)
    }

    pub fn from_parts(
        inputs: Vec<Vector>,
        means: Vec<Vector>,
        covariances: Vec<Matrix>,
        manifold: Option<ManifoldSpec>,
    ) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(ImitationError::Empty("trajectory points"));
        }
        if means.len() != n {
            return Err(ImitationError::schema(
                "means",
                format!("expected {n} entries, found {}", means.len()),
            ));
        }
        if covariances.len() != n {
            return Err(ImitationError::schema(
                "covariances",
                format!("expected {n} entries, found {}", covariances.len()),
            ));
        }
        if let Some(spec) = &manifold {
            spec.validate()?;
        }
        let in_dim = inputs[0].len();
        let out_dim = means[0].len();
        if in_dim == 0 {
            return Err(ImitationError::schema("inputs[0]", "input vectors must be nonempty"));
        }
        if out_dim == 0 {
            return Err(ImitationError::schema("means[0]", "mean vectors must be nonempty"));
        }
        for i in 0..n {
            if inputs[i].len() != in_dim {
                return Err(ImitationError::schema(
                    format!("inputs[{i}]"),
                    format!("expected length {in_dim}, found {}", inputs[i].len()),
                ));
            }
            if means[i].len() != out_dim {
                return Err(ImitationError::schema(
                    format!("means[{i}]"),
                    format!("expected length {out_dim}, found {}", means[i].len()),
                ));
            }
            if covariances[i].shape() != (out_dim, out_dim) {
                return Err(ImitationError::schema(
                    format!("covariances[{i}]"),
                    format!("expected {out_dim}x{out_dim}, found {:?}", covariances[i].shape()),
                ));
            }
            if inputs[i]
                .iter()
                .chain(means[i].iter())
                .chain(covariances[i].iter())
                .any(|v| !v.is_finite())
            {
                return Err(ImitationError::schema(format!("[{i}]"), "non-finite value"));
            }
            if let Some(spec) = &manifold {
                spec.check_point(&means[i])
                    .map_err(|e| ImitationError::schema(format!("means[{i}]"), e.to_string()))?;
            }
            check_covariance(&covariances[i], means.get(i), manifold.as_ref())
                .map_err(|msg| ImitationError::schema(format!("covariances[{i}]"), msg))?;
        }
        Ok(Self {
            inputs,
            means,
            covariances,
            manifold,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    /// Ambient output dimension.
    pub fn output_dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn inputs(&self) -> &[Vector] {
        &self.inputs
    }

    pub fn means(&self) -> &[Vector] {
        &self.means
    }

    pub fn covariances(&self) -> &[Matrix] {
        &self.covariances
    }

    pub fn manifold(&self) -> Option<&ManifoldSpec> {
        self.manifold.as_ref()
    }

    pub fn point(&self, i: usize) -> GaussianPoint {
        GaussianPoint::new(
            self.inputs[i].clone(),
            self.means[i].clone(),
            self.covariances[i].clone(),
        )
    }

    pub fn points(&self) -> impl Iterator<Item = GaussianPoint> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// True when both trajectories have the same number of points and their
    /// inputs agree to within `1e-9`.
    pub fn same_grid(&self, other: &ProbabilisticTrajectory) -> bool {
        self.len() == other.len() && grids_match(&self.inputs, &other.inputs)
    }

    pub fn to_record(&self) -> TrajectoryRecord {
        TrajectoryRecord {
            inputs: self.inputs.iter().map(|v| v.as_slice().to_vec()).collect(),
            means: self.means.iter().map(|v| v.as_slice().to_vec()).collect(),
            covariances: self.covariances.iter().map(matrix_rows).collect(),
            manifold: self.manifold.clone(),
        }
    }

    pub fn from_record(rec: TrajectoryRecord) -> Result<Self> {
        let covariances = rec
            .covariances
            .iter()
            .enumerate()
            .map(|(i, c)| rows_to_matrix(c, &format!("covariances[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(
            rec.inputs.into_iter().map(Vector::from_vec).collect(),
            rec.means.into_iter().map(Vector::from_vec).collect(),
            covariances,
            rec.manifold,
        )
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

fn check_covariance(
    sigma: &Matrix,
    mean: Option<&Vector>,
    manifold: Option<&ManifoldSpec>,
) -> std::result::Result<(), String> {
    if asymmetry(sigma) > SYMMETRY_TOL {
        return Err(format!("not symmetric (relative asymmetry {:.3e})", asymmetry(sigma)));
    }
    let restricted = match (manifold, mean) {
        (Some(spec), Some(mu)) => {
            let b = spec.tangent_basis(mu);
            b.transpose() * sigma * b
        }
        _ => sigma.clone(),
    };
    if !is_spd(&restricted) {
        return Err("not positive definite".into());
    }
    Ok(())
}

fn grids_match(a: &[Vector], b: &[Vector]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| (p - q).abs() <= GRID_TOL))
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], field: &str) -> Result<Matrix> {
    let n = rows.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(ImitationError::schema(
                format!("{field}[{i}]"),
                format!("expected {n} columns, found {}", r.len()),
            ));
        }
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Desired samples appended to a dataset, each with a row weight `w_j > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViaPointSet {
    points: Vec<GaussianPoint>,
    weights: Vec<f64>,
}

impl ViaPointSet {
    pub fn new(points: Vec<GaussianPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(ImitationError::schema(
                "weights",
                format!("expected {} entries, found {}", points.len(), weights.len()),
            ));
        }
        for (j, &w) in weights.iter().enumerate() {
            if !(w > 1.0 && w.is_finite()) {
                return Err(ImitationError::schema(
                    format!("weights[{j}]"),
                    format!("must be finite and > 1, got {w}"),
                ));
            }
        }
        Ok(Self { points, weights })
    }

    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn points(&self) -> &[GaussianPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_record(&self, manifold: Option<ManifoldSpec>) -> ViaPointRecord {
        ViaPointRecord {
            inputs: self.points.iter().map(|p| p.x.as_slice().to_vec()).collect(),
            means: self.points.iter().map(|p| p.mu.as_slice().to_vec()).collect(),
            covariances: self.points.iter().map(|p| matrix_rows(&p.sigma)).collect(),
            manifold,
            weights: self.weights.clone(),
        }
    }

    /// Builds the set; the optional manifold is validated against but not stored.
    pub fn from_record(rec: ViaPointRecord) -> Result<(Self, Option<ManifoldSpec>)> {
        let j = rec.inputs.len();
        if rec.means.len() != j {
            return Err(ImitationError::schema(
                "means",
                format!("expected {j} entries, found {}", rec.means.len()),
            ));
        }
        if rec.covariances.len() != j {
            return Err(ImitationError::schema(
                "covariances",
                format!("expected {j} entries, found {}", rec.covariances.len()),
            ));
        }
        let mut points = Vec::with_capacity(j);
        for (i, ((x, mu), c)) in rec.inputs.into_iter().zip(rec.means).zip(&rec.covariances).enumerate() {
            let sigma = rows_to_matrix(c, &format!("covariances[{i}]"))?;
            if sigma.nrows() != mu.len() {
                return Err(ImitationError::schema(
                    format!("covariances[{i}]"),
                    format!("expected {0}x{0}, found {1}x{1}", mu.len(), sigma.nrows()),
                ));
            }
            let mu = Vector::from_vec(mu);
            if let Some(spec) = &rec.manifold {
                spec.check_point(&mu)
                    .map_err(|e| ImitationError::schema(format!("means[{i}]"), e.to_string()))?;
            }
            check_covariance(&sigma, Some(&mu), rec.manifold.as_ref())
                .map_err(|msg| ImitationError::schema(format!("covariances[{i}]"), msg))?;
            points.push(GaussianPoint::new(Vector::from_vec(x), mu, sigma));
        }
        Ok((Self::new(points, rec.weights)?, rec.manifold))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(Self::from_record(serde_json::from_str(s)?)?.0)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>, manifold: Option<ManifoldSpec>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_record(manifold))?)?;
        Ok(())
    }
}

/// `H` trajectories over one input grid with priorities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionSet {
    trajectories: Vec<ProbabilisticTrajectory>,
    priorities: Vec<f64>,
}

impl SuperpositionSet {
    pub fn new(trajectories: Vec<ProbabilisticTrajectory>, priorities: Vec<f64>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(ImitationError::Empty("superposition trajectories"));
        }
        if trajectories.len() != priorities.len() {
            return Err(ImitationError::schema(
                "priorities",
                format!("expected {} entries, found {}", trajectories.len(), priorities.len()),
            ));
        }
        for (h, &w) in priorities.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(ImitationError::schema(
                    format!("priorities[{h}]"),
                    format!("must be finite and >= 0, got {w}"),
                ));
            }
        }
        let sum: f64 = priorities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ImitationError::schema(
                "priorities",
                format!("must sum to 1, sum is {sum}"),
            ));
        }
        let first = &trajectories[0];
        for (h, t) in trajectories.iter().enumerate().skip(1) {
            if !first.same_grid(t) {
                return Err(ImitationError::GridMismatch(h));
            }
            if t.output_dim() != first.output_dim() || t.manifold() != first.manifold() {
                return Err(ImitationError::dim(
                    format!("trajectories[{h}] output"),
                    first.output_dim(),
                    t.output_dim(),
                ));
            }
        }
        Ok(Self {
            trajectories,
            priorities,
        })
    }

    pub fn trajectories(&self) -> &[ProbabilisticTrajectory] {
        &self.trajectories
    }

    pub fn priorities(&self) -> &[f64] {
        &self.priorities
    }

    pub fn to_record(&self) -> SuperpositionRecord {
        SuperpositionRecord {
            priorities: self.priorities.clone(),
            trajectories: self.trajectories.iter().map(|t| t.to_record()).collect(),
        }
    }

    pub fn from_record(rec: SuperpositionRecord) -> Result<Self> {
        let trajectories = rec
            .trajectories
            .into_iter()
            .enumerate()
            .map(|(h, t)| {
                ProbabilisticTrajectory::from_record(t).map_err(|e| match e {
                    ImitationError::Schema { field, message } => {
                        ImitationError::schema(format!("trajectories[{h}].{field}"), message)
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(trajectories, rec.priorities)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_record())?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub inputs: Vec<Vec<f64>>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub manifold: Option<ManifoldSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViaPointRecord {
    pub inputs: Vec<Vec<f64>>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub manifold: Option<ManifoldSpec>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperpositionRecord {
    pub priorities: Vec<f64>,
    pub trajectories: Vec<TrajectoryRecord>,
}

/// Default covariance jitter `1e-8 · s²`, `s` the mean absolute output value
/// (taken as 1 when every output is zero).
pub fn default_epsilon<'a>(outputs: impl IntoIterator<Item = &'a Vector>) -> f64 {
    let (sum, count) = outputs
        .into_iter()
        .flat_map(|v| v.iter())
        .fold((0.0, 0usize), |(s, c), v| (s + v.abs(), c + 1));
    let scale = if count == 0 || sum == 0.0 {
        1.0
    } else {
        sum / count as f64
    };
    1e-8 * scale * scale
}

/// Aggregates `M ≥ 2` index-aligned demonstrations of `(x, y)` pairs into a
/// trajectory of per-index sample means and covariances (divisor `M − 1`)
/// plus `epsilon · I`.
///
/// With a manifold, the mean is the per-index Fréchet mean and the
/// covariance is built from `Log_μ(y^m)` in the tangent space at the mean;
/// the jitter is added on the tangent projector instead of the identity.
pub fn ingest_demonstrations(
    demos: &[Vec<(Vector, Vector)>],
    epsilon: Option<f64>,
    manifold: Option<ManifoldSpec>,
) -> Result<ProbabilisticTrajectory> {
    let m = demos.len();
    if m < 2 {
        return Err(ImitationError::TooFewDemonstrations(m));
    }
    let n = demos[0].len();
    if n == 0 {
        return Err(ImitationError::Empty("demonstration samples"));
    }
    let in_dim = demos[0][0].0.len();
    let out_dim = demos[0][0].1.len();
    for (d, demo) in demos.iter().enumerate() {
        if demo.len() != n {
            return Err(ImitationError::Misaligned {
                demo: d,
                index: demo.len().min(n),
                reason: "demonstration length differs",
            });
        }
        for (i, (x, y)) in demo.iter().enumerate() {
            if x.len() != in_dim || y.len() != out_dim {
                return Err(ImitationError::Misaligned {
                    demo: d,
                    index: i,
                    reason: "sample dimension differs",
                });
            }
            if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
                return Err(ImitationError::Misaligned {
                    demo: d,
                    index: i,
                    reason: "non-finite value",
                });
            }
            let x0 = &demos[0][i].0;
            if x.iter().zip(x0.iter()).any(|(a, b)| (a - b).abs() > GRID_TOL) {
                return Err(ImitationError::Misaligned {
                    demo: d,
                    index: i,
                    reason: "input grid differs from the first demonstration",
                });
            }
        }
    }
    if let Some(spec) = &manifold {
        spec.validate()?;
        if spec.ambient_dim() != out_dim {
            return Err(ImitationError::dim(
                "demonstration outputs",
                spec.ambient_dim(),
                out_dim,
            ));
        }
    }
    let eps = match epsilon {
        Some(e) if e >= 0.0 && e.is_finite() => e,
        Some(e) => {
            return Err(ImitationError::InvalidParameter {
                name: "epsilon",
                value: e,
                reason: "must be finite and non-negative",
            })
        }
        None => default_epsilon(demos.iter().flat_map(|d| d.iter().map(|(_, y)| y))),
    };

    let mut inputs = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    let mut covariances = Vec::with_capacity(n);
    for i in 0..n {
        let ys: Vec<&Vector> = demos.iter().map(|d| &d[i].1).collect();
        let (mu, cov) = match &manifold {
            None => euclidean_moments(&ys, eps),
            Some(spec) => manifold_moments(spec, &ys, eps).map_err(|e| match e {
                ImitationError::OffManifold { .. } | ImitationError::CutLocus { .. } => {
                    ImitationError::schema(format!("demonstration outputs at index {i}"), e.to_string())
                }
                other => other,
            })?,
        };
        inputs.push(demos[0][i].0.clone());
        means.push(mu);
        covariances.push(cov);
    }
    ProbabilisticTrajectory::from_parts(inputs, means, covariances, manifold)
}

fn euclidean_moments(ys: &[&Vector], eps: f64) -> (Vector, Matrix) {
    let m = ys.len() as f64;
    let dim = ys[0].len();
    let mu = ys.iter().fold(Vector::zeros(dim), |acc, y| acc + *y) / m;
    let mut cov = Matrix::zeros(dim, dim);
    for y in ys {
        let d = *y - &mu;
        cov += &d * d.transpose();
    }
    cov /= m - 1.0;
    for k in 0..dim {
        cov[(k, k)] += eps;
    }
    (mu, crate::linalg::symmetrize(&cov))
}

fn manifold_moments(spec: &ManifoldSpec, ys: &[&Vector], eps: f64) -> Result<(Vector, Matrix)> {
    for y in ys {
        spec.check_point(y)?;
    }
    let m = ys.len() as f64;
    let dim = ys[0].len();
    let mut mu = (*ys[0]).clone();
    for _ in 0..FRECHET_MAX_ITER {
        let mut step = Vector::zeros(dim);
        for y in ys {
            step += spec.log_unchecked(&mu, y)?;
        }
        step /= m;
        mu = spec.retract_unchecked(&mu, &step)?;
        if step.norm() < FRECHET_STEP_TOL {
            break;
        }
    }
    let mut cov = Matrix::zeros(dim, dim);
    for y in ys {
        let l = spec.log_unchecked(&mu, y)?;
        cov += &l * l.transpose();
    }
    cov /= m - 1.0;
    let basis = spec.tangent_basis(&mu);
    cov += (&basis * basis.transpose()) * eps;
    Ok((mu, crate::linalg::symmetrize(&cov)))
}

/// Concatenates a via-point set onto a trajectory. Returns the augmented
/// trajectory and its row weights (1 for the original samples, `w_j` for the
/// via-points); the weights sum to `N' = N + Σ w_j`.
pub fn merge_via_points(
    base: &ProbabilisticTrajectory,
    via: &ViaPointSet,
) -> Result<(ProbabilisticTrajectory, Vec<f64>)> {
    let mut inputs = base.inputs.clone();
    let mut means = base.means.clone();
    let mut covariances = base.covariances.clone();
    let mut weights = vec![1.0; base.len()];
    for (j, (p, &w)) in via.points().iter().zip(via.weights()).enumerate() {
        if p.x.len() != base.input_dim() {
            return Err(ImitationError::dim(
                format!("via-point {j} input"),
                base.input_dim(),
                p.x.len(),
            ));
        }
        if p.mu.len() != base.output_dim() {
            return Err(ImitationError::dim(
                format!("via-point {j} mean"),
                base.output_dim(),
                p.mu.len(),
            ));
        }
        inputs.push(p.x.clone());
        means.push(p.mu.clone());
        covariances.push(p.sigma.clone());
        weights.push(w);
    }
    let merged = ProbabilisticTrajectory::from_parts(inputs, means, covariances, base.manifold.clone())?;
    Ok((merged, weights))
}

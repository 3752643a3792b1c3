//! Synthetic workloads shared by the benchmarks.

use imitate_core::{ManifoldSpec, Matrix, ProbabilisticTrajectory, TemporalSample, Vector};

fn times(n: usize, span: f64) -> Vec<f64> {
    (0..n).map(|i| span * i as f64 / (n - 1).max(1) as f64).collect()
}

/// Two-dimensional sinusoid over `[0, 10]` with constant covariances.
pub fn euclidean_trajectory(n: usize) -> ProbabilisticTrajectory {
    let ts = times(n, 10.0);
    ProbabilisticTrajectory::from_parts(
        ts.iter().map(|&t| Vector::from_element(1, t)).collect(),
        ts.iter()
            .map(|&t| Vector::from_vec(vec![t.sin() + 0.3 * (2.1 * t).cos(), (0.7 * t).cos()]))
            .collect(),
        vec![Matrix::identity(2, 2) * 0.01; n],
        None,
    )
    .expect("valid synthetic trajectory")
}

pub fn temporal_samples(n: usize) -> Vec<TemporalSample> {
    times(n, 10.0)
        .into_iter()
        .map(|t| TemporalSample {
            t,
            position: Vector::from_vec(vec![t.sin(), (0.5 * t).cos()]),
            velocity: Vector::from_vec(vec![t.cos(), -0.5 * (0.5 * t).sin()]),
        })
        .collect()
}

/// Arc on the unit sphere over `[0, 1]` with tangent covariances.
pub fn sphere_trajectory(n: usize) -> ProbabilisticTrajectory {
    let spec = ManifoldSpec::sphere(1.0).expect("unit sphere");
    let ts = times(n, 1.0);
    let means: Vec<Vector> = ts
        .iter()
        .map(|&t| {
            let (a, b) = (2.0 * t, 0.5 + t);
            Vector::from_vec(vec![b.sin() * a.cos(), b.sin() * a.sin(), b.cos()])
        })
        .collect();
    let covs = means
        .iter()
        .map(|m| {
            let b = spec.tangent_basis(m);
            &b * b.transpose() * 0.01
        })
        .collect();
    ProbabilisticTrajectory::from_parts(
        ts.iter().map(|&t| Vector::from_element(1, t)).collect(),
        means,
        covs,
        Some(spec),
    )
    .expect("valid sphere trajectory")
}

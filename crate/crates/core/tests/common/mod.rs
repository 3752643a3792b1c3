//! Synthetic demonstrations shared by the integration tests.
#![allow(dead_code)]

use imitate_core::{ingest_demonstrations, ManifoldSpec, Matrix, ProbabilisticTrajectory, TemporalSample, Vector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Per-demonstration perturbation of amplitudes and phases.
#[derive(Debug, Clone, Copy)]
pub struct Perturbation {
    pub amp: [f64; 2],
    pub phase: [f64; 2],
}

impl Perturbation {
    pub const NONE: Perturbation = Perturbation {
        amp: [0.0; 2],
        phase: [0.0; 2],
    };

    pub fn random(rng: &mut StdRng, scale: f64) -> Self {
        Perturbation {
            amp: [rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)],
            phase: [rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)],
        }
    }
}

/// Planar curve built from two sinusoids per coordinate.
pub fn sinusoid(t: f64, p: Perturbation) -> Vector {
    let x = (1.0 + p.amp[0]) * (0.6 * t + p.phase[0]).sin() + 0.5 * (1.3 * t).sin();
    let y = (1.0 + p.amp[1]) * (0.4 * t + p.phase[1]).cos() + 0.3 * (0.9 * t).sin();
    v(&[x, y])
}

/// Analytic time derivative of [`sinusoid`].
pub fn sinusoid_velocity(t: f64, p: Perturbation) -> Vector {
    let dx = 0.6 * (1.0 + p.amp[0]) * (0.6 * t + p.phase[0]).cos() + 0.65 * (1.3 * t).cos();
    let dy = -0.4 * (1.0 + p.amp[1]) * (0.4 * t + p.phase[1]).sin() + 0.27 * (0.9 * t).cos();
    v(&[dx, dy])
}

/// `m` perturbed demonstrations of the planar curve on `n` samples of `[0, span]`.
pub fn sinusoid_demos(m: usize, n: usize, span: f64, seed: u64) -> Vec<Vec<(Vector, Vector)>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let times = linspace(0.0, span, n);
    (0..m)
        .map(|_| {
            let p = Perturbation::random(&mut rng, 0.05);
            times.iter().map(|&t| (v(&[t]), sinusoid(t, p))).collect()
        })
        .collect()
}

pub fn sinusoid_trajectory(m: usize, n: usize, span: f64, seed: u64) -> ProbabilisticTrajectory {
    ingest_demonstrations(&sinusoid_demos(m, n, span, seed), None, None).unwrap()
}

pub fn temporal_samples(n: usize, span: f64) -> Vec<TemporalSample> {
    linspace(0.0, span, n)
        .into_iter()
        .map(|t| TemporalSample {
            t,
            position: sinusoid(t, Perturbation::NONE),
            velocity: sinusoid_velocity(t, Perturbation::NONE),
        })
        .collect()
}

pub fn arc_length(points: &[Vector]) -> f64 {
    points.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// Largest coordinate-wise range over a set of points.
pub fn output_range(points: &[Vector]) -> f64 {
    let dim = points[0].len();
    (0..dim)
        .map(|k| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
                (l.min(p[k]), h.max(p[k]))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// U-shaped curve on the unit sphere, `t ∈ [0, 1]`.
pub fn sphere_curve(t: f64, p: Perturbation) -> Vector {
    let polar = 0.8 + (0.6 + p.amp[0]) * (std::f64::consts::PI * t).sin() + p.phase[0];
    let azimuth = -std::f64::consts::FRAC_PI_2 + (1.6 + p.amp[1]) * (t - 0.5) + p.phase[1];
    v(&[polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()])
}

pub fn sphere_trajectory(m: usize, n: usize, seed: u64) -> ProbabilisticTrajectory {
    let mut rng = StdRng::seed_from_u64(seed);
    let times = linspace(0.0, 1.0, n);
    let demos: Vec<Vec<(Vector, Vector)>> = (0..m)
        .map(|_| {
            let p = Perturbation::random(&mut rng, 0.05);
            times.iter().map(|&t| (v(&[t]), sphere_curve(t, p))).collect()
        })
        .collect();
    ingest_demonstrations(&demos, None, Some(ManifoldSpec::sphere(1.0).unwrap())).unwrap()
}

/// Point on the cylinder from `(radius, height, azimuth)`.
pub fn cylinder_point(radius: f64, height: f64, azimuth: f64) -> Vector {
    v(&[radius, height, azimuth.cos(), azimuth.sin()])
}

pub fn cylinder_trajectory(m: usize, n: usize, seed: u64) -> ProbabilisticTrajectory {
    let mut rng = StdRng::seed_from_u64(seed);
    let times = linspace(0.0, 1.0, n);
    let demos: Vec<Vec<(Vector, Vector)>> = (0..m)
        .map(|_| {
            let p = Perturbation::random(&mut rng, 0.03);
            times
                .iter()
                .map(|&t| {
                    let pt = cylinder_point(
                        1.5 + 0.1 * (3.0 * t).sin() + p.amp[0],
                        t + p.phase[0],
                        0.4 + 1.2 * t + p.amp[1],
                    );
                    (v(&[t]), pt)
                })
                .collect()
        })
        .collect();
    ingest_demonstrations(&demos, None, Some(ManifoldSpec::Cylinder)).unwrap()
}

/// Random SPD matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut StdRng, dim: usize, lo: f64, hi: f64) -> Matrix {
    let a = Matrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let q = a.qr().q();
    let d = Vector::from_fn(dim, |_, _| rng.gen_range(lo..hi));
    let m = &q * Matrix::from_diagonal(&d) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Uniform random point on the sphere of radius `r`.
pub fn random_sphere_point(rng: &mut StdRng, r: f64) -> Vector {
    loop {
        let p = v(&[
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ]);
        let n = p.norm();
        if n > 0.1 && n <= 1.0 {
            return p * (r / n);
        }
    }
}

pub fn random_tangent(rng: &mut StdRng, spec: &ManifoldSpec, base: &Vector, scale: f64) -> Vector {
    let raw = Vector::from_fn(base.len(), |_, _| rng.gen_range(-scale..scale));
    spec.project_tangent(base, &raw)
}

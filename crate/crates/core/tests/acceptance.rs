//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::Instant;

use common::*;
use imitate_core::euclidean::{predict_cov_kl, predict_cov_rkl, predict_mean_kl, predict_mean_rkl};
use imitate_core::linalg::is_spd;
use imitate_core::metrics::spd_distance;
use imitate_core::riemannian::{
    frechet_predict_mean_observed, manifold_covariance, transported_covariance, ManifoldImitator,
};
use imitate_core::temporal::fit_temporal;
use imitate_core::{
    cov_error, fit, frechet_predict_mean, mean_error, merge_via_points, predict, CovarianceVariant, DesiredState,
    GaussianPoint, ImitationMode, KernelConfig, ManifoldSpec, Matrix, ProbabilisticTrajectory, RgdConfig, Vector,
    ViaPointSet,
};
use nalgebra::linalg::SymmetricEigen;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn check(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 1. Near-interpolation of the training means.
fn interpolation() -> Outcome {
    let traj = sinusoid_trajectory(5, 200, 10.0, 11);
    let cfg = KernelConfig::gaussian(6.0, 1e-12).unwrap();
    let start = Instant::now();
    let model = fit(traj.inputs(), &vec![1.0; traj.len()], &cfg).map_err(|e| e.to_string())?;
    let mode = ImitationMode::default();
    let preds: Vec<Vector> = traj
        .inputs()
        .iter()
        .map(|x| predict(&model, &traj, mode, x.as_slice()).map(|p| p.mu))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let c_m = mean_error(&preds, traj.means()).unwrap();
    let bound = 1e-4 * arc_length(traj.means());
    check(
        c_m <= bound && elapsed < 1.0,
        format!("C_m = {c_m:.3e} (bound {bound:.3e}), runtime {elapsed:.3} s (bound 1 s)"),
    )
}

/// 2. Reverse KL follows the low-variance trajectory more closely than KL.
fn kl_vs_rkl() -> Outcome {
    let times = linspace(0.0, 10.0, 100);
    let base = |t: f64| (0.5 * t).sin();
    let in_interval = |t: f64| (4.0..=6.0).contains(&t);
    let mut inputs = Vec::new();
    let mut means = Vec::new();
    let mut covs = Vec::new();
    for &t in &times {
        inputs.push(v(&[t]));
        means.push(v(&[base(t) + 0.5]));
        covs.push(Matrix::from_element(1, 1, if in_interval(t) { 1.0 } else { 0.01 }));
    }
    for &t in &times {
        inputs.push(v(&[t]));
        means.push(v(&[base(t) - 0.5]));
        covs.push(Matrix::from_element(1, 1, 0.01));
    }
    let data = ProbabilisticTrajectory::from_parts(inputs, means, covs, None).unwrap();
    let model = fit(data.inputs(), &vec![1.0; data.len()], &KernelConfig::default()).unwrap();
    let grid = linspace(4.0, 6.0, 41);
    let mut worst_margin = f64::INFINITY;
    for &t in &grid {
        let kl = predict(&model, &data, ImitationMode::default(), &[t]).unwrap().mu[0];
        let rkl = predict(&model, &data, ImitationMode::rkl(), &[t]).unwrap().mu[0];
        let b = base(t) - 0.5;
        worst_margin = worst_margin.min((kl - b).abs() - (rkl - b).abs());
    }
    check(
        worst_margin > 0.0,
        format!("min over 41 grid points of |KL - B| - |RKL - B| = {worst_margin:.4}"),
    )
}

/// 3. Via-point adaptation is accurate locally and negligible far away.
fn via_point_adaptation() -> Outcome {
    let traj = sinusoid_trajectory(5, 200, 10.0, 23);
    let cfg = KernelConfig::default();
    let mode = ImitationMode::default();
    let base_model = fit(traj.inputs(), &vec![1.0; traj.len()], &cfg).unwrap();
    let range = output_range(traj.means());
    let t_v = 4.03;
    let before = predict(&base_model, &traj, mode, &[t_v]).unwrap().mu;
    let desired = &before + v(&[0.3 * range, -0.2 * range]);
    let via = ViaPointSet::new(
        vec![GaussianPoint::new(
            v(&[t_v]),
            desired.clone(),
            Matrix::identity(2, 2) * 1e-6,
        )],
        vec![1e4],
    )
    .unwrap();
    let (merged, weights) = merge_via_points(&traj, &via).unwrap();
    let adapted = fit(merged.inputs(), &weights, &cfg).unwrap();
    let at_via = predict(&adapted, &merged, mode, &[t_v]).unwrap().mu;
    let via_err = (&at_via - &desired).norm() / range;
    let mut far_dev: f64 = 0.0;
    for t in linspace(0.0, 10.0, 201) {
        if (t - t_v).abs() >= 0.2 * 10.0 {
            let a = predict(&adapted, &merged, mode, &[t]).unwrap().mu;
            let b = predict(&base_model, &traj, mode, &[t]).unwrap().mu;
            far_dev = far_dev.max((a - b).norm() / range);
        }
    }
    check(
        via_err <= 1e-2 && far_dev < 0.05,
        format!("via error {via_err:.3e} x range (bound 1e-2), far deviation {far_dev:.3e} x range (bound 5e-2)"),
    )
}

/// Largest `|vel − fd| / max(‖vel‖, 1)` over random times.
fn velocity_identity_error(model: &imitate_core::TemporalModel, rng: &mut StdRng, span: f64) -> f64 {
    let delta = model.delta();
    (0..100)
        .map(|_| {
            let t = rng.gen_range(0.0..span);
            let (_, vel) = model.predict_pos_vel(t);
            let (p_plus, _) = model.predict_pos_vel(t + delta);
            let (p_minus, _) = model.predict_pos_vel(t - delta);
            let fd = (p_plus - p_minus) / (2.0 * delta);
            (&vel - fd).norm() / vel.norm().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// 4. The velocity is the central difference of the position.
fn velocity_identity() -> Outcome {
    let span = 10.0;
    let samples = temporal_samples(100, span);
    let model = fit_temporal(&samples, &KernelConfig::default(), None).unwrap();
    let mut rng = StdRng::seed_from_u64(4);
    let plain = velocity_identity_error(&model, &mut rng, span);
    let adapted = model
        .adapt_temporal(&[DesiredState {
            t: 3.3,
            position: Some(v(&[0.4, -0.6])),
            velocity: Some(v(&[-0.25, -0.3])),
            weight: 1e4,
        }])
        .unwrap();
    let after = velocity_identity_error(&adapted, &mut rng, span);
    check(
        plain <= 1e-8 && after <= 1e-8,
        format!("max relative error {plain:.3e} before, {after:.3e} after via-velocity adaptation (bound 1e-8)"),
    )
}

/// 5. Fréchet mean on the sphere.
fn sphere_frechet_mean() -> Outcome {
    let sphere = ManifoldSpec::sphere(1.0).unwrap();
    let anchors = vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])];
    let midpoint = v(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
    let cfg = RgdConfig {
        max_iter: 500,
        ..RgdConfig::default()
    };
    let mut reached = None;
    let r = frechet_predict_mean_observed(&sphere, &[1.0, 1.0], &anchors, &cfg, |i, mu| {
        if reached.is_none() && (mu - &midpoint).norm() <= 1e-6 {
            reached = Some(i);
        }
    })
    .unwrap();
    let mid_err = (&r.point - &midpoint).norm();

    let mut rng = StdRng::seed_from_u64(5);
    let anchors: Vec<Vector> = (0..3)
        .map(|_| {
            let mut p = random_sphere_point(&mut rng, 1.0);
            p[2] = p[2].abs();
            p
        })
        .collect();
    let alpha: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..1.0)).collect();
    let mu = frechet_predict_mean(&sphere, &alpha, &anchors, &RgdConfig::default())
        .unwrap()
        .point;
    let f_mu = sphere.weighted_dist2(&alpha, &anchors, &mu).unwrap();
    let (n_polar, n_azimuth) = (200, 400);
    let mut f_grid = f64::INFINITY;
    for i in 0..n_polar {
        let polar = PI * i as f64 / (n_polar - 1) as f64;
        for j in 0..n_azimuth {
            let azimuth = 2.0 * PI * j as f64 / n_azimuth as f64;
            let q = v(&[polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()]);
            f_grid = f_grid.min(sphere.weighted_dist2(&alpha, &anchors, &q).unwrap());
        }
    }
    // F is Lipschitz with constant 2π Σα; every point is within half a cell of a node
    let cell = 0.5 * (PI / (n_polar - 1) as f64 + 2.0 * PI / n_azimuth as f64);
    let resolution = 2.0 * PI * alpha.iter().sum::<f64>() * cell;
    check(
        mid_err <= 1e-6 && reached.is_some() && f_mu <= f_grid + resolution,
        format!(
            "midpoint error {mid_err:.3e} after {} iterations (within 1e-6 at iteration {:?}); \
             F(mu) = {f_mu:.6}, grid min = {f_grid:.6}, resolution bound {resolution:.2e}",
            r.iterations, reached
        ),
    )
}

fn gradient_fd_error(spec: &ManifoldSpec, rng: &mut StdRng, anchors: &[Vector], mu: &Vector, alpha: &[f64]) -> f64 {
    let grad = spec.riemannian_grad_weighted_dist2(alpha, anchors, mu).unwrap();
    let h = 1e-5;
    (0..20)
        .map(|_| {
            let dir = random_tangent(rng, spec, mu, 1.0);
            let plus = spec.retract(mu, &(&dir * h)).unwrap();
            let minus = spec.retract(mu, &(&dir * -h)).unwrap();
            let fd = (spec.weighted_dist2(alpha, anchors, &plus).unwrap()
                - spec.weighted_dist2(alpha, anchors, &minus).unwrap())
                / (2.0 * h);
            let analytic = grad.dot(&dir);
            (fd - analytic).abs() / analytic.abs()
        })
        .fold(0.0, f64::max)
}

/// 6. Riemannian gradient against central finite differences.
fn gradient_check() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let sphere = ManifoldSpec::sphere(1.7).unwrap();
    let mu = random_sphere_point(&mut rng, 1.7);
    let anchors: Vec<Vector> = (0..4)
        .map(|_| {
            let t = random_tangent(&mut rng, &sphere, &mu, 1.0);
            sphere.retract(&mu, &t).unwrap()
        })
        .collect();
    let alpha = [0.4, 0.3, -0.1, 0.6];
    let sphere_err = gradient_fd_error(&sphere, &mut rng, &anchors, &mu, &alpha);

    let cyl = ManifoldSpec::Cylinder;
    let mu = cylinder_point(1.2, 0.3, 0.5);
    let anchors: Vec<Vector> = (0..4)
        .map(|_| {
            cylinder_point(
                rng.gen_range(1.0..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.5..2.5),
            )
        })
        .collect();
    let cyl_err = gradient_fd_error(&cyl, &mut rng, &anchors, &mu, &alpha);
    check(
        sphere_err <= 1e-5 && cyl_err <= 1e-5,
        format!("max relative error: sphere {sphere_err:.3e}, cylinder {cyl_err:.3e} (bound 1e-5)"),
    )
}

/// 7. Manifold predictions stay on the manifold and honor a via-point.
fn manifold_outputs() -> Outcome {
    let traj = sphere_trajectory(4, 100, 7);
    let spec = traj.manifold().unwrap().clone();
    let cfg = KernelConfig::default();
    let rgd = RgdConfig::default();
    let model = fit(traj.inputs(), &vec![1.0; traj.len()], &cfg).unwrap();
    let imitator = ManifoldImitator::new(&model, &traj, rgd, CovarianceVariant::Approximate).unwrap();
    let mut worst_membership: f64 = 0.0;
    for t in linspace(0.0, 1.0, 200) {
        let p = imitator.predict(&[t]).map_err(|e| e.to_string())?;
        worst_membership = worst_membership.max(spec.membership_error(&p.mu));
    }

    let t_v = 0.35;
    let target = spec.project_point(&v(&[-0.199, -0.98, 0.0])).unwrap();
    let basis = spec.tangent_basis(&target);
    let via = ViaPointSet::new(
        vec![GaussianPoint::new(
            v(&[t_v]),
            target.clone(),
            &basis * basis.transpose() * 1e-6,
        )],
        vec![1e4],
    )
    .unwrap();
    let (merged, weights) = merge_via_points(&traj, &via).unwrap();
    let adapted = fit(merged.inputs(), &weights, &cfg).unwrap();
    let imitator = ManifoldImitator::new(&adapted, &merged, rgd, CovarianceVariant::Approximate).unwrap();
    let at_via = imitator.predict(&[t_v]).map_err(|e| e.to_string())?;
    let via_dist = spec.dist(&at_via.mu, &target).unwrap();
    check(
        worst_membership <= 1e-9 && via_dist <= 1e-3,
        format!("worst membership deviation {worst_membership:.3e} (bound 1e-9), via-point distance {via_dist:.3e} (bound 1e-3)"),
    )
}

fn sorted_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// 8. Transport of covariances is an isometry.
fn transport_isometry() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let mut worst_spec: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for k in 0..100 {
        let (spec, from, to) = if k % 2 == 0 {
            let r = rng.gen_range(0.5..3.0);
            let spec = ManifoldSpec::sphere(r).unwrap();
            let from = random_sphere_point(&mut rng, r);
            let t = random_tangent(&mut rng, &spec, &from, 1.5 * r);
            let to = spec.retract(&from, &t).unwrap();
            (spec, from, to)
        } else {
            let from = cylinder_point(
                rng.gen_range(1.0..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-3.0..3.0),
            );
            let to = cylinder_point(
                rng.gen_range(1.0..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-3.0..3.0),
            );
            (ManifoldSpec::Cylinder, from, to)
        };
        let b = spec.tangent_basis(&from);
        let d = b.ncols();
        let sigma = &b * random_spd(&mut rng, d, 0.01, 2.0) * b.transpose();
        let moved = transported_covariance(&spec, &sigma, &from, &to).unwrap();
        let (e0, e1) = (sorted_eigenvalues(&sigma), sorted_eigenvalues(&moved));
        let scale = e0.last().copied().unwrap_or(1.0);
        worst_spec = worst_spec.max(e0.iter().zip(&e1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale);
        worst_trace = worst_trace.max((sigma.trace() - moved.trace()).abs() / scale);
    }
    check(
        worst_spec <= 1e-9 && worst_trace <= 1e-9,
        format!("max spectrum deviation {worst_spec:.3e}, trace deviation {worst_trace:.3e} (bound 1e-9)"),
    )
}

/// 9. Positive weights keep every predicted covariance SPD.
fn spd_closure() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    let mut failures = 0;
    let mut total = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..6);
        let dim = rng.gen_range(1..4);
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let means: Vec<Vector> = (0..n)
            .map(|_| Vector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0)))
            .collect();
        let covs: Vec<Matrix> = (0..n).map(|_| random_spd(&mut rng, dim, 1e-3, 3.0)).collect();
        let mu = predict_mean_kl(&alpha, &means).unwrap();
        for variant in [CovarianceVariant::Exact, CovarianceVariant::Approximate] {
            total += 1;
            failures += usize::from(!is_spd(&predict_cov_kl(&alpha, &means, &covs, &mu, variant).unwrap()));
        }
        total += 1;
        failures += usize::from(!is_spd(&predict_cov_rkl(&alpha, &covs).unwrap()));
    }
    let sphere = ManifoldSpec::sphere(1.0).unwrap();
    for _ in 0..100 {
        let center = random_sphere_point(&mut rng, 1.0);
        let n = rng.gen_range(1..5);
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let means: Vec<Vector> = (0..n)
            .map(|_| {
                let t = random_tangent(&mut rng, &sphere, &center, 0.5);
                sphere.retract(&center, &t).unwrap()
            })
            .collect();
        let covs: Vec<Matrix> = means
            .iter()
            .map(|m| {
                let b = sphere.tangent_basis(m);
                &b * random_spd(&mut rng, 2, 1e-3, 1.0) * b.transpose()
            })
            .collect();
        let mu = frechet_predict_mean(&sphere, &alpha, &means, &RgdConfig::default())
            .unwrap()
            .point;
        let b = sphere.tangent_basis(&mu);
        for variant in [CovarianceVariant::Exact, CovarianceVariant::Approximate] {
            let (sigma, _) = manifold_covariance(&sphere, &alpha, &means, &covs, &mu, variant).unwrap();
            total += 1;
            failures += usize::from(!is_spd(&(b.transpose() * sigma * &b)));
        }
    }
    check(
        failures == 0,
        format!("{failures} of {total} predicted covariances failed Cholesky"),
    )
}

/// Eigen-based matrix logarithm used as an independent oracle.
fn logm_oracle(m: &Matrix) -> Matrix {
    let e = SymmetricEigen::new(m.clone());
    &e.eigenvectors * Matrix::from_diagonal(&e.eigenvalues.map(f64::ln)) * e.eigenvectors.transpose()
}

/// 10. Metric sanity values.
fn metrics_sanity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    let covs: Vec<Matrix> = (0..10).map(|_| random_spd(&mut rng, 3, 0.1, 5.0)).collect();
    let self_err = cov_error(&covs, &covs).unwrap();
    let i2 = Matrix::identity(2, 2);
    let scaled = &i2 * std::f64::consts::E.powi(2);
    let oracle = logm_oracle(&scaled).norm();
    let value = spd_distance(&i2, &scaled).unwrap();
    check(
        self_err == 0.0 && (value - oracle).abs() <= 1e-12 && (oracle - 2.0 * 2f64.sqrt()).abs() <= 1e-12,
        format!("cov_error(S, S) = {self_err:e}; single pair {value:.15} vs oracle {oracle:.15}"),
    )
}

/// Grid minimizer of a quadratic objective over a box around the means.
fn grid_argmin(dim: usize, lo: &[f64], hi: &[f64], steps: usize, f: impl Fn(&Vector) -> f64) -> (Vector, Vec<f64>) {
    let h: Vec<f64> = (0..dim).map(|k| (hi[k] - lo[k]) / (steps - 1) as f64).collect();
    let mut best = (f64::INFINITY, Vector::zeros(dim));
    let total = steps.pow(dim as u32);
    for idx in 0..total {
        let mut rem = idx;
        let p = Vector::from_fn(dim, |k, _| {
            let i = rem % steps;
            rem /= steps;
            lo[k] + h[k] * i as f64
        });
        let val = f(&p);
        if val < best.0 {
            best = (val, p);
        }
    }
    (best.1, h)
}

/// 11. Closed-form means against dense grid minimization.
fn closed_form_vs_grid() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=4);
        let dim = rng.gen_range(1..=2);
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let means: Vec<Vector> = (0..n)
            .map(|_| Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let covs: Vec<Matrix> = (0..n).map(|_| random_spd(&mut rng, dim, 0.05, 2.0)).collect();
        let lo = vec![-1.0; dim];
        let hi = vec![1.0; dim];
        let steps = if dim == 1 { 4001 } else { 401 };
        let shared = random_spd(&mut rng, dim, 0.1, 2.0).try_inverse().unwrap();

        let kl = predict_mean_kl(&alpha, &means).unwrap();
        let (g, h) = grid_argmin(dim, &lo, &hi, steps, |mu| {
            alpha
                .iter()
                .zip(&means)
                .map(|(a, m)| a * ((mu - m).transpose() * &shared * (mu - m))[0])
                .sum()
        });
        let rkl = predict_mean_rkl(&alpha, &means, &covs).unwrap();
        let inv: Vec<Matrix> = covs.iter().map(|c| c.clone().try_inverse().unwrap()).collect();
        let (g2, _) = grid_argmin(dim, &lo, &hi, steps, |mu| {
            alpha
                .iter()
                .zip(&means)
                .zip(&inv)
                .map(|((a, m), p)| a * ((mu - m).transpose() * p * (mu - m))[0])
                .sum()
        });
        for k in 0..dim {
            worst = worst.max((kl[k] - g[k]).abs() / h[k]);
            worst = worst.max((rkl[k] - g2[k]).abs() / h[k]);
        }
    }
    check(
        worst <= 1.0,
        format!("max |closed form - grid argmin| = {worst:.3} grid cells (bound 1 cell)"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("interpolation at training inputs", interpolation),
        ("KL vs RKL divergence behavior", kl_vs_rkl),
        ("Euclidean via-point adaptation", via_point_adaptation),
        ("velocity central-difference identity", velocity_identity),
        ("sphere Frechet mean", sphere_frechet_mean),
        ("Riemannian gradient vs finite differences", gradient_check),
        ("manifold membership and via-point", manifold_outputs),
        ("parallel transport isometry", transport_isometry),
        ("SPD closure with positive weights", spd_closure),
        ("metrics sanity", metrics_sanity),
        ("closed form vs brute force", closed_form_vs_grid),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {:>2}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

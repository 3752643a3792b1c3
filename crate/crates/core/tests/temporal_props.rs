mod common;

use common::*;
use imitate_core::temporal::{build_temporal_gram, fit_temporal};
use imitate_core::{phase_map, DesiredState, KernelConfig, TemporalSample, Vector};
use nalgebra::linalg::SymmetricEigen;
use proptest::prelude::*;

#[test]
fn tiny_ridge_interpolates_training_positions() {
    let samples = temporal_samples(60, 10.0);
    let cfg = KernelConfig::gaussian(6.0, 1e-12).unwrap();
    let model = fit_temporal(&samples, &cfg, None).unwrap();
    let positions: Vec<Vector> = samples.iter().map(|s| s.position.clone()).collect();
    let range = output_range(&positions);
    for s in &samples {
        let (pos, _) = model.predict_pos_vel(s.t);
        assert!((pos - &s.position).norm() <= 1e-4 * range, "t = {}", s.t);
    }
}

fn constant_samples(position: [f64; 2]) -> Vec<TemporalSample> {
    linspace(0.0, 5.0, 40)
        .into_iter()
        .map(|t| TemporalSample {
            t,
            position: v(&position),
            velocity: v(&[0.0, 0.0]),
        })
        .collect()
}

#[test]
fn zero_outputs_give_exactly_zero_velocity() {
    let model = fit_temporal(&constant_samples([0.0, 0.0]), &KernelConfig::default(), None).unwrap();
    for t in linspace(-1.0, 6.0, 29) {
        assert_eq!(model.predict_pos_vel(t).1.amax(), 0.0);
    }
}

#[test]
fn constant_positions_give_small_velocity() {
    // a constant is not in the span of Gaussian features, so the ridge fit
    // ripples slightly; the velocity stays far below the position scale
    let model = fit_temporal(&constant_samples([3.0, -2.0]), &KernelConfig::default(), None).unwrap();
    for t in linspace(0.0, 5.0, 33) {
        let (pos, vel) = model.predict_pos_vel(t);
        assert!(vel.norm() <= 1e-2 * 3.0, "t = {t}: {vel}");
        assert!((pos - v(&[3.0, -2.0])).norm() <= 1e-2 * 3.0);
    }
}

#[test]
fn heavy_desired_rows_force_the_prediction() {
    let samples = temporal_samples(80, 10.0);
    let model = fit_temporal(&samples, &KernelConfig::default(), None).unwrap();
    let positions: Vec<Vector> = samples.iter().map(|s| s.position.clone()).collect();
    let range = output_range(&positions);
    let target_pos = v(&[1.1, 0.2]);
    let target_vel = v(&[0.5, -0.4]);
    let cases = [
        DesiredState {
            t: 2.7,
            position: Some(target_pos.clone()),
            velocity: None,
            weight: 1e4,
        },
        DesiredState {
            t: 6.2,
            position: None,
            velocity: Some(target_vel.clone()),
            weight: 1e4,
        },
        DesiredState {
            t: 8.1,
            position: Some(target_pos.clone()),
            velocity: Some(target_vel.clone()),
            weight: 1e4,
        },
    ];
    for d in cases {
        let adapted = model.adapt_temporal(std::slice::from_ref(&d)).unwrap();
        let expected_rows = model.len() + usize::from(d.position.is_some()) + usize::from(d.velocity.is_some());
        assert_eq!(adapted.len(), expected_rows);
        let (pos, vel) = adapted.predict_pos_vel(d.t);
        if let Some(p) = &d.position {
            assert!((pos - p).norm() <= 1e-2 * range);
        }
        if let Some(q) = &d.velocity {
            assert!((vel - q).norm() <= 1e-2 * range);
        }
    }
}

#[test]
fn phase_modulation_is_time_substitution() {
    let samples = temporal_samples(50, 10.0);
    let model = fit_temporal(&samples, &KernelConfig::default(), None).unwrap();
    for t in linspace(0.0, 10.0, 21) {
        let (pos, vel) = model.predict_phase(t, 2.0).unwrap();
        let (pos_ref, vel_ref) = model.predict_pos_vel(t / 2.0);
        assert!((pos - pos_ref).norm() <= 1e-12);
        assert!((vel - vel_ref / 2.0).norm() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn temporal_gram_is_symmetric_psd(
        mut times in prop::collection::vec(0.0f64..10.0, 1..12),
        kappa in 0.5f64..10.0,
    ) {
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-2);
        let cfg = KernelConfig::gaussian(kappa, 1e-5).unwrap();
        let k = build_temporal_gram(&times, &cfg, 1e-4).unwrap();
        prop_assert!((&k - k.transpose()).norm() <= 1e-12);
        let min_eig = SymmetricEigen::new(k).eigenvalues.min();
        prop_assert!(min_eig >= -1e-8, "min eigenvalue {}", min_eig);
    }

    #[test]
    fn phase_is_strictly_increasing(tau in 0.01f64..100.0, t in -100.0f64..100.0, dt in 1e-6f64..10.0) {
        prop_assert!(phase_map(t + dt, tau).unwrap() > phase_map(t, tau).unwrap());
    }
}

//! Joint position/velocity learning with derivative kernels.
//!
//! Position and velocity share one weight matrix, so the velocity feature map
//! is the central difference of the position feature map with half-step `δ`.
//! After the kernel trick every entry of the `2N × 2N` system is a finite
//! difference of `k`, with `t± = t ± δ`:
//!
//! | row \ column | position `t_j` | velocity `t_j` |
//! |---|---|---|
//! | position `t_i` | `k(t_i,t_j)` | `(k(t_i,t_j⁺) − k(t_i,t_j⁻))/2δ` |
//! | velocity `t_i` | `(k(t_i⁺,t_j) − k(t_i⁻,t_j))/2δ` | `(k(t_i⁺,t_j⁺) − k(t_i⁺,t_j⁻) − k(t_i⁻,t_j⁺) + k(t_i⁻,t_j⁻))/4δ²` |
//!
//! Rows are interleaved `[pos₁, vel₁, …, pos_N, vel_N]`; adaptation rows are
//! appended after them. Because the query vectors use the same expansion,
//! `vel(t) = (pos(t+δ) − pos(t−δ))/2δ` holds exactly up to rounding.

use nalgebra::linalg::LU;
use nalgebra::Dyn;

use crate::kernel::{factor_with_jitter, KernelConfig};
use crate::{ImitationError, Matrix, Result, Vector};

/// Default `δ` as a fraction of the time span.
pub const DEFAULT_DELTA_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Position,
    Velocity,
}

/// One demonstrated time stamp with position and velocity means.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSample {
    pub t: f64,
    pub position: Vector,
    pub velocity: Vector,
}

/// Desired position and/or velocity at time `t`, enforced with weight `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredState {
    pub t: f64,
    pub position: Option<Vector>,
    pub velocity: Option<Vector>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    t: f64,
    kind: RowKind,
    weight: f64,
    value: Vector,
}

/// Kernel entry between a row `(kind_a, a)` and a column `(kind_b, b)`.
fn entry(cfg: &KernelConfig, delta: f64, kind_a: RowKind, a: f64, kind_b: RowKind, b: f64) -> f64 {
    let k = |x: f64, y: f64| cfg.eval_scalar(x, y);
    match (kind_a, kind_b) {
        (RowKind::Position, RowKind::Position) => k(a, b),
        (RowKind::Velocity, RowKind::Position) => (k(a + delta, b) - k(a - delta, b)) / (2.0 * delta),
        (RowKind::Position, RowKind::Velocity) => (k(a, b + delta) - k(a, b - delta)) / (2.0 * delta),
        (RowKind::Velocity, RowKind::Velocity) => {
            (k(a + delta, b + delta) - k(a + delta, b - delta) - k(a - delta, b + delta) + k(a - delta, b - delta))
                / (4.0 * delta * delta)
        }
    }
}

/// Interleaved `2N × 2N` derivative Gram matrix (no weights, no regularizer).
pub fn build_temporal_gram(times: &[f64], config: &KernelConfig, delta: f64) -> Result<Matrix> {
    config.validate()?;
    check_delta(delta)?;
    let kinds = [RowKind::Position, RowKind::Velocity];
    let n = times.len() * 2;
    Ok(Matrix::from_fn(n, n, |i, j| {
        entry(config, delta, kinds[i % 2], times[i / 2], kinds[j % 2], times[j / 2])
    }))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ImitationError::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "finite-difference step must be positive",
        });
    }
    Ok(())
}

/// `δ = 1e-4 ×` time span (or `1e-4` for a zero span).
pub fn default_delta(times: &[f64]) -> f64 {
    let (lo, hi) = times
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| (l.min(t), h.max(t)));
    let span = hi - lo;
    if span > 0.0 && span.is_finite() {
        DEFAULT_DELTA_FRACTION * span
    } else {
        DEFAULT_DELTA_FRACTION
    }
}

/// Phase `z = t/τ` of first-order linear phase dynamics `ż = 1/τ`.
pub fn phase_map(t: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(ImitationError::InvalidParameter {
            name: "tau",
            value: tau,
            reason: "time scaling must be positive",
        });
    }
    Ok(t / tau)
}

/// Fitted position/velocity model. Immutable; adaptation returns a new model.
#[derive(Debug, Clone)]
pub struct TemporalModel {
    rows: Vec<Row>,
    config: KernelConfig,
    delta: f64,
    n_effective: f64,
    output_dim: usize,
    lu: LU<f64, Dyn, Dyn>,
    system: Matrix,
    /// `Yᵀ (K' + N'λI)⁻¹`, so that predictions are `gain · k`.
    gain: Matrix,
}

/// Fits on demonstrated positions and velocities. `delta` defaults to
/// [`default_delta`] and must not exceed a tenth of the smallest spacing.
pub fn fit_temporal(samples: &[TemporalSample], config: &KernelConfig, delta: Option<f64>) -> Result<TemporalModel> {
    config.validate()?;
    let first = samples.first().ok_or(ImitationError::Empty("temporal samples"))?;
    let dim = first.position.len();
    if dim == 0 {
        return Err(ImitationError::Empty("position vector"));
    }
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let delta = delta.unwrap_or_else(|| default_delta(&times));
    check_delta(delta)?;
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let min_spacing = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if min_spacing.is_finite() && delta > min_spacing / 10.0 {
        return Err(ImitationError::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "must not exceed a tenth of the smallest time spacing",
        });
    }

    let mut rows = Vec::with_capacity(samples.len() * 2);
    for (i, s) in samples.iter().enumerate() {
        if !s.t.is_finite() {
            return Err(ImitationError::schema(format!("times[{i}]"), "non-finite time"));
        }
        if s.position.len() != dim {
            return Err(ImitationError::dim(format!("position {i}"), dim, s.position.len()));
        }
        if s.velocity.len() != dim {
            return Err(ImitationError::dim(format!("velocity {i}"), dim, s.velocity.len()));
        }
        rows.push(Row {
            t: s.t,
            kind: RowKind::Position,
            weight: 1.0,
            value: s.position.clone(),
        });
        rows.push(Row {
            t: s.t,
            kind: RowKind::Velocity,
            weight: 1.0,
            value: s.velocity.clone(),
        });
    }
    TemporalModel::assemble(rows, *config, delta, samples.len() as f64, dim)
}

impl TemporalModel {
    fn assemble(rows: Vec<Row>, config: KernelConfig, delta: f64, n_effective: f64, output_dim: usize) -> Result<Self> {
        let r = rows.len();
        let mut system = Matrix::from_fn(r, r, |i, j| {
            rows[i].weight * entry(&config, delta, rows[i].kind, rows[i].t, rows[j].kind, rows[j].t)
        });
        for i in 0..r {
            system[(i, i)] += n_effective * config.lambda;
        }
        let (system, lu, condition, _) = factor_with_jitter(system)?;
        let y = Matrix::from_fn(r, output_dim, |i, k| rows[i].value[k]);
        let gain_t = system
            .transpose()
            .lu()
            .solve(&y)
            .ok_or(ImitationError::SingularSystem { condition })?;
        Ok(Self {
            rows,
            config,
            delta,
            n_effective,
            output_dim,
            lu,
            system,
            gain: gain_t.transpose(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Number of system rows (`2N` before adaptation).
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_effective(&self) -> f64 {
        self.n_effective
    }

    pub fn row_weights(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.weight).collect()
    }

    pub fn system_matrix(&self) -> &Matrix {
        &self.system
    }

    /// Weighted query vectors `(kᵖ, kᵛ)` at time `t`.
    pub fn kp_kv(&self, t: f64) -> (Vector, Vector) {
        let r = self.rows.len();
        let kp = Vector::from_fn(r, |i, _| {
            let row = &self.rows[i];
            row.weight * entry(&self.config, self.delta, row.kind, row.t, RowKind::Position, t)
        });
        let kv = Vector::from_fn(r, |i, _| {
            let row = &self.rows[i];
            row.weight * entry(&self.config, self.delta, row.kind, row.t, RowKind::Velocity, t)
        });
        (kp, kv)
    }

    /// `(αᵖ, αᵛ) = ((K' + N'λI)⁻¹ kᵖ, (K' + N'λI)⁻¹ kᵛ)`.
    pub fn alpha_pv(&self, t: f64) -> Result<(Vector, Vector)> {
        let (kp, kv) = self.kp_kv(t);
        let solve = |k: &Vector| {
            self.lu.solve(k).ok_or(ImitationError::SingularSystem {
                condition: f64::INFINITY,
            })
        };
        Ok((solve(&kp)?, solve(&kv)?))
    }

    /// Predicted position and velocity at time `t`.
    pub fn predict_pos_vel(&self, t: f64) -> (Vector, Vector) {
        let (kp, kv) = self.kp_kv(t);
        (&self.gain * kp, &self.gain * kv)
    }

    /// Prediction under time scaling `τ`: the trajectory is evaluated at the
    /// phase `t/τ` and the velocity is rescaled to real time by `1/τ`.
    pub fn predict_phase(&self, t: f64, tau: f64) -> Result<(Vector, Vector)> {
        let z = phase_map(t, tau)?;
        let (p, v) = self.predict_pos_vel(z);
        Ok((p, v / tau))
    }

    /// New model with rows for the desired states appended and weighted.
    /// Entries without a position (velocity) add no position (velocity) row.
    pub fn adapt_temporal(&self, desired: &[DesiredState]) -> Result<TemporalModel> {
        let mut rows = self.rows.clone();
        let mut n_effective = self.n_effective;
        for (j, d) in desired.iter().enumerate() {
            if d.position.is_none() && d.velocity.is_none() {
                return Err(ImitationError::schema(
                    format!("desired[{j}]"),
                    "needs a position, a velocity, or both",
                ));
            }
            if !(d.weight > 0.0 && d.weight.is_finite()) {
                return Err(ImitationError::schema(
                    format!("desired[{j}].weight"),
                    "must be positive and finite",
                ));
            }
            if !d.t.is_finite() {
                return Err(ImitationError::schema(format!("desired[{j}].t"), "non-finite time"));
            }
            for (value, kind) in [(&d.position, RowKind::Position), (&d.velocity, RowKind::Velocity)] {
                if let Some(v) = value {
                    if v.len() != self.output_dim {
                        return Err(ImitationError::dim(format!("desired[{j}]"), self.output_dim, v.len()));
                    }
                    rows.push(Row {
                        t: d.t,
                        kind,
                        weight: d.weight,
                        value: v.clone(),
                    });
                }
            }
            n_effective += d.weight;
        }
        Self::assemble(rows, self.config, self.delta, n_effective, self.output_dim)
    }
}

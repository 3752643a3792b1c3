//! Riemannian primitives for the sphere `S²(r)`, the circular generalized
//! cylinder `ℝ² × S¹`, and finite products of these.
//!
//! Points and tangent vectors are stored in ambient coordinates. The circle
//! factor of the cylinder is a unit vector in `ℝ²`, so the sphere formulas
//! apply to it with `r = 1`; a cylinder point is laid out as `[e₁, e₂, c₁, c₂]`.
//! Every operation works factor by factor: a manifold is flattened into a
//! list of flat and round factors and results are concatenated.

use serde::{Deserialize, Serialize};

use crate::{ImitationError, Matrix, Result, Vector};

/// Relative tolerance of the membership and tangency predicates.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Below this geodesic distance, log and transport use their limits.
const COINCIDENT: f64 = 1e-12;
/// `pᵀq/r²` at or below `-1 + CUT_MARGIN` counts as antipodal.
const CUT_MARGIN: f64 = 1e-9;
/// Switch to the series of `arccos(u)/√(1−u²)` when `1 − u` is below this.
const SERIES_SWITCH: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ManifoldSpec {
    /// Sphere of the given radius embedded in `ℝ³`.
    Sphere { radius: f64 },
    /// `ℝ² × S¹`, ambient layout `[e₁, e₂, c₁, c₂]`.
    Cylinder,
    /// Cartesian product; coordinates are concatenated in order.
    Product { components: Vec<ManifoldSpec> },
}

/// Elementary factor a manifold is decomposed into.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    Flat { dim: usize },
    Round { dim: usize, radius: f64 },
}

impl Factor {
    fn ambient_dim(self) -> usize {
        match self {
            Factor::Flat { dim } | Factor::Round { dim, .. } => dim,
        }
    }

    fn tangent_dim(self) -> usize {
        match self {
            Factor::Flat { dim } => dim,
            Factor::Round { dim, .. } => dim - 1,
        }
    }
}

impl ManifoldSpec {
    pub fn sphere(radius: f64) -> Result<Self> {
        let spec = ManifoldSpec::Sphere { radius };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldSpec::Sphere { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(ImitationError::InvalidParameter {
                        name: "radius",
                        value: *radius,
                        reason: "sphere radius must be positive and finite",
                    });
                }
                Ok(())
            }
            ManifoldSpec::Cylinder => Ok(()),
            ManifoldSpec::Product { components } => {
                if components.is_empty() {
                    return Err(ImitationError::Empty("product manifold components"));
                }
                components.iter().try_for_each(|c| c.validate())
            }
        }
    }

    fn factors(&self) -> Vec<Factor> {
        let mut out = Vec::new();
        self.push_factors(&mut out);
        out
    }

    fn push_factors(&self, out: &mut Vec<Factor>) {
        match self {
            ManifoldSpec::Sphere { radius } => out.push(Factor::Round {
                dim: 3,
                radius: *radius,
            }),
            ManifoldSpec::Cylinder => {
                out.push(Factor::Flat { dim: 2 });
                out.push(Factor::Round { dim: 2, radius: 1.0 });
            }
            ManifoldSpec::Product { components } => components.iter().for_each(|c| c.push_factors(out)),
        }
    }

    /// Length of the ambient coordinate vector.
    pub fn ambient_dim(&self) -> usize {
        self.factors().iter().map(|f| f.ambient_dim()).sum()
    }

    /// Intrinsic dimension `d`.
    pub fn tangent_dim(&self) -> usize {
        self.factors().iter().map(|f| f.tangent_dim()).sum()
    }

    fn check_len(&self, v: &Vector, what: &str) -> Result<()> {
        let n = self.ambient_dim();
        if v.len() != n {
            return Err(ImitationError::dim(what, n, v.len()));
        }
        Ok(())
    }

    /// Largest relative deviation of any round factor from its radius.
    pub fn membership_error(&self, p: &Vector) -> f64 {
        let mut worst: f64 = 0.0;
        for_each_factor(&self.factors(), |f, range| {
            if let Factor::Round { radius, .. } = f {
                let n = p.rows(range.start, range.len()).norm();
                worst = worst.max((n - radius).abs() / radius);
            }
        });
        worst
    }

    pub fn check_point(&self, p: &Vector) -> Result<()> {
        self.check_len(p, "manifold point")?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ImitationError::OffManifold {
                deviation: f64::INFINITY,
            });
        }
        let deviation = self.membership_error(p);
        if deviation > MEMBERSHIP_TOL {
            return Err(ImitationError::OffManifold { deviation });
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vector) -> bool {
        self.check_point(p).is_ok()
    }

    /// Largest normalized normal component `|pᵀu| / (‖u‖ r)` of `u` over the
    /// round factors.
    pub fn tangency_error(&self, base: &Vector, u: &Vector) -> f64 {
        let mut worst: f64 = 0.0;
        let un = u.norm();
        if un == 0.0 {
            return 0.0;
        }
        for_each_factor(&self.factors(), |f, range| {
            if let Factor::Round { radius, .. } = f {
                let p = base.rows(range.start, range.len());
                let w = u.rows(range.start, range.len());
                worst = worst.max(p.dot(&w).abs() / (un * radius));
            }
        });
        worst
    }

    pub fn check_tangent(&self, base: &Vector, u: &Vector) -> Result<()> {
        self.check_len(u, "tangent vector")?;
        let deviation = self.tangency_error(base, u);
        if deviation > MEMBERSHIP_TOL {
            return Err(ImitationError::NotTangent { deviation });
        }
        Ok(())
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at `base`.
    pub fn project_tangent(&self, base: &Vector, u: &Vector) -> Vector {
        let mut out = u.clone();
        for_each_factor(&self.factors(), |f, range| {
            if let Factor::Round { radius, .. } = f {
                let p = base.rows(range.start, range.len()).into_owned();
                let c = p.dot(&u.rows(range.start, range.len())) / (radius * radius);
                let mut seg = out.rows_mut(range.start, range.len());
                seg -= p * c;
            }
        });
        out
    }

    /// Rescales every round factor onto its radius.
    pub fn project_point(&self, p: &Vector) -> Result<Vector> {
        self.check_len(p, "manifold point")?;
        let mut out = p.clone();
        let mut failed = false;
        for_each_factor(&self.factors(), |f, range| {
            if let Factor::Round { radius, .. } = f {
                let mut seg = out.rows_mut(range.start, range.len());
                let n = seg.norm();
                if n > 0.0 && n.is_finite() {
                    seg *= radius / n;
                } else {
                    failed = true;
                }
            }
        });
        if failed {
            return Err(ImitationError::OffManifold {
                deviation: f64::INFINITY,
            });
        }
        Ok(out)
    }

    /// Orthonormal basis of the tangent space at `base`, as an
    /// `ambient_dim × tangent_dim` matrix (block diagonal over factors).
    pub fn tangent_basis(&self, base: &Vector) -> Matrix {
        let factors = self.factors();
        let mut basis = Matrix::zeros(self.ambient_dim(), self.tangent_dim());
        let mut col = 0;
        for_each_factor(&factors, |f, range| match f {
            Factor::Flat { dim } => {
                for k in 0..dim {
                    basis[(range.start + k, col + k)] = 1.0;
                }
                col += dim;
            }
            Factor::Round { dim, .. } => {
                let p = base.rows(range.start, dim).into_owned();
                let b = sphere_tangent_basis(&p);
                basis.view_mut((range.start, col), (dim, dim - 1)).copy_from(&b);
                col += dim - 1;
            }
        });
        basis
    }

    /// Geodesic distance. Round factors use `r·arccos(pᵀq/r²)` with the
    /// argument clamped; factors combine as root-sum-square.
    pub fn dist(&self, p: &Vector, q: &Vector) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(self.dist_unchecked(p, q))
    }

    pub(crate) fn dist_unchecked(&self, p: &Vector, q: &Vector) -> f64 {
        let factors = self.factors();
        if let [Factor::Round { radius, .. }] = factors.as_slice() {
            return round_dist(p.as_slice(), q.as_slice(), *radius);
        }
        let mut sq = 0.0;
        for_each_factor(&factors, |f, range| {
            let a = &p.as_slice()[range.clone()];
            let b = &q.as_slice()[range];
            sq += match f {
                Factor::Flat { .. } => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
                Factor::Round { radius, .. } => round_dist(a, b, radius).powi(2),
            };
        });
        sq.sqrt()
    }

    /// `Log_base(target)`. Antipodal pairs on any round factor are an error;
    /// coincident points give the zero vector.
    pub fn log_map(&self, base: &Vector, target: &Vector) -> Result<Vector> {
        self.check_point(base)?;
        self.check_point(target)?;
        self.log_unchecked(base, target)
    }

    pub(crate) fn log_unchecked(&self, base: &Vector, target: &Vector) -> Result<Vector> {
        let mut out = Vector::zeros(base.len());
        let mut cut = false;
        for_each_factor(&self.factors(), |f, range| {
            let p = &base.as_slice()[range.clone()];
            let q = &target.as_slice()[range.clone()];
            let seg = &mut out.as_mut_slice()[range];
            match f {
                Factor::Flat { .. } => {
                    for ((s, a), b) in seg.iter_mut().zip(p).zip(q) {
                        *s = b - a;
                    }
                }
                Factor::Round { radius, .. } => match round_log(p, q, radius) {
                    Some(v) => seg.copy_from_slice(&v),
                    None => cut = true,
                },
            }
        });
        if cut {
            return Err(ImitationError::CutLocus { anchor: None });
        }
        Ok(out)
    }

    /// First-order retraction: flat factors add, round factors renormalize
    /// `r(μ + v)/‖μ + v‖`.
    pub fn retract(&self, base: &Vector, v: &Vector) -> Result<Vector> {
        self.check_point(base)?;
        self.check_len(v, "tangent vector")?;
        self.retract_unchecked(base, v)
    }

    pub(crate) fn retract_unchecked(&self, base: &Vector, v: &Vector) -> Result<Vector> {
        let mut out = base + v;
        let mut degenerate = false;
        for_each_factor(&self.factors(), |f, range| {
            if let Factor::Round { radius, .. } = f {
                let mut seg = out.rows_mut(range.start, range.len());
                let n = seg.norm();
                if n > 0.0 && n.is_finite() {
                    seg *= radius / n;
                } else {
                    degenerate = true;
                }
            }
        });
        if degenerate {
            return Err(ImitationError::InvalidParameter {
                name: "tangent",
                value: 0.0,
                reason: "retraction of a vector with ‖μ + v‖ = 0",
            });
        }
        Ok(out)
    }

    /// Parallel transport of `u ∈ T_from` to `T_to` along the geodesic.
    pub fn parallel_transport(&self, from: &Vector, to: &Vector, u: &Vector) -> Result<Vector> {
        self.check_point(from)?;
        self.check_point(to)?;
        self.check_len(u, "tangent vector")?;
        self.transport_unchecked(from, to, u)
    }

    pub(crate) fn transport_unchecked(&self, from: &Vector, to: &Vector, u: &Vector) -> Result<Vector> {
        let mut out = u.clone();
        let mut cut = false;
        for_each_factor(&self.factors(), |f, range| {
            if let Factor::Round { radius, .. } = f {
                let p = &from.as_slice()[range.clone()];
                let q = &to.as_slice()[range.clone()];
                let w = &u.as_slice()[range.clone()];
                match round_transport(p, q, w, radius) {
                    Some(v) => out.as_mut_slice()[range].copy_from_slice(&v),
                    None => cut = true,
                }
            }
        });
        if cut {
            return Err(ImitationError::CutLocus { anchor: None });
        }
        Ok(out)
    }

    /// `F(μ) = Σ_n α_n dist²(μ_n, μ)`.
    pub fn weighted_dist2(&self, alpha: &[f64], anchors: &[Vector], mu: &Vector) -> Result<f64> {
        if alpha.len() != anchors.len() {
            return Err(ImitationError::dim("alpha vs anchors", anchors.len(), alpha.len()));
        }
        self.check_point(mu)?;
        for a in anchors {
            self.check_point(a)?;
        }
        Ok(alpha
            .iter()
            .zip(anchors)
            .map(|(a, p)| a * self.dist_unchecked(p, mu).powi(2))
            .sum())
    }

    /// Riemannian gradient of [`weighted_dist2`](Self::weighted_dist2) at `mu`.
    /// This is the ascent direction; descent steps along its negative.
    pub fn riemannian_grad_weighted_dist2(&self, alpha: &[f64], anchors: &[Vector], mu: &Vector) -> Result<Vector> {
        if alpha.len() != anchors.len() {
            return Err(ImitationError::dim("alpha vs anchors", anchors.len(), alpha.len()));
        }
        self.check_point(mu)?;
        for a in anchors {
            self.check_point(a)?;
        }
        self.grad_unchecked(alpha, anchors, mu)
    }

    pub(crate) fn grad_unchecked(&self, alpha: &[f64], anchors: &[Vector], mu: &Vector) -> Result<Vector> {
        let factors = self.factors();
        let mut grad = Vector::zeros(mu.len());
        for (n, (&a, anchor)) in alpha.iter().zip(anchors).enumerate() {
            let mut cut = false;
            for_each_factor(&factors, |f, range| {
                let m = mu.rows(range.start, range.len());
                let p = anchor.rows(range.start, range.len());
                let mut g = grad.rows_mut(range.start, range.len());
                match f {
                    Factor::Flat { .. } => g += (m - p) * (2.0 * a),
                    Factor::Round { radius, .. } => {
                        let r2 = radius * radius;
                        let u = p.dot(&m) / r2;
                        if u <= -1.0 + CUT_MARGIN {
                            cut = true;
                            return;
                        }
                        let coef = acos_ratio(u);
                        // (μμᵀ/r² − I) μ_n = (u) μ − μ_n
                        g += (m * u - p) * (2.0 * a * coef);
                    }
                }
            });
            if cut {
                return Err(ImitationError::CutLocus { anchor: Some(n) });
            }
        }
        Ok(grad)
    }
}

/// Walks the factors with their ambient coordinate ranges.
fn for_each_factor(factors: &[Factor], mut f: impl FnMut(Factor, std::ops::Range<usize>)) {
    let mut start = 0;
    for &fac in factors {
        let end = start + fac.ambient_dim();
        f(fac, start..end);
        start = end;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn round_dist(p: &[f64], q: &[f64], r: f64) -> f64 {
    r * (dot(p, q) / (r * r)).clamp(-1.0, 1.0).acos()
}

/// `arccos(u)/√(1 − u²)`, with the series `1 + (1 − u)/3` near `u = 1`.
fn acos_ratio(u: f64) -> f64 {
    let u = u.clamp(-1.0, 1.0);
    let e = 1.0 - u;
    if e < SERIES_SWITCH {
        1.0 + e / 3.0
    } else {
        u.acos() / (1.0 - u * u).sqrt()
    }
}

fn round_log(p: &[f64], q: &[f64], r: f64) -> Option<Vec<f64>> {
    let r2 = r * r;
    let pq = dot(p, q);
    if pq / r2 <= -1.0 + CUT_MARGIN {
        return None;
    }
    let d = round_dist(p, q, r);
    if d < COINCIDENT {
        return Some(vec![0.0; p.len()]);
    }
    let w: Vec<f64> = q.iter().zip(p).map(|(qi, pi)| r2 * qi - pq * pi).collect();
    let n = dot(&w, &w).sqrt();
    if n == 0.0 {
        return Some(vec![0.0; p.len()]);
    }
    Some(w.into_iter().map(|wi| d * wi / n).collect())
}

fn round_transport(p: &[f64], q: &[f64], u: &[f64], r: f64) -> Option<Vec<f64>> {
    let d = round_dist(p, q, r);
    if dot(p, q) / (r * r) <= -1.0 + CUT_MARGIN {
        return None;
    }
    if d < COINCIDENT {
        return Some(u.to_vec());
    }
    let l_pq = round_log(p, q, r)?;
    let l_qp = round_log(q, p, r)?;
    let c = dot(&l_pq, u) / (d * d);
    Some(
        u.iter()
            .zip(l_pq.iter().zip(&l_qp))
            .map(|(ui, (a, b))| ui - c * (a + b))
            .collect(),
    )
}

/// Orthonormal basis of `p⊥` from the Householder reflection that maps the
/// unit normal onto a coordinate axis.
fn sphere_tangent_basis(p: &Vector) -> Matrix {
    let dim = p.len();
    let n = p / p.norm();
    let k = n.iamax();
    let mut v = n.clone();
    v[k] += n[k].signum();
    let h = Matrix::identity(dim, dim) - (&v * v.transpose()) * (2.0 / v.norm_squared());
    let cols: Vec<Vector> = (0..dim).filter(|&j| j != k).map(|j| h.column(j).into_owned()).collect();
    Matrix::from_columns(&cols)
}

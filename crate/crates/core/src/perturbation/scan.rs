//! Forbidden configurations and the hoop property.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::patch::{cliques, TAU_BALL};
use crate::simplex::{affine_basis, circumcenter_radius, distance_to_circumsphere, is_flake, Label, Point, Simplex};

/// A circumscribing ball of a facet that nearly passes through the opposite vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessBall {
    pub center: Point,
    pub radius: f64,
    /// `|d(p, C) − R|`.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenConfig {
    /// The flake `τ`, labels ascending.
    pub simplex: Vec<Label>,
    pub points: Vec<Point>,
    pub witness_vertex: Label,
    pub witness_ball: WitnessBall,
    pub patch_id: Label,
}

/// Searches the circumscribing balls `B(C, R)` of `sigma` with `R < eps_prime`
/// for one with `|d(p, C) − R| ≤ delta`.
///
/// The centres of the circumscribing balls form the normal space of `aff(σ)`
/// through the circumcentre `C0`. Write `p − C0 = w∥ + w⊥` with `b = |w∥|` and
/// `a = |w⊥|`. It suffices to move along `t ↦ C0 + t ŵ⊥`, where
/// `d² = b² + (a − t)²` and `R² = R0² + t²`. Because
/// `((d − R)² − δ²)((d + R)² − δ²) = (d² − R²)² − 2δ²(d² + R²) + δ⁴` and
/// `d + R > δ`, the condition is the quadratic inequality `f(t) ≤ 0` on
/// `|t| < √(ε'² − R0²)`. A full-dimensional `σ` has only `t = 0`.
pub fn witness_ball(p: &Point, sigma: &Simplex, eps_prime: f64, delta: f64) -> Option<WitnessBall> {
    let (c0, r0) = circumcenter_radius(sigma).ok()?;
    if r0 >= eps_prime {
        return None;
    }
    let basis = affine_basis(sigma).ok()?;
    let w = p.sub(&c0).to_vector();
    let par = basis.transpose() * &w;
    let b2 = par.norm_squared();
    let perp = &w - &basis * &par;
    let a = perp.norm();
    let m = p.dim();

    let ball_at = |t: f64| {
        let dir = if a > 0.0 {
            Point::from_vector(&(&perp / a))
        } else {
            // Any unit normal; the distances only depend on `|t|` when `a = 0`.
            normal_direction(&basis, m).unwrap_or_else(|| Point::origin(m))
        };
        let center = c0.add(&dir.scale(t));
        let radius = (r0 * r0 + t * t).sqrt();
        let distance = (p.dist(&center) - radius).abs();
        WitnessBall { center, radius, distance }
    };

    if sigma.k() >= m {
        let ball = ball_at(0.0);
        return (ball.distance <= delta).then_some(ball);
    }

    let t_max = (eps_prime * eps_prime - r0 * r0).sqrt();
    let c = b2 + a * a - r0 * r0;
    let d2 = delta * delta;
    let qa = 4.0 * a * a - 4.0 * d2;
    let qb = -4.0 * a * (c - d2);
    let qc = c * c - 2.0 * d2 * (b2 + a * a + r0 * r0) + d2 * d2;
    let f = |t: f64| (qa * t + qb) * t + qc;
    let mut candidates = vec![-t_max, t_max, 0.0];
    if qa > 0.0 {
        let v = -qb / (2.0 * qa);
        if v.abs() < t_max {
            candidates.push(v);
        }
    }
    // Roots of the numerator `c − 2at` of `d − R` lie on the line as well.
    if a > 0.0 && (c / (2.0 * a)).abs() < t_max {
        candidates.push(c / (2.0 * a));
    }
    let t = candidates.into_iter().min_by(|x, y| f(*x).total_cmp(&f(*y)))?;
    if f(t) > 0.0 {
        return None;
    }
    // Pull boundary solutions strictly inside `R < ε'`.
    let t = t.clamp(-t_max * (1.0 - 1e-12), t_max * (1.0 - 1e-12));
    let ball = ball_at(t);
    (ball.distance <= delta * (1.0 + 1e-9) && ball.radius < eps_prime).then_some(ball)
}

/// A unit vector orthogonal to the columns of `basis`, if the complement is non-trivial.
fn normal_direction(basis: &nalgebra::DMatrix<f64>, m: usize) -> Option<Point> {
    (0..m).find_map(|e| {
        let mut v = nalgebra::DVector::zeros(m);
        v[e] = 1.0;
        let r = &v - basis * (basis.transpose() * &v);
        let n = r.norm();
        (n > 0.5).then(|| Point::from_vector(&(r / n)))
    })
}

/// The `α`-hoop property: every vertex lies within `α R(σ)` of the circumsphere
/// of its opposite facet `σ`, and every facet has a circumsphere. Distances
/// carry a relative slack of `τ_ball`.
pub fn hoop_check(s: &Simplex, alpha: f64) -> bool {
    if s.points.len() < 2 {
        return false;
    }
    (0..s.points.len()).all(|i| {
        let facet = s.facet(i);
        match (distance_to_circumsphere(&s.points[i], &facet), circumcenter_radius(&facet)) {
            (Ok(d), Ok((_, r))) => d <= (alpha + TAU_BALL) * r,
            _ => false,
        }
    })
}

/// Constants of a forbidden-configuration search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub gamma0: f64,
    pub eps_prime: f64,
    pub delta: f64,
    pub diameter_bound: f64,
}

/// Every forbidden configuration among `labels`, which index into `points`.
///
/// Candidates `τ` have between 3 and `m + 2` vertices and diameter below the
/// bound; edges are always `Γ0`-good, so smaller flakes do not exist.
pub fn find_forbidden(
    points: &BTreeMap<Label, Point>,
    labels: &[Label],
    settings: &ScanSettings,
    patch_id: Label,
) -> Vec<ForbiddenConfig> {
    let Some(m) = points.values().next().map(|p| p.dim()) else {
        return Vec::new();
    };
    let pts: Vec<(Label, &Point)> = labels.iter().filter_map(|l| points.get(l).map(|p| (*l, p))).collect();
    let reach = settings.diameter_bound * (1.0 + TAU_BALL);
    let mut out = Vec::new();
    for size in 3..=m + 2 {
        let mut chosen = Vec::with_capacity(size);
        cliques(&pts, size, reach, 0, &mut chosen, &mut |idx: &[usize]| {
            let tau = Simplex::with_labels(
                idx.iter().map(|&i| pts[i].0).collect(),
                idx.iter().map(|&i| pts[i].1.clone()).collect(),
            );
            let witness = (0..size).find_map(|v| {
                witness_ball(&tau.points[v], &tau.facet(v), settings.eps_prime, settings.delta).map(|b| (v, b))
            });
            if let Some((v, ball)) = witness {
                if is_flake(&tau, settings.gamma0) {
                    out.push(ForbiddenConfig {
                        simplex: tau.labels.clone(),
                        points: tau.points.clone(),
                        witness_vertex: tau.labels[v],
                        witness_ball: ball,
                        patch_id,
                    });
                }
            }
        });
    }
    out
}

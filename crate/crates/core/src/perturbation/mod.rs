//! The perturbation algorithm.
//!
//! Each vertex is visited once, in ascending label order, and moved to a
//! random point of `B̄(p_i, ρ0 ε_i)` that keeps a margin of `2α̃0 ε_i` from the
//! circumsphere of every nearby `m`-simplex. The move is propagated to every
//! chart holding the vertex. Afterwards no chart contains a forbidden
//! configuration near its centre, which is verified rather than assumed.

mod hoop;
mod params;
mod scan;

pub use hoop::{corrupt_transitions, hoop_distortion_check, HoopReport};
pub use params::{
    derivation_constant, derive_params, derived_constants, AlgorithmParams, OverrideFlags, Overrides,
    DEFAULT_MAX_ATTEMPTS,
};
pub use scan::{find_forbidden, hoop_check, witness_ball, ForbiddenConfig, ScanSettings, WitnessBall};

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::{propagate_point, Atlas, AtlasError};
use crate::patch::{Ball, Patch};
use crate::sampling::{rng_from_seed, uniform_in_ball, Rng64};
use crate::simplex::{circumcenter_radius, Label, Point, Simplex};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),
    #[error("no good perturbation of vertex {label} in {attempts} attempts")]
    AttemptsExhausted { label: Label, attempts: usize, shells: Vec<ShellHit> },
    #[error(transparent)]
    Atlas(#[from] AtlasError),
}

/// The circumsphere of an `m`-simplex of a neighbourhood complex.
#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub simplex: Vec<Label>,
    pub center: Point,
    pub radius: f64,
}

/// A simplex whose circumsphere passed too close to a candidate position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellHit {
    pub simplex: Vec<Label>,
    /// `|d(x, C) − R|`.
    pub distance: f64,
}

/// Circumsphere through `pts`, with a closed form for triangles in the plane.
fn circumsphere(pts: Vec<Point>) -> Option<(Point, f64)> {
    if pts.len() == 3 && pts[0].dim() == 2 {
        let (ax, ay) = (pts[1].0[0] - pts[0].0[0], pts[1].0[1] - pts[0].0[1]);
        let (bx, by) = (pts[2].0[0] - pts[0].0[0], pts[2].0[1] - pts[0].0[1]);
        let d = 2.0 * (ax * by - ay * bx);
        let scale = (ax * ax + ay * ay).max(bx * bx + by * by);
        if d.abs() <= 1e-12 * scale {
            return None;
        }
        let (a2, b2) = (ax * ax + ay * ay, bx * bx + by * by);
        let ux = (by * a2 - ay * b2) / d;
        let uy = (ax * b2 - bx * a2) / d;
        return Some((Point(vec![pts[0].0[0] + ux, pts[0].0[1] + uy]), ux.hypot(uy)));
    }
    circumcenter_radius(&Simplex::new(pts)).ok()
}

/// Labels of patch `i` within `(5 + 3μ0/2) ε_i` of its centre, excluding `i`.
fn neighborhood_labels(a: &Atlas, i: Label) -> Result<Vec<Label>, AtlasError> {
    let patch = a.patch(i)?;
    let r = (5.0 + 1.5 * a.mu0) * patch.eps;
    Ok(patch.labels_in(&Ball::new(patch.origin.clone(), r)).into_iter().filter(|&l| l != i).collect())
}

/// The `m`-simplices `𝒮_i` on the neighbours of `p_i`, as ascending label lists.
pub fn neighborhood_complex(a: &Atlas, i: Label) -> Result<BTreeSet<Vec<Label>>, AtlasError> {
    let labels = neighborhood_labels(a, i)?;
    Ok(labels.into_iter().combinations(a.m + 1).collect())
}

/// Circumspheres of the non-degenerate simplices of `𝒮_i` in patch `i`'s current coordinates.
pub fn neighborhood_shells(a: &Atlas, i: Label) -> Result<Vec<Shell>, AtlasError> {
    let patch = a.patch(i)?;
    let labels = neighborhood_labels(a, i)?;
    Ok(shells_of(patch, &labels, a.m))
}

fn shells_of(patch: &Patch, labels: &[Label], m: usize) -> Vec<Shell> {
    let combos: Vec<Vec<Label>> = labels.iter().copied().combinations(m + 1).collect();
    combos
        .into_par_iter()
        .filter_map(|simplex| {
            let pts = simplex.iter().map(|l| patch.points[l].clone()).collect();
            circumsphere(pts).map(|(center, radius)| Shell { simplex, center, radius })
        })
        .collect()
}

/// The first shell within `width` of `x`, if any.
pub fn shell_hit(x: &Point, shells: &[Shell], width: f64) -> Option<ShellHit> {
    shells.iter().find_map(|s| {
        let distance = (x.dist(&s.center) - s.radius).abs();
        (distance <= width).then(|| ShellHit { simplex: s.simplex.clone(), distance })
    })
}

/// `p_i ↦ x` is good when no circumsphere of `𝒮_i` passes within `2α̃0 ε_i` of `x`.
pub fn is_good_perturbation(a: &Atlas, i: Label, x: &Point, params: &AlgorithmParams) -> Result<bool, AtlasError> {
    let eps = a.patch(i)?.eps;
    let shells = neighborhood_shells(a, i)?;
    Ok(shell_hit(x, &shells, 2.0 * params.alpha_tilde0 * eps).is_none())
}

/// Independent stream per vertex, so draws do not depend on the visit history.
fn vertex_rng(seed: u64, i: Label) -> Rng64 {
    rng_from_seed(seed ^ (i as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Draws uniformly from `B̄(center, radius)` until no shell is within `width`.
fn draw_good(
    rng: &mut Rng64,
    center: &Point,
    radius: f64,
    shells: &[Shell],
    width: f64,
    max_attempts: usize,
    label: Label,
) -> Result<(Point, usize), PerturbError> {
    let mut last = Vec::new();
    for attempt in 1..=max_attempts {
        let x = uniform_in_ball(rng, center, radius);
        match shell_hit(&x, shells, width) {
            None => return Ok((x, attempt)),
            Some(hit) => {
                if last.len() < 16 {
                    last.push(hit);
                }
            }
        }
    }
    Err(PerturbError::AttemptsExhausted { label, attempts: max_attempts, shells: last })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbOutcome {
    pub point: Point,
    pub attempts: usize,
}

/// Moves `p_i` to a good perturbation drawn around the original centre and propagates it.
pub fn perturb_point(a: &mut Atlas, i: Label, params: &AlgorithmParams) -> Result<PerturbOutcome, PerturbError> {
    let patch = a.patch(i)?;
    let (eps, origin) = (patch.eps, patch.origin.clone());
    let shells = neighborhood_shells(a, i)?;
    let mut rng = vertex_rng(params.rng_seed, i);
    let (x, attempts) = draw_good(
        &mut rng,
        &origin,
        params.rho0 * eps,
        &shells,
        2.0 * params.alpha_tilde0 * eps,
        params.max_attempts,
        i,
    )?;
    propagate_point(a, i, x.clone())?;
    Ok(PerturbOutcome { point: x, attempts })
}

/// Scan settings for patch `i`.
pub fn scan_settings(params: &AlgorithmParams, eps: f64) -> ScanSettings {
    ScanSettings {
        gamma0: params.gamma0,
        eps_prime: params.eps_prime(eps),
        delta: params.delta(eps),
        diameter_bound: params.diameter_bound(eps),
    }
}

/// The region of interest `Q'_i = P'_i ∩ B(p_i, 6ε_i)`.
pub fn region_of_interest(patch: &Patch) -> Vec<Label> {
    patch.labels_in(&Ball::new(patch.origin.clone(), 6.0 * patch.eps))
}

/// Forbidden configurations in `Q'_i`.
pub fn forbidden_scan(a: &Atlas, i: Label, params: &AlgorithmParams) -> Result<Vec<ForbiddenConfig>, AtlasError> {
    let patch = a.patch(i)?;
    Ok(find_forbidden(&patch.points, &region_of_interest(patch), &scan_settings(params, patch.eps), i))
}

/// Forbidden configurations of every patch, in label order.
pub fn forbidden_scan_all(a: &Atlas, params: &AlgorithmParams) -> Vec<ForbiddenConfig> {
    let labels: Vec<Label> = a.labels().collect();
    let per: Vec<Vec<ForbiddenConfig>> =
        labels.par_iter().map(|&i| forbidden_scan(a, i, params).unwrap_or_default()).collect();
    per.into_iter().flatten().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub params: AlgorithmParams,
    pub attempts: BTreeMap<Label, usize>,
    pub mean_attempts: f64,
    /// Largest move of a vertex in its own chart, over `ε_i`.
    pub max_own_displacement: f64,
    /// Largest move of a vertex in any other chart `j`, over `ε_j`.
    pub max_neighbor_displacement: f64,
    /// `δ = δ0 μ' ε'_i` per patch.
    pub delta: BTreeMap<Label, f64>,
    pub forbidden: Vec<ForbiddenConfig>,
    pub scan_empty: bool,
    /// Wall-clock time, excluded from reproducibility comparisons.
    pub elapsed_ms: u64,
}

impl RunReport {
    /// The report with timing removed, for byte-level comparisons.
    pub fn without_timing(&self) -> Self {
        Self { elapsed_ms: 0, ..self.clone() }
    }
}

fn mean(attempts: &BTreeMap<Label, usize>) -> f64 {
    if attempts.is_empty() {
        0.0
    } else {
        attempts.values().sum::<usize>() as f64 / attempts.len() as f64
    }
}

/// The extended algorithm over every vertex, followed by a scan of every region of interest.
pub fn run_extended(a: &mut Atlas, params: &AlgorithmParams) -> Result<RunReport, PerturbError> {
    let start = Instant::now();
    let before: BTreeMap<Label, BTreeMap<Label, Point>> =
        a.patches.iter().map(|(&j, p)| (j, p.points.clone())).collect();
    let mut attempts = BTreeMap::new();
    let labels: Vec<Label> = a.labels().collect();
    for &i in &labels {
        let out = perturb_point(a, i, params)?;
        log::debug!("vertex {i}: {} attempt(s)", out.attempts);
        attempts.insert(i, out.attempts);
    }

    let mut max_own: f64 = 0.0;
    let mut max_nbr: f64 = 0.0;
    for (&j, patch) in &a.patches {
        for (l, x) in &patch.points {
            let moved = before[&j].get(l).map_or(0.0, |y| x.dist(y)) / patch.eps;
            if *l == j {
                max_own = max_own.max(moved);
            } else {
                max_nbr = max_nbr.max(moved);
            }
        }
    }
    let forbidden = forbidden_scan_all(a, params);
    let delta = a.patches.iter().map(|(&i, p)| (i, params.delta(p.eps))).collect();
    log::info!("perturbed {} vertices, {} forbidden configuration(s) left", labels.len(), forbidden.len());
    Ok(RunReport {
        params: params.clone(),
        mean_attempts: mean(&attempts),
        attempts,
        max_own_displacement: max_own,
        max_neighbor_displacement: max_nbr,
        delta,
        scan_empty: forbidden.is_empty(),
        forbidden,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatReport {
    pub attempts: BTreeMap<Label, usize>,
    pub mean_attempts: f64,
    pub delta: f64,
    pub forbidden: Vec<ForbiddenConfig>,
}

/// The Euclidean algorithm on a single patch with threshold `2α0 ε`.
///
/// Every point is perturbed; the scan then covers the whole patch.
pub fn run_flat(patch: &mut Patch, params: &AlgorithmParams) -> Result<FlatReport, PerturbError> {
    let eps = patch.eps;
    let m = patch.dim();
    let original = patch.points.clone();
    let mut attempts = BTreeMap::new();
    for (&i, p) in &original {
        let ball = Ball::new(p.clone(), params.neighborhood_radius(eps));
        let nbrs: Vec<Label> = patch.labels_in(&ball).into_iter().filter(|&l| l != i).collect();
        let shells = shells_of(patch, &nbrs, m);
        let mut rng = vertex_rng(params.rng_seed, i);
        let (x, n) =
            draw_good(&mut rng, p, params.rho0 * eps, &shells, 2.0 * params.alpha0 * eps, params.max_attempts, i)?;
        patch.points.insert(i, x);
        attempts.insert(i, n);
    }
    let labels: Vec<Label> = patch.points.keys().copied().collect();
    let forbidden = find_forbidden(&patch.points, &labels, &scan_settings(params, eps), patch.id);
    Ok(FlatReport { mean_attempts: mean(&attempts), attempts, delta: params.delta(eps), forbidden })
}

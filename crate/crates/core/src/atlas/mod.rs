//! Atlases: charts of local samples glued by transition maps.
//!
//! Chart `i` holds the points `ψ_i(N_i)` of its neighbour set `N_i`. The map
//! `φ_ij` sends chart-`i` coordinates to chart-`j` coordinates on the domain
//! `U_ij`. Every chart is keyed by the label of its centre vertex.

mod fixtures;
mod io;
mod transition;

pub use fixtures::{build_flat_torus, build_sphere_exp, poisson_disk_sphere, poisson_disk_torus};
pub use io::{AtlasFile, AtlasHeader, PatchRecord, TransitionRecord};
pub use transition::{Domain, Frame, Transition, TransitionMap};

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patch::{certify_net, Ball, Patch};
use crate::sampling::{rng_from_seed, uniform_in_ball};
use crate::simplex::{Label, Point};

/// Relative tolerance of transition compatibility (multiplied by `ε_i`).
pub const TAU_TRANS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtlasError {
    #[error("point outside the domain of the transition {i} -> {j}")]
    OutOfDomain { i: Label, j: Label },
    #[error("no transition {i} -> {j}")]
    MissingTransition { i: Label, j: Label },
    #[error("unknown label {0}")]
    UnknownLabel(Label),
    #[error("sampling failed: {0}")]
    SamplingFailed(String),
    #[error("invalid atlas: {0}")]
    Invalid(String),
}

/// Ambient description of a built-in atlas, used for export and oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Embedding {
    /// Unit flat torus `[0,1)^m`; chart `i` is the unwrapping centred at vertex `i`.
    FlatTorus,
    /// Round sphere in `R^3`; chart `i` is the inverse exponential map at vertex `i`.
    Sphere { radius: f64, frames: BTreeMap<Label, Frame> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    pub m: usize,
    pub mu0: f64,
    pub nu0: f64,
    /// Declared metric distortion bound of the transition maps.
    pub xi0: f64,
    pub patches: BTreeMap<Label, Patch>,
    pub transitions: BTreeMap<(Label, Label), Transition>,
    pub embedding: Option<Embedding>,
}

impl Atlas {
    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.patches.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patch(&self, i: Label) -> Result<&Patch, AtlasError> {
        self.patches.get(&i).ok_or(AtlasError::UnknownLabel(i))
    }

    pub fn transition(&self, i: Label, j: Label) -> Result<&Transition, AtlasError> {
        self.transitions.get(&(i, j)).ok_or(AtlasError::MissingTransition { i, j })
    }

    /// Charts `j ≠ i` that hold a copy of vertex `i`.
    pub fn holders(&self, i: Label) -> Vec<Label> {
        self.patches.iter().filter(|(&j, p)| j != i && p.points.contains_key(&i)).map(|(&j, _)| j).collect()
    }

    /// Position of vertex `i` in the ambient model, using its own chart.
    pub fn ambient_position(&self, i: Label) -> Option<Vec<f64>> {
        let p = self.patches.get(&i)?.points.get(&i)?;
        match self.embedding.as_ref()? {
            Embedding::FlatTorus => Some(p.0.iter().map(|x| x.rem_euclid(1.0)).collect()),
            Embedding::Sphere { frames, .. } => Some(frames.get(&i)?.exp(p).0),
        }
    }

    /// Ambient position of vertex `l` computed from chart `i`.
    pub fn ambient_from_chart(&self, i: Label, l: Label) -> Option<Vec<f64>> {
        let p = self.patches.get(&i)?.points.get(&l)?;
        match self.embedding.as_ref()? {
            Embedding::FlatTorus => Some(p.0.iter().map(|x| x.rem_euclid(1.0)).collect()),
            Embedding::Sphere { frames, .. } => Some(frames.get(&i)?.exp(p).0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    Density,
    Separation,
    MissingTransition,
    DomainCoverage,
    Compatibility,
    RadiusRatio,
    Distortion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub kind: FailureKind,
    pub i: Label,
    pub j: Option<Label>,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
    pub max_distortion: f64,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn count(&self, kind: FailureKind) -> usize {
        self.failures.iter().filter(|f| f.kind == kind).count()
    }
}

/// Uniform samples from the first component of a domain, by rejection from its smallest ball.
fn sample_domain<R: Rng + ?Sized>(rng: &mut R, domain: &Domain, n: usize) -> Vec<Point> {
    let Some(part) = domain.parts.first() else {
        return Vec::new();
    };
    let Some(bound) = part.iter().min_by(|a, b| a.radius.total_cmp(&b.radius)) else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n && tries < 1000 * n {
        tries += 1;
        let x = uniform_in_ball(rng, &bound.center, bound.radius);
        if part.iter().all(|b| b.contains(&x)) {
            out.push(x);
        }
    }
    out
}

/// Largest observed `|d_i(x,y) − d_j(φ(x),φ(y))| / d_i(x,y)` over random pairs in `U_ij`.
pub fn estimate_distortion(a: &Atlas, i: Label, j: Label, samples: usize, seed: u64) -> Result<f64, AtlasError> {
    let t = a.transition(i, j)?;
    let mut rng = rng_from_seed(seed ^ ((i as u64) << 32) ^ j as u64);
    let pts = sample_domain(&mut rng, &t.domain, 2 * samples);
    let mut worst: f64 = 0.0;
    for pair in pts.chunks_exact(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let d = x.dist(y);
        if d <= 0.0 {
            continue;
        }
        let (Some(fx), Some(fy)) = (t.map.apply(x), t.map.apply(y)) else {
            return Err(AtlasError::OutOfDomain { i, j });
        };
        let dt = fx.dist(&fy);
        worst = worst.max((d - dt).abs() / d);
    }
    Ok(worst)
}

/// Checks the input hypotheses: nets, transition domains, compatibility,
/// sampling-radius ratios and declared distortion.
pub fn validate_input(a: &Atlas) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let fail = |rep: &mut ValidationReport, kind, i, j, magnitude| {
        rep.failures.push(ValidationFailure { kind, i, j, magnitude })
    };

    for (&i, patch) in &a.patches {
        let eps = patch.eps;
        let domain = Ball::new(patch.origin.clone(), 8.0 * eps);
        let cert = certify_net(&patch.points, &domain, a.mu0, eps, eps / 4.0);
        if !cert.dense_ok {
            fail(&mut rep, FailureKind::Density, i, None, cert.worst_density_distance);
        }
        if !cert.separated_ok {
            fail(&mut rep, FailureKind::Separation, i, None, cert.min_separation);
        }

        let roi = Ball::new(patch.origin.clone(), 6.0 * eps);
        for (&j, pj) in &patch.points {
            if j == i {
                continue;
            }
            let in_roi = roi.contains(pj);
            let t = match a.transitions.get(&(i, j)) {
                Some(t) => t,
                None => {
                    if in_roi {
                        fail(&mut rep, FailureKind::MissingTransition, i, Some(j), 0.0);
                    }
                    continue;
                }
            };
            if in_roi {
                if let Some(other) = a.patches.get(&j) {
                    let ratio = (eps - other.eps).abs() / eps.min(other.eps);
                    if ratio > a.nu0 + 1e-12 {
                        fail(&mut rep, FailureKind::RadiusRatio, i, Some(j), ratio);
                    }
                }
                // B(p_i, 6ε_i) ∩ B(p_j, 9ε_i) ⊆ U_ij, checked on samples.
                let required = Domain::intersection(vec![roi.clone(), Ball::new(pj.clone(), 9.0 * eps)]);
                let mut rng = rng_from_seed(((i as u64) << 32) ^ j as u64);
                let missing = sample_domain(&mut rng, &required, 64).iter().filter(|x| !t.domain.contains(x)).count();
                if missing > 0 {
                    fail(&mut rep, FailureKind::DomainCoverage, i, Some(j), missing as f64);
                }
            }

            // φ_ij ∘ ψ_i = ψ_j on the labels whose chart-i image lies in U_ij.
            let tol = TAU_TRANS * eps;
            let mut worst: f64 = 0.0;
            let mut broken = false;
            for (l, x) in &patch.points {
                if !t.domain.contains(x) {
                    continue;
                }
                match (a.patches.get(&j).and_then(|p| p.points.get(l)), t.map.apply(x)) {
                    (Some(y), Some(fx)) => worst = worst.max(fx.dist(y)),
                    _ => broken = true,
                }
            }
            if broken || worst > tol {
                fail(&mut rep, FailureKind::Compatibility, i, Some(j), if broken { f64::INFINITY } else { worst });
            }

            if let Ok(d) = estimate_distortion(a, i, j, 8, 0x5eed) {
                rep.max_distortion = rep.max_distortion.max(d);
                if d > a.xi0 + 1e-9 {
                    fail(&mut rep, FailureKind::Distortion, i, Some(j), d);
                }
            }
        }
    }
    rep
}

/// Moves vertex `i` to `x` (chart-`i` coordinates) and updates every chart holding it.
///
/// All images are computed before anything is written, so a failure leaves the atlas unchanged.
pub fn propagate_point(a: &mut Atlas, i: Label, x: Point) -> Result<(), AtlasError> {
    if !a.patches.contains_key(&i) {
        return Err(AtlasError::UnknownLabel(i));
    }
    let mut updates = vec![(i, x.clone())];
    for j in a.holders(i) {
        let t = a.transition(i, j)?;
        updates.push((j, t.forward(&x)?));
    }
    for (j, y) in updates {
        a.patches.get_mut(&j).expect("holder exists").points.insert(i, y);
    }
    Ok(())
}

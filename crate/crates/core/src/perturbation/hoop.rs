//! Stability of the hoop property under transition maps.
//!
//! A synthetic configuration is planted in chart `i`: a thick `m`-simplex `σ`
//! whose circumsphere passes within `α0 R(σ)` of the copy of vertex `j`. It is
//! carried to chart `j`, where the thickness, radius and hoop distance of the
//! image must stay within the distortion bounds.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AlgorithmParams;
use crate::atlas::{Atlas, TransitionMap};
use crate::sampling::{rng_from_seed, unit_vector};
use crate::simplex::{circumcenter_radius, thickness, Label, Point, Simplex};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HoopReport {
    pub trials: usize,
    /// Whether `ξ0 ≤ (Γ0^(2m+1)/4)²`, under which the final `α̃0` bound is claimed.
    pub hypothesis_holds: bool,
    pub thickness_violations: usize,
    pub radius_violations: usize,
    /// Violations of `d_j(p̃, S(σ̃)) ≤ 2 α̃0_raw ε_j` with the intermediate constant.
    pub distance_violations: usize,
    /// Violations of the same bound with the run's `α̃0`, counted only under the hypothesis.
    pub final_violations: usize,
    /// Largest `d_j(p̃, S(σ̃)) / (2 ε_j)`.
    pub worst_distance: f64,
    pub alpha_tilde0_raw: f64,
}

impl HoopReport {
    pub fn violations(&self) -> usize {
        self.thickness_violations + self.radius_violations + self.distance_violations + self.final_violations
    }
}

/// Intermediate constant `(α0(1 + ξ0) + 12 k^(3/2) ξ0^(1/2) / Γ0^(2k)) (1 + ν0)`.
fn alpha_tilde_raw(p: &AlgorithmParams, k: usize) -> f64 {
    let kf = k as f64;
    (p.alpha0 * (1.0 + p.xi0) + 12.0 * kf.powf(1.5) * p.xi0.sqrt() / p.gamma0.powi(2 * k as i32)) * (1.0 + p.nu0)
}

/// Random vertex pairs `(i, j)` with `p_j` within `3ε_i` of `p_i` in chart `i`.
fn close_pairs(a: &Atlas) -> Vec<(Label, Label)> {
    let mut out = Vec::new();
    for (&i, patch) in &a.patches {
        for (&j, x) in &patch.points {
            if j != i && a.transitions.contains_key(&(i, j)) && x.dist(&patch.origin) <= 3.0 * patch.eps {
                out.push((i, j));
            }
        }
    }
    out
}

/// Plants `trials` configurations across chart pairs and checks the distortion bounds.
pub fn hoop_distortion_check(a: &Atlas, trials: usize, params: &AlgorithmParams, seed: u64) -> HoopReport {
    let m = a.m;
    let k = m;
    let g = params.gamma0.powi(k as i32);
    let raw = alpha_tilde_raw(params, k);
    let mut rep = HoopReport {
        hypothesis_holds: params.xi0 <= (params.gamma0.powi(2 * m as i32 + 1) / 4.0).powi(2),
        alpha_tilde0_raw: raw,
        ..HoopReport::default()
    };
    let pairs = close_pairs(a);
    if pairs.is_empty() {
        return rep;
    }
    let mut rng = rng_from_seed(seed);
    let mut guard = 0;
    while rep.trials < trials && guard < 100 * trials {
        guard += 1;
        let &(i, j) = pairs.choose(&mut rng).expect("non-empty");
        let (pi, pj) = (&a.patches[&i], &a.patches[&j]);
        let t = &a.transitions[&(i, j)];
        let y = &pi.points[&j];
        let eps = pi.eps;

        // Circumsphere of σ at distance within α0 R of y.
        let r = eps * rng.gen_range(0.5..1.5);
        let gap = params.alpha0 * r * rng.gen_range(-1.0..1.0);
        let c = y.add(&unit_vector(&mut rng, m).scale(r + gap));
        let pts: Vec<Point> = (0..=m).map(|_| c.add(&unit_vector(&mut rng, m).scale(r))).collect();
        let sigma = Simplex::new(pts);
        if thickness(&sigma) < g || !sigma.points.iter().all(|p| t.domain.contains(p)) {
            continue;
        }
        let mapped: Option<Vec<Point>> = sigma.points.iter().map(|p| t.forward(p).ok()).collect();
        let (Some(mapped), Ok(ty)) = (mapped, t.forward(y)) else {
            continue;
        };
        rep.trials += 1;
        let tilde = Simplex::new(mapped);
        let eps_j = pj.eps;
        if thickness(&tilde) < 2.0 / (5.0 * (k as f64).sqrt()) * g {
            rep.thickness_violations += 1;
        }
        let Ok((ct, rt)) = circumcenter_radius(&tilde) else {
            rep.radius_violations += 1;
            continue;
        };
        let r_bound = 2.0 * (1.0 + 16.0 * (k as f64).powf(1.5) * params.xi0 / g.powi(3)) * (1.0 + params.nu0) * eps_j;
        if rt > r_bound {
            rep.radius_violations += 1;
        }
        let d = (ty.dist(&ct) - rt).abs();
        rep.worst_distance = rep.worst_distance.max(d / (2.0 * eps_j));
        if d > 2.0 * raw * eps_j * (1.0 + 1e-9) {
            rep.distance_violations += 1;
        }
        if rep.hypothesis_holds && d > 2.0 * params.alpha_tilde0 * eps_j * (1.0 + 1e-9) {
            rep.final_violations += 1;
        }
    }
    rep
}

/// Composes every transition map with a stretch by `factor` along the first axis.
///
/// Used for fault injection; the result no longer matches the declared distortion.
pub fn corrupt_transitions(a: &Atlas, factor: f64) -> Atlas {
    let mut out = a.clone();
    let m = a.m;
    for t in out.transitions.values_mut() {
        let linear: Vec<Vec<f64>> = (0..m)
            .map(|r| {
                (0..m)
                    .map(|c| {
                        if r != c {
                            0.0
                        } else if r == 0 {
                            factor
                        } else {
                            1.0
                        }
                    })
                    .collect()
            })
            .collect();
        t.map = match &t.map {
            TransitionMap::Translation { offset } => TransitionMap::Rigid { linear, translation: offset.clone() },
            TransitionMap::Rigid { linear: l, translation } => {
                let scaled =
                    l.iter().enumerate().map(|(r, row)| row.iter().map(|v| v * linear[r][r]).collect()).collect();
                TransitionMap::Rigid {
                    linear: scaled,
                    translation: translation.iter().enumerate().map(|(r, v)| v * linear[r][r]).collect(),
                }
            }
            other => other.clone(),
        };
    }
    out
}

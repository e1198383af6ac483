//! Randomised verification of the simplex distortion bounds.
//!
//! Each trial draws a random simplex, perturbs either its edge lengths (by at
//! most `ξ0·Δ`) or its vertices (through a map of metric distortion `ξ0`) and
//! compares the observed change against the corresponding bound. Trials whose
//! preconditions fail are counted as skipped.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    circumcenter_radius, diameter, edge_matrix, gram_from_edge_lengths, min_eigenvalue, smallest_singular_value,
    thickness, EdgeLengths, Point, Simplex,
};
use crate::sampling::{random_orthogonal, rng_from_seed, uniform_in_ball, unit_vector};

/// Relative slack granted to every bound to absorb rounding.
pub const TAU_LEMMA: f64 = 1e-9;

/// Thickness floor for the random simplices used by the lemma suite.
const THICKNESS_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaId {
    /// `σ_k(P) ≥ √k Υ Δ`.
    SingularValue,
    /// `R ≤ Δ / (2Υ)`.
    Circumradius,
    /// `‖E‖ ≤ 4kξ0Δ²` and `|E_ij| ≤ 4ξ0Δ²`.
    GramError,
    /// `σ_k(P̃) ≥ (1 − η²)σ_k(P)` and `Υ̃ ≥ 4(1 − η²)Υ / (5√k)`.
    ThicknessUnderDistortion,
    /// `|R̃ − R| ≤ 16 k^{3/2} R ξ0 / Υ³`.
    CircumradiusDrift,
    /// `d(φ(C), C̃) ≤ √(42 k² ξ0 / Υ³) R`.
    CircumcentreDrift,
    /// `‖P̃ − ΦP‖ ≤ 4√k ξ0 Δ / Υ²` with `Φ` the polar factor of `P̃P⁻¹`.
    CloseAlignment,
}

impl LemmaId {
    pub const ALL: [LemmaId; 7] = [
        LemmaId::SingularValue,
        LemmaId::Circumradius,
        LemmaId::GramError,
        LemmaId::ThicknessUnderDistortion,
        LemmaId::CircumradiusDrift,
        LemmaId::CircumcentreDrift,
        LemmaId::CloseAlignment,
    ];

    pub fn letter(self) -> char {
        match self {
            LemmaId::SingularValue => 'a',
            LemmaId::Circumradius => 'b',
            LemmaId::GramError => 'c',
            LemmaId::ThicknessUnderDistortion => 'd',
            LemmaId::CircumradiusDrift => 'e',
            LemmaId::CircumcentreDrift => 'f',
            LemmaId::CloseAlignment => 'g',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaOutcome {
    pub lemma: LemmaId,
    pub checked: usize,
    pub skipped: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs`; at most 1 when the bound holds.
    pub worst_ratio: f64,
}

impl LemmaOutcome {
    fn new(lemma: LemmaId) -> Self {
        Self { lemma, checked: 0, skipped: 0, violations: 0, worst_ratio: 0.0 }
    }

    fn record(&mut self, lhs: f64, rhs: f64) {
        self.checked += 1;
        if rhs > 0.0 {
            self.worst_ratio = self.worst_ratio.max(lhs / rhs);
        } else if lhs > 0.0 {
            self.worst_ratio = f64::INFINITY;
        }
        if !(lhs <= rhs * (1.0 + TAU_LEMMA) + f64::MIN_POSITIVE) {
            self.violations += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub k: usize,
    pub xi0: f64,
    pub trials: usize,
    pub seed: u64,
    pub lemmas: Vec<LemmaOutcome>,
}

impl LemmaReport {
    pub fn total_violations(&self) -> usize {
        self.lemmas.iter().map(|l| l.violations).sum()
    }

    pub fn outcome(&self, id: LemmaId) -> &LemmaOutcome {
        self.lemmas.iter().find(|l| l.lemma == id).expect("every lemma is reported")
    }
}

/// Random `k`-simplex with vertices uniform in the unit ball of `R^m`,
/// redrawn until its thickness reaches `floor`.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, k: usize, m: usize, floor: f64) -> Simplex {
    let o = Point::origin(m);
    loop {
        let pts = (0..=k).map(|_| uniform_in_ball(rng, &o, 1.0)).collect();
        let s = Simplex::new(pts);
        if thickness(&s) >= floor {
            return s;
        }
    }
}

/// Simplex in `R^k` realised by the columns of an upper-triangular factor.
fn realise(factor: &DMatrix<f64>) -> Simplex {
    let k = factor.ncols();
    let mut pts = vec![Point::origin(k)];
    for c in 0..k {
        pts.push(Point(factor.column(c).iter().copied().collect()));
    }
    Simplex::new(pts)
}

/// Edge lengths perturbed by at most `xi0 · Δ`; half of the trials use the extreme values.
fn perturb_lengths<R: Rng + ?Sized>(rng: &mut R, s: &Simplex, xi0: f64) -> EdgeLengths {
    let amp = xi0 * diameter(s);
    let extreme = rng.gen_bool(0.5);
    let base = EdgeLengths::from_points(&s.points);
    let n = s.points.len();
    let mut out = base.clone();
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = if extreme {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.gen_range(-1.0..=1.0)
            };
            out.set(i, j, base.get(i, j) + u * amp);
        }
    }
    out
}

/// A map of `R^m` with metric distortion at most `xi0`:
/// `x ↦ Q(Dx + g(x)) + b` where `D` is diagonal in `[1 − ξ0/2, 1 + ξ0/2]`
/// and `g` is `ξ0/2`-Lipschitz.
struct DistortionMap {
    q: DMatrix<f64>,
    d: DVector<f64>,
    b: DVector<f64>,
    waves: Vec<(DVector<f64>, f64, DVector<f64>)>,
    amp: f64,
}

impl DistortionMap {
    fn random<R: Rng + ?Sized>(rng: &mut R, m: usize, xi0: f64) -> Self {
        let q = random_orthogonal(rng, m);
        let d = DVector::from_fn(m, |_, _| 1.0 + 0.5 * xi0 * rng.gen_range(-1.0..=1.0));
        let b = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..=1.0));
        let n_waves = 3;
        let waves = (0..n_waves)
            .map(|_| {
                let w = unit_vector(rng, m).to_vector() * rng.gen_range(0.5..=3.0);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let v = unit_vector(rng, m).to_vector();
                (w, phase, v)
            })
            .collect::<Vec<_>>();
        // Lipschitz constant of the wave sum is at most Σ‖w‖.
        let lip: f64 = waves.iter().map(|(w, _, _)| w.norm()).sum();
        Self { q, d, b, waves, amp: 0.5 * xi0 / lip }
    }

    fn apply(&self, p: &Point) -> Point {
        let x = p.to_vector();
        let mut y = self.d.component_mul(&x);
        for (w, phase, v) in &self.waves {
            y += v * (self.amp * (w.dot(&x) + phase).sin());
        }
        Point::from_vector(&(&self.q * y + &self.b))
    }
}

/// Runs `trials` random trials of every bound for `k`-simplices.
pub fn check_distortion_lemmas(trials: usize, k: usize, xi0: f64, seed: u64) -> LemmaReport {
    assert!(k >= 1, "lemmas concern simplices of dimension at least 1");
    let mut rng = rng_from_seed(seed);
    let mut out: Vec<LemmaOutcome> = LemmaId::ALL.iter().map(|&l| LemmaOutcome::new(l)).collect();
    let kf = k as f64;

    for _ in 0..trials {
        // (a), (b): non-full-dimensional simplex in R^{k+1}.
        let s = random_simplex(&mut rng, k, k + 1, THICKNESS_FLOOR);
        let ups = thickness(&s);
        let delta = diameter(&s);
        out[0].record(kf.sqrt() * ups * delta, smallest_singular_value(&s));
        let (_, r) = circumcenter_radius(&s).expect("thick simplex");
        out[1].record(r, delta / (2.0 * ups));

        // (f): vertices pushed through a distortion map.
        if xi0 <= (ups / 4.0).powi(2) {
            let phi = DistortionMap::random(&mut rng, k + 1, xi0);
            let (c, r) = circumcenter_radius(&s).expect("thick simplex");
            let mapped = Simplex::new(s.points.iter().map(|p| phi.apply(p)).collect());
            match circumcenter_radius(&mapped) {
                Ok((ct, _)) => out[5].record(phi.apply(&c).dist(&ct), (42.0 * kf * kf * xi0 / ups.powi(3)).sqrt() * r),
                Err(_) => out[5].record(f64::INFINITY, 0.0),
            }
        } else {
            out[5].skipped += 1;
        }

        // (c), (d), (e), (g): intrinsic simplex with perturbed edge lengths.
        let s = random_simplex(&mut rng, k, k, THICKNESS_FLOOR);
        let ups = thickness(&s);
        let delta = diameter(&s);
        let p = edge_matrix(&s);
        let g = p.transpose() * &p;
        let lengths = perturb_lengths(&mut rng, &s, xi0);
        let gt = gram_from_edge_lengths(&lengths);

        if xi0 <= 2.0 / 3.0 {
            let e = &gt.gram - &g;
            let spectral = e.singular_values().max();
            out[2].record(spectral, 4.0 * kf * xi0 * delta * delta);
            out[2].record(e.amax(), 4.0 * xi0 * delta * delta);
        } else {
            out[2].skipped += 1;
        }

        let eta2 = 4.0 * xi0 / (ups * ups);
        if eta2 <= 1.0 {
            let sk = smallest_singular_value(&s);
            let lmin = min_eigenvalue(&gt.gram);
            let skt = if lmin > 0.0 { lmin.sqrt() } else { 0.0 };
            out[3].record((1.0 - eta2) * sk, skt);
            if xi0 <= 0.25 {
                match &gt.factor {
                    Some(f) => {
                        let ut = thickness(&realise(f));
                        out[3].record(4.0 * (1.0 - eta2) * ups / (5.0 * kf.sqrt()), ut);
                    }
                    None => out[3].record(1.0, 0.0),
                }
            }
        } else {
            out[3].skipped += 1;
        }

        match (&gt.factor, xi0 <= (ups / 4.0).powi(2)) {
            (Some(f), true) => {
                let (_, r) = circumcenter_radius(&s).expect("thick simplex");
                let rt = circumcenter_radius(&realise(f)).map(|(_, r)| r).unwrap_or(f64::INFINITY);
                out[4].record((rt - r).abs(), 16.0 * kf.powf(1.5) * r * xi0 / ups.powi(3));
            }
            (None, true) => out[4].record(1.0, 0.0),
            _ => out[4].skipped += 1,
        }

        match (&gt.factor, xi0 <= 2.0 / 3.0) {
            (Some(pt), true) => {
                let pinv = p.clone().try_inverse().expect("thick simplex");
                let a = pt * pinv;
                let svd = a.svd(true, true);
                let phi = svd.u.unwrap() * svd.v_t.unwrap();
                let diff = pt - phi * &p;
                out[6].record(diff.singular_values().max(), 4.0 * kf.sqrt() * xi0 * delta / (ups * ups));
            }
            _ => out[6].skipped += 1,
        }
    }

    LemmaReport { k, xi0, trials, seed, lemmas: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_has_no_violations() {
        for k in [1, 2, 3] {
            let rep = check_distortion_lemmas(200, k, 1e-6, 11);
            assert_eq!(rep.total_violations(), 0, "{rep:?}");
            for l in &rep.lemmas {
                assert!(l.checked > 0, "{l:?}");
            }
        }
    }

    #[test]
    fn distortion_map_is_bounded() {
        let mut rng = rng_from_seed(5);
        let xi0 = 0.01;
        let phi = DistortionMap::random(&mut rng, 3, xi0);
        let o = Point::origin(3);
        for _ in 0..2000 {
            let x = uniform_in_ball(&mut rng, &o, 2.0);
            let y = uniform_in_ball(&mut rng, &o, 2.0);
            let d = x.dist(&y);
            let dt = phi.apply(&x).dist(&phi.apply(&y));
            assert!((d - dt).abs() <= xi0 * d * (1.0 + 1e-9));
        }
    }

    #[test]
    fn perturbed_lengths_stay_in_budget() {
        let mut rng = rng_from_seed(9);
        for _ in 0..200 {
            let s = random_simplex(&mut rng, 3, 3, 0.05);
            let delta = diameter(&s);
            let base = EdgeLengths::from_points(&s.points);
            let l = perturb_lengths(&mut rng, &s, 1e-3);
            for i in 0..4 {
                for j in i + 1..4 {
                    assert!((l.get(i, j) - base.get(i, j)).abs() <= 1e-3 * delta * (1.0 + 1e-12));
                }
            }
        }
    }
}

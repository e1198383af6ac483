//! Geometric primitives on Euclidean simplices.
//!
//! A simplex is an ordered list of labelled points in `R^m`. Everything here is
//! dimension-generic; the ambient dimension is taken from the points.

mod gram;
mod lemmas;

pub use gram::{gram_from_edge_lengths, min_eigenvalue, EdgeLengths, GramResult, TAU_PSD};
pub use lemmas::{check_distortion_lemmas, random_simplex, LemmaId, LemmaOutcome, LemmaReport, TAU_LEMMA};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vertex identifier shared by every chart of an atlas.
pub type Label = usize;

/// Relative rank tolerance: a simplex is degenerate when `σ_k(P) < TAU_RANK · Δ`.
pub const TAU_RANK: f64 = 1e-12;

/// Relative linear-algebra tolerance (multiplied by the diameter).
pub const TAU_LIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("simplex has no vertices")]
    Empty,
    #[error("points have mismatched dimensions ({expected} vs {found})")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vertex index {index} out of range for a {k}-simplex")]
    VertexOutOfRange { index: usize, k: usize },
    #[error("degenerate simplex (sigma_k = {sigma}, diameter = {diameter})")]
    Degenerate { sigma: f64, diameter: f64 },
}

/// A point of `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn origin(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn from_vector(v: &DVector<f64>) -> Point {
        Point(v.iter().copied().collect())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

/// An ordered, labelled `k`-simplex with `k + 1` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    pub labels: Vec<Label>,
    pub points: Vec<Point>,
}

impl Simplex {
    /// Builds a simplex labelled `0..=k`.
    pub fn new(points: Vec<Point>) -> Self {
        let labels = (0..points.len()).collect();
        Self { labels, points }
    }

    pub fn with_labels(labels: Vec<Label>, points: Vec<Point>) -> Self {
        assert_eq!(labels.len(), points.len(), "one label per vertex");
        Self { labels, points }
    }

    /// Dimension `k` (number of vertices minus one). Panics on an empty simplex.
    pub fn k(&self) -> usize {
        self.points.len() - 1
    }

    /// Ambient dimension `m`.
    pub fn ambient_dim(&self) -> usize {
        self.points.first().map_or(0, Point::dim)
    }

    /// The face spanned by the vertices at the given positions.
    pub fn face(&self, idx: &[usize]) -> Simplex {
        Simplex {
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }

    /// The facet opposite vertex `i`.
    pub fn facet(&self, i: usize) -> Simplex {
        let idx: Vec<usize> = (0..self.points.len()).filter(|&j| j != i).collect();
        self.face(&idx)
    }

    fn validate(&self) -> Result<(), GeomError> {
        let m = match self.points.first() {
            None => return Err(GeomError::Empty),
            Some(p) => p.dim(),
        };
        for p in &self.points {
            if p.dim() != m {
                return Err(GeomError::DimensionMismatch { expected: m, found: p.dim() });
            }
        }
        Ok(())
    }
}

/// Longest edge length `Δ(σ)`; zero for a vertex.
pub fn diameter(s: &Simplex) -> f64 {
    let mut d2: f64 = 0.0;
    for i in 0..s.points.len() {
        for j in i + 1..s.points.len() {
            d2 = d2.max(s.points[i].dist2(&s.points[j]));
        }
    }
    d2.sqrt()
}

/// Shortest edge length; zero for a vertex.
pub fn shortest_edge(s: &Simplex) -> f64 {
    let mut d2 = f64::INFINITY;
    for i in 0..s.points.len() {
        for j in i + 1..s.points.len() {
            d2 = d2.min(s.points[i].dist2(&s.points[j]));
        }
    }
    if d2.is_finite() {
        d2.sqrt()
    } else {
        0.0
    }
}

/// The `m × k` matrix whose columns are `p_i − p_0`.
pub fn edge_matrix(s: &Simplex) -> DMatrix<f64> {
    let m = s.ambient_dim();
    let k = s.points.len().saturating_sub(1);
    let p0 = &s.points[0];
    DMatrix::from_fn(m, k, |r, c| s.points[c + 1].0[r] - p0.0[r])
}

/// Smallest singular value `σ_k(P)` of the edge matrix.
///
/// Returns 0 for a vertex and for `k > m`, where `P` cannot have full column rank.
pub fn smallest_singular_value(s: &Simplex) -> f64 {
    let k = s.points.len().saturating_sub(1);
    if k == 0 || k > s.ambient_dim() {
        return 0.0;
    }
    let p = edge_matrix(s);
    let sv = p.singular_values();
    sv.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
}

fn is_degenerate(s: &Simplex) -> bool {
    let delta = diameter(s);
    delta == 0.0 || smallest_singular_value(s) < TAU_RANK * delta
}

/// Orthonormal basis (as columns) of the direction space of `aff(σ)`.
pub(crate) fn affine_basis(s: &Simplex) -> Result<DMatrix<f64>, GeomError> {
    s.validate()?;
    let m = s.ambient_dim();
    if s.points.len() == 1 {
        return Ok(DMatrix::zeros(m, 0));
    }
    let delta = diameter(s);
    let sigma = smallest_singular_value(s);
    if delta == 0.0 || sigma < TAU_RANK * delta {
        return Err(GeomError::Degenerate { sigma, diameter: delta });
    }
    let p = edge_matrix(s);
    let svd = p.svd(true, false);
    let u = svd.u.expect("requested U");
    Ok(u.columns(0, s.k()).into_owned())
}

/// Distance from vertex `i` to the affine hull of the opposite facet.
pub fn altitude(s: &Simplex, i: usize) -> Result<f64, GeomError> {
    s.validate()?;
    if i >= s.points.len() {
        return Err(GeomError::VertexOutOfRange { index: i, k: s.points.len() - 1 });
    }
    if s.points.len() == 1 {
        return Ok(0.0);
    }
    let facet = s.facet(i);
    let basis = affine_basis(&facet)?;
    let w = s.points[i].sub(&facet.points[0]).to_vector();
    let proj = &basis * (basis.transpose() * &w);
    Ok((w - proj).norm())
}

/// Thickness `Υ(σ)`: 1 for a vertex, otherwise the smallest altitude divided by `kΔ`.
///
/// Degenerate simplices, including every `k`-simplex with `k > m`, have thickness 0.
pub fn thickness(s: &Simplex) -> f64 {
    if s.validate().is_err() {
        return 0.0;
    }
    let k = s.points.len() - 1;
    if k == 0 {
        return 1.0;
    }
    if k > s.ambient_dim() || is_degenerate(s) {
        return 0.0;
    }
    let delta = diameter(s);
    let mut min_alt = f64::INFINITY;
    for i in 0..=k {
        match altitude(s, i) {
            Ok(a) => min_alt = min_alt.min(a),
            Err(_) => return 0.0,
        }
    }
    (min_alt / (k as f64 * delta)).clamp(0.0, 1.0)
}

/// Circumcentre (in `aff(σ)`) and circumradius.
pub fn circumcenter_radius(s: &Simplex) -> Result<(Point, f64), GeomError> {
    s.validate()?;
    let k = s.points.len() - 1;
    if k == 0 {
        return Ok((s.points[0].clone(), 0.0));
    }
    let delta = diameter(s);
    let sigma = smallest_singular_value(s);
    if k > s.ambient_dim() || delta == 0.0 || sigma < TAU_RANK * delta {
        return Err(GeomError::Degenerate { sigma, diameter: delta });
    }
    let p = edge_matrix(s);
    let b = DVector::from_fn(k, |i, _| 0.5 * p.column(i).norm_squared());
    let ptp = p.transpose() * &p;
    let lambda = match ptp.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => ptp.lu().solve(&b).ok_or(GeomError::Degenerate { sigma, diameter: delta })?,
    };
    let offset = &p * lambda;
    let center = Point::from_vector(&(s.points[0].to_vector() + &offset));
    Ok((center, offset.norm()))
}

/// Calls `f` with the positions of every subset of `0..n` of size at least `min_size`.
pub(crate) fn for_each_subset(n: usize, min_size: usize, mut f: impl FnMut(&[usize]) -> bool) {
    let mut idx = Vec::with_capacity(n);
    for mask in 1u64..(1u64 << n) {
        if (mask.count_ones() as usize) < min_size {
            continue;
        }
        idx.clear();
        idx.extend((0..n).filter(|b| mask & (1 << b) != 0));
        if !f(&idx) {
            return;
        }
    }
}

/// `Γ0`-goodness: every `j`-face has thickness at least `Γ0^j`.
pub fn is_gamma_good(s: &Simplex, gamma0: f64) -> bool {
    let mut good = true;
    for_each_subset(s.points.len(), 2, |idx| {
        let j = idx.len() - 1;
        if thickness(&s.face(idx)) < gamma0.powi(j as i32) {
            good = false;
        }
        good
    });
    good
}

/// A `Γ0`-flake is not `Γ0`-good although all of its facets are.
pub fn is_flake(s: &Simplex, gamma0: f64) -> bool {
    if s.points.len() < 2 || is_gamma_good(s, gamma0) {
        return false;
    }
    (0..s.points.len()).all(|i| is_gamma_good(&s.facet(i), gamma0))
}

/// Distance from `p` to the circumsphere of `s` taken inside `aff(s)`.
///
/// For a full-dimensional simplex this is `|d(p, C) − R|`.
pub fn distance_to_circumsphere(p: &Point, s: &Simplex) -> Result<f64, GeomError> {
    let (c, r) = circumcenter_radius(s)?;
    let basis = affine_basis(s)?;
    let w = p.sub(&c).to_vector();
    let par = basis.transpose() * &w;
    // The residual vector, not |w|² − |par|², which cancels to ~√ε·R.
    let perp2 = (&w - &basis * &par).norm_squared();
    Ok(((par.norm() - r).powi(2) + perp2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Simplex {
        Simplex::new(vec![a.into(), b.into(), c.into()])
    }

    fn equilateral() -> Simplex {
        tri([0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0])
    }

    #[test]
    fn equilateral_thickness() {
        let t = thickness(&equilateral());
        assert!((t - 3f64.sqrt() / 4.0).abs() < 1e-12, "{t}");
    }

    #[test]
    fn equilateral_circumcircle() {
        let (c, r) = circumcenter_radius(&equilateral()).unwrap();
        assert!((r - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((c.0[0] - 0.5).abs() < 1e-12);
        assert!((c.0[1] - 0.5 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn right_triangle_singular_value() {
        let s = tri([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        assert!((smallest_singular_value(&s) - 1.0).abs() < 1e-12);
        let s = tri([0.0, 0.0], [1.0, 0.0], [1.0, 1.0]);
        // P = [[1,1],[0,1]]: singular values sqrt((3 ± sqrt 5)/2).
        let expected = ((3.0 - 5f64.sqrt()) / 2.0).sqrt();
        assert!((smallest_singular_value(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn collinear_is_degenerate() {
        let s = tri([0.0, 0.0], [1.0, 0.0], [2.0, 0.0]);
        assert_eq!(thickness(&s), 0.0);
        assert!(matches!(circumcenter_radius(&s), Err(GeomError::Degenerate { .. })));
    }

    #[test]
    fn vertex_and_edge_thickness() {
        let v = Simplex::new(vec![[3.0, 1.0].into()]);
        assert_eq!(thickness(&v), 1.0);
        let e = Simplex::new(vec![[0.0, 0.0].into(), [2.0, 1.0].into()]);
        assert!((thickness(&e) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_tetrahedron_in_plane() {
        let s = Simplex::new(vec![[0.0, 0.0].into(), [1.0, 0.0].into(), [1.0, 1.0].into(), [0.0, 1.0].into()]);
        assert_eq!(thickness(&s), 0.0);
        assert!(is_flake(&s, 0.4));
        for i in 0..4 {
            assert!((thickness(&s.facet(i)) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn needle_flake() {
        let s = tri([0.0, 0.0], [1.0, 0.0], [0.5, 1e-3]);
        assert!(!is_gamma_good(&s, 0.1));
        assert!(is_flake(&s, 0.1));
        assert!(!is_flake(&equilateral(), 0.1));
    }

    #[test]
    fn altitude_out_of_range() {
        assert!(matches!(altitude(&equilateral(), 5), Err(GeomError::VertexOutOfRange { .. })));
    }

    #[test]
    fn circumsphere_distance() {
        let s = tri([0.0, 0.0], [2.0, 0.0], [0.0, 2.0]);
        let d = distance_to_circumsphere(&[2.0, 2.0].into(), &s).unwrap();
        assert!(d.abs() < 1e-12);
        // Edge in R^2: circle in the line is the two endpoints.
        let e = Simplex::new(vec![[0.0, 0.0].into(), [2.0, 0.0].into()]);
        let d = distance_to_circumsphere(&[1.0, 1.0].into(), &e).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }
}

//! Local coordinate patches: nets, Delaunay complexes and protection.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::simplex::{circumcenter_radius, Label, Point, Simplex};

/// Relative tolerance of empty-ball tests (multiplied by the sampling radius).
pub const TAU_BALL: f64 = 1e-9;

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dist(&self.center) <= self.radius
    }
}

/// The sample held by one chart.
///
/// `origin` is the original position of the chart's own vertex `id`; it stays
/// fixed while `points` is updated by perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub id: Label,
    pub eps: f64,
    pub origin: Point,
    pub points: BTreeMap<Label, Point>,
}

impl Patch {
    pub fn new(id: Label, eps: f64, points: BTreeMap<Label, Point>) -> Self {
        let origin = points.get(&id).cloned().expect("patch must contain its own vertex");
        Self { id, eps, origin, points }
    }

    pub fn dim(&self) -> usize {
        self.origin.dim()
    }

    /// Labels whose current position lies in the closed ball.
    pub fn labels_in(&self, ball: &Ball) -> Vec<Label> {
        self.points.iter().filter(|(_, p)| ball.contains(p)).map(|(&l, _)| l).collect()
    }

    pub fn simplex(&self, labels: &[Label]) -> Simplex {
        Simplex::with_labels(labels.to_vec(), labels.iter().map(|l| self.points[l].clone()).collect())
    }
}

/// Bucket grid for range queries over a fixed point set.
pub struct PointIndex<'a> {
    cell: f64,
    labels: Vec<Label>,
    points: Vec<&'a Point>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> PointIndex<'a> {
    pub fn new(points: impl IntoIterator<Item = (Label, &'a Point)>, cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut labels = Vec::new();
        let mut pts = Vec::new();
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (l, p) in points {
            buckets.entry(Self::key(p, cell)).or_default().push(pts.len());
            labels.push(l);
            pts.push(p);
        }
        Self { cell, labels, points: pts, buckets }
    }

    fn key(p: &Point, cell: f64) -> Vec<i64> {
        p.0.iter().map(|x| (x / cell).floor() as i64).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of all points within distance `r` of `q` (closed ball).
    pub fn within(&self, q: &Point, r: f64) -> Vec<(Label, &'a Point)> {
        let mut out = Vec::new();
        let m = q.dim();
        let lo: Vec<i64> = q.0.iter().map(|x| ((x - r) / self.cell).floor() as i64).collect();
        let hi: Vec<i64> = q.0.iter().map(|x| ((x + r) / self.cell).floor() as i64).collect();
        let span: f64 = lo.iter().zip(&hi).map(|(a, b)| (*b as f64 - *a as f64) + 1.0).product();
        let saturated = lo.iter().chain(&hi).any(|k| k.unsigned_abs() >= 1 << 52);
        if saturated || !(span <= 4.0 * self.buckets.len() as f64) {
            for (i, p) in self.points.iter().enumerate() {
                if p.dist(q) <= r {
                    out.push((self.labels[i], *p));
                }
            }
            return out;
        }
        let mut key = lo.clone();
        loop {
            if let Some(b) = self.buckets.get(&key) {
                for &i in b {
                    if self.points[i].dist(q) <= r {
                        out.push((self.labels[i], self.points[i]));
                    }
                }
            }
            let mut d = 0;
            loop {
                if d == m {
                    return out;
                }
                key[d] += 1;
                if key[d] <= hi[d] {
                    break;
                }
                key[d] = lo[d];
                d += 1;
            }
        }
    }

    /// Distance from `q` to the nearest indexed point (infinite when empty).
    pub fn nearest_distance(&self, q: &Point) -> f64 {
        if self.points.is_empty() {
            return f64::INFINITY;
        }
        let mut r = self.cell;
        for _ in 0..8 {
            let near = self.within(q, r);
            if let Some(d) = near.iter().map(|(_, p)| p.dist(q)).reduce(f64::min) {
                return d;
            }
            r *= 2.0;
        }
        self.points.iter().map(|p| p.dist(q)).fold(f64::INFINITY, f64::min)
    }
}

/// Simplicial complex on labels, stored as a face-closed set of sorted label lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DelaunayComplex {
    pub m: usize,
    /// The `m`-simplices.
    pub top: BTreeSet<Vec<Label>>,
    /// Every simplex including faces, dimension 0 up to `m`.
    pub simplices: BTreeSet<Vec<Label>>,
}

impl DelaunayComplex {
    pub fn from_top(m: usize, top: BTreeSet<Vec<Label>>) -> Self {
        let mut simplices = BTreeSet::new();
        for t in &top {
            crate::simplex::for_each_subset(t.len(), 1, |idx| {
                simplices.insert(idx.iter().map(|&i| t[i]).collect::<Vec<_>>());
                true
            });
        }
        Self { m, top, simplices }
    }

    pub fn count(&self, dim: usize) -> usize {
        self.simplices.iter().filter(|s| s.len() == dim + 1).count()
    }
}

/// Sorted label list.
pub(crate) fn sorted(mut v: Vec<Label>) -> Vec<Label> {
    v.sort_unstable();
    v
}

/// Gap `min_q d(q, C) − R` over sample points `q` that are not vertices of the simplex.
///
/// The simplex is `δ`-protected exactly when the gap exceeds `δ`.
pub fn protection_gap(points: &BTreeMap<Label, Point>, labels: &[Label]) -> Option<f64> {
    let s = Simplex::with_labels(labels.to_vec(), labels.iter().map(|l| points[l].clone()).collect());
    let (c, r) = circumcenter_radius(&s).ok()?;
    Some(points.iter().filter(|(l, _)| !labels.contains(l)).map(|(_, q)| q.dist(&c) - r).fold(f64::INFINITY, f64::min))
}

/// `δ`-protection: the closed ball `B̄(C, R + δ)` meets the sample only in the vertices.
pub fn is_delta_protected(points: &BTreeMap<Label, Point>, labels: &[Label], delta: f64) -> bool {
    protection_gap(points, labels).is_some_and(|g| g > delta)
}

/// Calls `f` on every `size`-subset (as ascending positions) of `pts` whose
/// members are pairwise closer than `reach`.
pub(crate) fn cliques(
    pts: &[(Label, &Point)],
    size: usize,
    reach: f64,
    from: usize,
    chosen: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if chosen.len() == size {
        f(chosen);
        return;
    }
    for next in from..pts.len() {
        if pts.len() - next < size - chosen.len() {
            break;
        }
        let cand = pts[next].1;
        if chosen.iter().all(|&i| pts[i].1.dist(cand) < reach) {
            chosen.push(next);
            cliques(pts, size, reach, next + 1, chosen, f);
            chosen.pop();
        }
    }
}

/// Enumerates the `m`-simplices with circumradius below `max_radius` whose
/// circumball is empty and whose circumcentre satisfies `accept`.
///
/// Only simplices containing `required` (when given) are produced.
fn empty_ball_simplices(
    points: &BTreeMap<Label, Point>,
    max_radius: f64,
    tol: f64,
    required: Option<Label>,
    accept: impl Fn(&Point) -> bool,
) -> BTreeSet<Vec<Label>> {
    let mut out = BTreeSet::new();
    let Some(first) = points.values().next() else {
        return out;
    };
    let m = first.dim();
    let index = PointIndex::new(points.iter().map(|(&l, p)| (l, p)), max_radius.max(1e-300));
    let reach = 2.0 * max_radius;

    let mut visit = |base: Label, bp: &Point| {
        // Neighbours with a larger label, so each simplex is generated from its smallest vertex
        // (or from `required`).
        let mut nbrs: Vec<(Label, &Point)> = index
            .within(bp, reach)
            .into_iter()
            .filter(|(l, _)| if required.is_some() { *l != base } else { *l > base })
            .collect();
        nbrs.sort_by_key(|(l, _)| *l);
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        cliques(&nbrs, m, reach, 0, &mut chosen, &mut |chosen| {
            let mut labels: Vec<Label> = chosen.iter().map(|&i| nbrs[i].0).collect();
            labels.push(base);
            let mut pts: Vec<Point> = chosen.iter().map(|&i| nbrs[i].1.clone()).collect();
            pts.push(bp.clone());
            let s = Simplex::new(pts);
            if let Ok((c, r)) = circumcenter_radius(&s) {
                if r < max_radius && accept(&c) {
                    let empty = index.within(&c, r).iter().all(|(l, q)| labels.contains(l) || q.dist(&c) >= r - tol);
                    if empty {
                        out.insert(sorted(labels));
                    }
                }
            }
        });
    };

    match required {
        Some(l) => {
            if let Some(p) = points.get(&l) {
                visit(l, p);
            }
        }
        None => {
            for (&l, p) in points {
                visit(l, p);
            }
        }
    }
    out
}

/// Delaunay complex of the patch restricted to simplices with an empty
/// circumball centred in `region`, using `patch.eps` as the radius cutoff.
pub fn delaunay_complex(patch: &Patch, region: &Ball) -> DelaunayComplex {
    delaunay_complex_with_cutoff(&patch.points, region, patch.eps, patch.eps)
}

/// As [`delaunay_complex`] with an explicit circumradius cutoff.
///
/// When the sample is `ε`-dense around `region` every empty circumball centred
/// there has radius below `ε`, so `max_radius = ε` loses nothing.
pub fn delaunay_complex_with_cutoff(
    points: &BTreeMap<Label, Point>,
    region: &Ball,
    max_radius: f64,
    eps: f64,
) -> DelaunayComplex {
    let m = region.center.dim();
    let top = empty_ball_simplices(points, max_radius, TAU_BALL * eps, None, |c| region.contains(c));
    DelaunayComplex::from_top(m, top)
}

/// The `m`-simplices of the Delaunay complex that contain `center`.
pub fn delaunay_star(
    points: &BTreeMap<Label, Point>,
    center: Label,
    max_radius: f64,
    eps: f64,
) -> BTreeSet<Vec<Label>> {
    empty_ball_simplices(points, max_radius, TAU_BALL * eps, Some(center), |_| true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCertificate {
    /// Every grid point of the domain lies within `eps` of the sample.
    pub dense_ok: bool,
    /// Pairwise distances are at least `mu · eps`.
    pub separated_ok: bool,
    /// Largest grid-point distance to the sample.
    pub worst_density_distance: f64,
    pub min_separation: f64,
    /// Density radius guaranteed between grid points: worst distance plus `step·√m/2`.
    pub certified_eps: f64,
    pub grid_step: f64,
    pub grid_points: usize,
}

/// Checks that `points` is a `(mu, eps)`-net for `domain`.
///
/// Density is tested on a grid of pitch `grid_step`, which certifies
/// `(eps + grid_step·√m/2)`-density for the continuous domain.
pub fn certify_net(
    points: &BTreeMap<Label, Point>,
    domain: &Ball,
    mu: f64,
    eps: f64,
    grid_step: f64,
) -> NetCertificate {
    let m = domain.center.dim();
    let index = PointIndex::new(points.iter().map(|(&l, p)| (l, p)), eps.max(grid_step));

    let steps = (domain.radius / grid_step).floor() as i64;
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    let mut offs = vec![-steps; m];
    'grid: loop {
        let q = Point(domain.center.0.iter().zip(&offs).map(|(c, o)| c + *o as f64 * grid_step).collect());
        if domain.contains(&q) {
            count += 1;
            worst = worst.max(index.nearest_distance(&q));
        }
        let mut d = 0;
        loop {
            if d == m {
                break 'grid;
            }
            offs[d] += 1;
            if offs[d] <= steps {
                break;
            }
            offs[d] = -steps;
            d += 1;
        }
    }

    let mut min_sep = f64::INFINITY;
    let sep_index = PointIndex::new(points.iter().map(|(&l, p)| (l, p)), (mu * eps).max(1e-300));
    for (l, p) in points {
        for (l2, q) in sep_index.within(p, mu * eps) {
            if l2 != *l {
                min_sep = min_sep.min(p.dist(q));
            }
        }
    }
    if !min_sep.is_finite() {
        // Nothing closer than the threshold; report the true minimum.
        let all: Vec<_> = points.values().collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                min_sep = min_sep.min(all[i].dist(all[j]));
            }
        }
    }

    NetCertificate {
        dense_ok: worst < eps,
        separated_ok: min_sep >= mu * eps,
        worst_density_distance: worst,
        min_separation: min_sep,
        certified_eps: worst + grid_step * (m as f64).sqrt() / 2.0,
        grid_step,
        grid_points: count,
    }
}

/// Net parameters after a `ρ·ε`-perturbation: `ε' = (1+ρ)ε`, `μ' = (μ − 2ρ)/(1+ρ)`.
pub fn perturbed_net_params(mu: f64, eps: f64, rho: f64) -> (f64, f64) {
    ((mu - 2.0 * rho) / (1.0 + rho), (1.0 + rho) * eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(points: &[[f64; 2]]) -> BTreeMap<Label, Point> {
        points.iter().enumerate().map(|(i, p)| (i, Point::from(*p))).collect()
    }

    #[test]
    fn square_has_both_diagonals() {
        let pts = map(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let region = Ball::new([0.5, 0.5].into(), 10.0);
        let del = delaunay_complex_with_cutoff(&pts, &region, 10.0, 1.0);
        assert_eq!(del.top.len(), 4);
        assert_eq!(del.count(1), 6);
    }

    #[test]
    fn wheel_star() {
        let mut pts = vec![[0.0, 0.0]];
        for k in 0..6 {
            let a = k as f64 * std::f64::consts::PI / 3.0;
            pts.push([a.cos(), a.sin()]);
        }
        let pts = map(&pts);
        let star = delaunay_star(&pts, 0, 1.0, 1.0);
        assert_eq!(star.len(), 6);
        assert!(star.iter().all(|s| s.contains(&0)));
    }

    #[test]
    fn hex_lattice_net() {
        let h = 0.1;
        let mut pts = BTreeMap::new();
        let mut l = 0;
        for r in -20..=20 {
            for c in -20..=20 {
                let x = c as f64 * h + if r % 2 == 0 { 0.0 } else { h / 2.0 };
                let y = r as f64 * h * 3f64.sqrt() / 2.0;
                pts.insert(l, Point::from([x, y]));
                l += 1;
            }
        }
        let domain = Ball::new([0.0, 0.0].into(), 1.0);
        let eps = h / 3f64.sqrt() * 1.001;
        let cert = certify_net(&pts, &domain, 0.5, eps, h / 20.0);
        assert!(cert.dense_ok, "{cert:?}");
        assert!(cert.separated_ok);
        assert!((cert.min_separation - h).abs() < 1e-12);
    }

    #[test]
    fn single_point_is_not_dense() {
        let pts = map(&[[0.0, 0.0]]);
        let cert = certify_net(&pts, &Ball::new([0.0, 0.0].into(), 2.0), 0.5, 1.0, 0.1);
        assert!(!cert.dense_ok);
    }

    #[test]
    fn duplicate_is_not_separated() {
        let pts = map(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]);
        let cert = certify_net(&pts, &Ball::new([0.0, 0.0].into(), 0.5), 0.5, 1.0, 0.1);
        assert!(!cert.separated_ok);
        assert_eq!(cert.min_separation, 0.0);
    }

    #[test]
    fn perturbed_params() {
        let (mu, eps) = perturbed_net_params(0.5, 1.0, 0.1);
        assert!((mu - 0.3 / 1.1).abs() < 1e-15);
        assert!((eps - 1.1).abs() < 1e-15);
    }

    #[test]
    fn protection_gap_of_square_is_zero() {
        let pts = map(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let g = protection_gap(&pts, &[0, 1, 2]).unwrap();
        assert!(g.abs() < 1e-12);
        assert!(!is_delta_protected(&pts, &[0, 1, 2], 1e-6));
    }

    #[test]
    fn index_range_query() {
        let pts = map(&[[0.0, 0.0], [0.3, 0.0], [2.0, 2.0], [-0.2, -0.1]]);
        let idx = PointIndex::new(pts.iter().map(|(&l, p)| (l, p)), 0.25);
        let mut near: Vec<_> = idx.within(&[0.0, 0.0].into(), 0.31).iter().map(|(l, _)| *l).collect();
        near.sort();
        assert_eq!(near, vec![0, 1, 3]);
        assert!((idx.nearest_distance(&[1.9, 2.0].into()) - 0.1).abs() < 1e-12);
    }
}

//! Combinatorial manifold certification.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AbstractComplex;
use crate::simplex::Label;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifoldReport {
    pub is_pure: bool,
    /// Every `(m−1)`-simplex lies in exactly two `m`-simplices.
    pub ridge_degrees_ok: bool,
    /// Every vertex link is a combinatorial `(m−1)`-sphere (for `m ≤ 3`).
    pub links_ok: bool,
    /// Set when `m > 3`: links are only checked to be connected closed pseudo-manifolds.
    pub partial: bool,
    /// Filled in by callers that hold the chart stars.
    pub star_consistency_ok: Option<bool>,
    pub euler_characteristic: i64,
    pub bad_ridges: Vec<Vec<Label>>,
    pub bad_links: Vec<Label>,
}

impl ManifoldReport {
    pub fn ok(&self) -> bool {
        self.is_pure && self.ridge_degrees_ok && self.links_ok && self.star_consistency_ok != Some(false)
    }
}

pub fn manifold_check(c: &AbstractComplex) -> ManifoldReport {
    let m = c.m;
    let top: Vec<Vec<Label>> = c.top().cloned().collect();
    let closure = AbstractComplex::from_top(m, top.iter().cloned());
    let is_pure = !top.is_empty() && closure.simplices == c.simplices;

    let ridge_count = facet_degrees(&top);
    let bad_ridges: Vec<Vec<Label>> = c
        .of_dim(m.saturating_sub(1))
        .filter(|r| m > 0 && ridge_count.get(*r).copied().unwrap_or(0) != 2)
        .cloned()
        .collect();

    let mut links: BTreeMap<Label, Vec<Vec<Label>>> = BTreeMap::new();
    for s in &top {
        for &v in s {
            links.entry(v).or_default().push(s.iter().copied().filter(|&u| u != v).collect());
        }
    }
    let bad_links: Vec<Label> =
        links.iter().filter(|(_, l)| !is_sphere(l, m.saturating_sub(1))).map(|(&v, _)| v).collect();

    ManifoldReport {
        is_pure,
        ridge_degrees_ok: m > 0 && bad_ridges.is_empty() && !top.is_empty(),
        links_ok: m > 0 && bad_links.is_empty() && !top.is_empty(),
        partial: m > 3,
        star_consistency_ok: None,
        euler_characteristic: c.euler_characteristic(),
        bad_ridges,
        bad_links,
    }
}

/// Number of facets containing each codimension-one face.
fn facet_degrees(facets: &[Vec<Label>]) -> BTreeMap<Vec<Label>, usize> {
    let mut count = BTreeMap::new();
    for s in facets {
        for skip in 0..s.len() {
            let r: Vec<Label> = s.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, &v)| v).collect();
            *count.entry(r).or_insert(0) += 1;
        }
    }
    count
}

fn connected(facets: &[Vec<Label>]) -> bool {
    let verts: BTreeSet<Label> = facets.iter().flatten().copied().collect();
    let Some(&start) = verts.iter().next() else {
        return false;
    };
    let mut adj: BTreeMap<Label, BTreeSet<Label>> = BTreeMap::new();
    for s in facets {
        for &a in s {
            adj.entry(a).or_default().extend(s.iter().copied());
        }
    }
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &u in &adj[&v] {
            if seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen.len() == verts.len()
}

/// Whether the pure complex spanned by `facets` is a combinatorial `d`-sphere.
///
/// Exact for `d ≤ 2`. Above that only connectivity and the closed
/// pseudo-manifold condition are tested.
fn is_sphere(facets: &[Vec<Label>], d: usize) -> bool {
    if facets.iter().any(|s| s.len() != d + 1) {
        return false;
    }
    if d == 0 {
        return facets.len() == 2;
    }
    if !connected(facets) || facet_degrees(facets).values().any(|&n| n != 2) {
        return false;
    }
    match d {
        // A connected 2-regular graph is a single cycle.
        1 => true,
        2 => {
            let c = AbstractComplex::from_top(2, facets.iter().cloned());
            c.euler_characteristic() == 2 && c.vertices().iter().all(|&v| is_sphere(&link(facets, v), 1))
        }
        _ => true,
    }
}

fn link(facets: &[Vec<Label>], v: Label) -> Vec<Vec<Label>> {
    facets.iter().filter(|s| s.contains(&v)).map(|s| s.iter().copied().filter(|&u| u != v).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn octahedron() -> Vec<Vec<Label>> {
        // Poles 0 and 5 over the square 1-2-3-4.
        let mut t = Vec::new();
        for k in 1..=4 {
            let n = k % 4 + 1;
            t.push(vec![0, k, n]);
            t.push(vec![5, k, n]);
        }
        t
    }

    fn tetra_boundary(v: [Label; 4]) -> Vec<Vec<Label>> {
        (0..4).map(|skip| (0..4).filter(|&k| k != skip).map(|k| v[k]).collect()).collect()
    }

    #[test]
    fn two_triangles_have_boundary_ridges() {
        let c = AbstractComplex::from_top(2, vec![vec![0, 1, 2], vec![1, 2, 3]]);
        let r = manifold_check(&c);
        assert!(r.is_pure);
        assert!(!r.ridge_degrees_ok);
        assert_eq!(r.bad_ridges.len(), 4);
    }

    #[test]
    fn octahedron_is_a_sphere() {
        let r = manifold_check(&AbstractComplex::from_top(2, octahedron()));
        assert!(r.ok(), "{r:?}");
        assert_eq!(r.euler_characteristic, 2);
        assert!(!r.partial);
    }

    #[test]
    fn pinched_tetrahedra_fail_at_the_shared_vertex() {
        let mut t = tetra_boundary([0, 1, 2, 3]);
        t.extend(tetra_boundary([0, 4, 5, 6]));
        let r = manifold_check(&AbstractComplex::from_top(2, t));
        assert!(r.ridge_degrees_ok);
        assert!(!r.links_ok);
        assert_eq!(r.bad_links, vec![0]);
        assert_eq!(r.euler_characteristic, 3);
    }

    #[test]
    fn boundary_of_four_simplex_is_a_three_sphere() {
        let v = [0, 1, 2, 3, 4];
        let t: Vec<Vec<Label>> = (0..5).map(|skip| (0..5).filter(|&k| k != skip).map(|k| v[k]).collect()).collect();
        let r = manifold_check(&AbstractComplex::from_top(3, t));
        assert!(r.ok(), "{r:?}");
        assert_eq!(r.euler_characteristic, 0);
    }

    #[test]
    fn extra_edge_breaks_purity() {
        let mut c = AbstractComplex::from_top(2, octahedron());
        c.simplices.insert(vec![0, 5]);
        c.simplices.insert(vec![0]);
        assert!(!manifold_check(&c).is_pure);
    }

    #[test]
    fn circle_links_are_point_pairs() {
        let c = AbstractComplex::from_top(1, vec![vec![0, 1], vec![1, 2], vec![0, 2]]);
        assert!(manifold_check(&c).ok());
        let path = AbstractComplex::from_top(1, vec![vec![0, 1], vec![1, 2]]);
        assert!(!manifold_check(&path).links_ok);
    }
}

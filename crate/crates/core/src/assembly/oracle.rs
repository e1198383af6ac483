//! Brute-force Delaunay triangulation of the flat torus, for comparison.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AbstractComplex;
use crate::simplex::Label;

/// Longest edge considered by the oracle.
const MAX_EDGE: f64 = 0.25;

/// `m`-simplices present in one complex only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleDiff {
    pub only_first: Vec<Vec<Label>>,
    pub only_second: Vec<Vec<Label>>,
}

impl OracleDiff {
    pub fn is_empty(&self) -> bool {
        self.only_first.is_empty() && self.only_second.is_empty()
    }

    pub fn len(&self) -> usize {
        self.only_first.len() + self.only_second.len()
    }
}

pub fn oracle_compare(c: &AbstractComplex, oracle: &AbstractComplex) -> OracleDiff {
    let a: BTreeSet<&Vec<Label>> = c.top().collect();
    let b: BTreeSet<&Vec<Label>> = oracle.top().collect();
    OracleDiff {
        only_first: a.difference(&b).map(|s| (*s).clone()).collect(),
        only_second: b.difference(&a).map(|s| (*s).clone()).collect(),
    }
}

/// `> 0` iff `d` lies inside the circle through `a, b, c`, taken counter-clockwise.
fn incircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let al = adx * adx + ady * ady;
    let bl = bdx * bdx + bdy * bdy;
    let cl = cdx * cdx + cdy * cdy;
    adx * (bdy * cl - bl * cdy) - ady * (bdx * cl - bl * cdx) + al * (bdx * cdy - bdy * cdx)
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn d2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Delaunay triangles of a sample of the unit torus `[0, 1)²`.
///
/// The sample is lifted to the 3×3 block of translates and every triangle with
/// a vertex in the base copy and edges at most `1/4` is tested against all
/// lifted points. Exact when every empty disk of the sample has radius below
/// `1/8`, which holds once the covering radius does.
pub fn torus_delaunay_oracle(points: &BTreeMap<Label, [f64; 2]>) -> AbstractComplex {
    let mut lifted: Vec<(Label, [f64; 2])> = Vec::with_capacity(9 * points.len());
    for dx in [-1.0, 0.0, 1.0] {
        for dy in [-1.0, 0.0, 1.0] {
            for (&l, p) in points {
                lifted.push((l, [p[0] + dx, p[1] + dy]));
            }
        }
    }
    let reach2 = MAX_EDGE * MAX_EDGE;
    let mut tris = BTreeSet::new();
    for (&la, &a) in points {
        let near: Vec<usize> =
            (0..lifted.len()).filter(|&k| lifted[k].0 != la && d2(lifted[k].1, a) <= reach2).collect();
        let around: Vec<usize> = (0..lifted.len()).filter(|&k| d2(lifted[k].1, a) <= 4.0 * reach2).collect();
        for (x, &kb) in near.iter().enumerate() {
            for &kc in &near[x + 1..] {
                let ((lb, b), (lc, c)) = (lifted[kb], lifted[kc]);
                if lb == lc || d2(b, c) > reach2 {
                    continue;
                }
                let (b, c) = match orient(a, b, c) {
                    o if o > 0.0 => (b, c),
                    o if o < 0.0 => (c, b),
                    _ => continue,
                };
                let empty = around.iter().all(|&k| {
                    let q = lifted[k].1;
                    q == a || q == b || q == c || incircle(a, b, c, q) <= 0.0
                });
                if empty {
                    let mut t = vec![la, lb, lc];
                    t.sort_unstable();
                    tris.insert(t);
                }
            }
        }
    }
    AbstractComplex::from_top(2, tris)
}

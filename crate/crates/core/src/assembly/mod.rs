//! Gluing chart stars into a manifold complex.
//!
//! The star of every vertex is taken from the Delaunay triangulation of its
//! own chart. Stars that agree on every shared edge glue into an abstract
//! simplicial complex, which then receives edge lengths averaged over the two
//! charts of each edge.

mod export;
mod manifold;
mod metric;
mod oracle;

pub use export::{complex_from_json, complex_to_json, vertex_coordinates, write_off, ComplexFile, ExportError};
pub use manifold::{manifold_check, ManifoldReport};
pub use metric::{assign_pl_metric, max_geodesic_error, realizability, PlMetric, Realizability};
pub use oracle::{oracle_compare, torus_delaunay_oracle, OracleDiff};

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::Atlas;
use crate::patch::delaunay_star;
use crate::simplex::Label;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("stars disagree on {} edge(s), first {:?}", .0.len(), .0.first())]
    InconsistentStars(Vec<(Label, Label)>),
    #[error("{} simplex(es) have no Euclidean realisation, first {:?}", .0.len(), .0.first())]
    NotRealizable(Vec<Vec<Label>>),
}

/// Top simplices containing each vertex, as ascending label lists.
pub type Stars = BTreeMap<Label, BTreeSet<Vec<Label>>>;

/// Face-closed set of simplices on labels, with the `m`-simplices as its facets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractComplex {
    pub m: usize,
    pub simplices: BTreeSet<Vec<Label>>,
}

impl AbstractComplex {
    /// The face closure of `top`.
    pub fn from_top(m: usize, top: impl IntoIterator<Item = Vec<Label>>) -> Self {
        let mut simplices = BTreeSet::new();
        for mut s in top {
            s.sort_unstable();
            let n = s.len();
            for mask in 1u32..(1u32 << n) {
                simplices.insert((0..n).filter(|b| mask & (1 << b) != 0).map(|b| s[b]).collect());
            }
        }
        Self { m, simplices }
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Simplices of dimension `dim`.
    pub fn of_dim(&self, dim: usize) -> impl Iterator<Item = &Vec<Label>> {
        self.simplices.iter().filter(move |s| s.len() == dim + 1)
    }

    pub fn top(&self) -> impl Iterator<Item = &Vec<Label>> {
        self.of_dim(self.m)
    }

    pub fn count(&self, dim: usize) -> usize {
        self.of_dim(dim).count()
    }

    pub fn vertices(&self) -> Vec<Label> {
        self.of_dim(0).map(|s| s[0]).collect()
    }

    /// `Σ (−1)^k · #k-simplices`.
    pub fn euler_characteristic(&self) -> i64 {
        self.simplices.iter().map(|s| if s.len() % 2 == 1 { 1 } else { -1 }).sum()
    }

    /// Top simplices containing `v`.
    pub fn star(&self, v: Label) -> BTreeSet<Vec<Label>> {
        self.top().filter(|s| s.contains(&v)).cloned().collect()
    }
}

/// Star of `p'_i` in the Delaunay triangulation of chart `i`.
///
/// Empty balls through `p'_i` of radius below `2ε_i` lie in `B(p_i, 4ε_i)`,
/// where the chart is a dense sample, so the cutoff loses nothing.
pub fn star_in_chart(a: &Atlas, i: Label) -> BTreeSet<Vec<Label>> {
    let patch = &a.patches[&i];
    delaunay_star(&patch.points, i, 2.0 * patch.eps, patch.eps)
}

pub fn build_stars(a: &Atlas) -> Stars {
    let labels: Vec<Label> = a.labels().collect();
    labels.par_iter().map(|&i| (i, star_in_chart(a, i))).collect()
}

fn containing(star: &BTreeSet<Vec<Label>>, v: Label) -> BTreeSet<&Vec<Label>> {
    star.iter().filter(|t| t.contains(&v)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub edges_checked: usize,
    /// Edges `(i, j)` of `star(i)` on which `star(i)` and `star(j)` disagree.
    pub failures: Vec<(Label, Label)>,
}

impl ConsistencyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// For every edge `{i, j}` of `star(i)`, the simplices of `star(i)` containing
/// `j` must be those of `star(j)` containing `i`. Vertices without a star are
/// not checked.
pub fn check_star_consistency(stars: &Stars) -> ConsistencyReport {
    let mut rep = ConsistencyReport::default();
    for (&i, star) in stars {
        let nbrs: BTreeSet<Label> = star.iter().flatten().copied().filter(|&j| j != i).collect();
        for j in nbrs {
            let Some(other) = stars.get(&j) else {
                continue;
            };
            rep.edges_checked += 1;
            if containing(star, j) != containing(other, i) {
                rep.failures.push((i, j));
            }
        }
    }
    rep
}

/// The union of consistent stars; every top simplex must lie in the star of
/// each of its vertices that has one.
pub fn assemble(m: usize, stars: &Stars) -> Result<AbstractComplex, AssemblyError> {
    let mut bad = BTreeSet::new();
    for (&i, star) in stars {
        for s in star {
            for &v in s {
                if stars.get(&v).is_some_and(|sv| !sv.contains(s)) {
                    bad.insert((i.min(v), i.max(v)));
                }
            }
        }
    }
    if !bad.is_empty() {
        return Err(AssemblyError::InconsistentStars(bad.into_iter().collect()));
    }
    Ok(AbstractComplex::from_top(m, stars.values().flatten().cloned()))
}

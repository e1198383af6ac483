//! Piecewise-flat metric on the assembled complex.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{AbstractComplex, AssemblyError};
use crate::atlas::{Atlas, Embedding};
use crate::simplex::{gram_from_edge_lengths, min_eigenvalue, EdgeLengths, Label};

/// Normalised Gram eigenvalue below which a simplex counts as degenerate.
pub const MIN_GRAM_EIGENVALUE: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlMetric {
    pub edge_lengths: BTreeMap<(Label, Label), f64>,
    /// Edges whose length came from one chart only.
    pub fallbacks: Vec<(Label, Label)>,
    /// Smallest Gram eigenvalue over `max ℓ²`, per top simplex.
    pub min_gram_eigenvalue: Vec<(Vec<Label>, f64)>,
}

impl PlMetric {
    pub fn length(&self, i: Label, j: Label) -> Option<f64> {
        self.edge_lengths.get(&(i.min(j), i.max(j))).copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Realizability {
    pub min_gram_eigenvalue: Vec<(Vec<Label>, f64)>,
    pub failures: Vec<Vec<Label>>,
}

/// Checks every top simplex of `c` for a Euclidean realisation with the given lengths.
pub fn realizability(c: &AbstractComplex, lengths: &BTreeMap<(Label, Label), f64>) -> Realizability {
    let mut out = Realizability::default();
    for s in c.top() {
        let e = EdgeLengths::from_fn(s.len(), |a, b| {
            lengths.get(&(s[a].min(s[b]), s[a].max(s[b]))).copied().unwrap_or(f64::NAN)
        });
        let known = (0..s.len()).all(|a| (a + 1..s.len()).all(|b| e.get(a, b).is_finite()));
        if !known {
            out.failures.push(s.clone());
            out.min_gram_eigenvalue.push((s.clone(), f64::NAN));
            continue;
        }
        let g = gram_from_edge_lengths(&e);
        let scale = e.max().powi(2);
        let lam = if scale > 0.0 { min_eigenvalue(&g.gram) / scale } else { f64::NAN };
        if !(g.positive_definite && lam > MIN_GRAM_EIGENVALUE) {
            out.failures.push(s.clone());
        }
        out.min_gram_eigenvalue.push((s.clone(), lam));
    }
    out
}

/// Length `½(d_i + d_j)` of every edge, the two chart distances between its endpoints.
///
/// When chart `j` lacks vertex `i` the length falls back to `d_i`.
pub fn assign_pl_metric(a: &Atlas, c: &AbstractComplex) -> Result<PlMetric, AssemblyError> {
    let mut metric = PlMetric::default();
    let chart_dist = |i: Label, j: Label| {
        let p = a.patches.get(&i)?;
        Some(p.points.get(&i)?.dist(p.points.get(&j)?))
    };
    for e in c.of_dim(1) {
        let (i, j) = (e[0], e[1]);
        let l = match (chart_dist(i, j), chart_dist(j, i)) {
            (Some(di), Some(dj)) => 0.5 * (di + dj),
            (Some(d), None) | (None, Some(d)) => {
                warn!("edge ({i}, {j}) is visible in one chart only");
                metric.fallbacks.push((i, j));
                d
            }
            (None, None) => return Err(AssemblyError::NotRealizable(vec![e.clone()])),
        };
        metric.edge_lengths.insert((i, j), l);
    }
    let r = realizability(c, &metric.edge_lengths);
    if !r.failures.is_empty() {
        return Err(AssemblyError::NotRealizable(r.failures));
    }
    metric.min_gram_eigenvalue = r.min_gram_eigenvalue;
    Ok(metric)
}

/// Largest `|ℓ_ij − d_M(p'_i, p'_j)| / ℓ_ij` over the edges, against the
/// closed-form distance of the built-in model. `None` without an embedding.
pub fn max_geodesic_error(a: &Atlas, metric: &PlMetric) -> Option<f64> {
    let emb = a.embedding.as_ref()?;
    let mut worst: f64 = 0.0;
    for (&(i, j), &l) in &metric.edge_lengths {
        let (x, y) = (a.ambient_position(i)?, a.ambient_position(j)?);
        let d = match emb {
            Embedding::FlatTorus => x
                .iter()
                .zip(&y)
                .map(|(u, v)| {
                    let t = (u - v).rem_euclid(1.0);
                    t.min(1.0 - t).powi(2)
                })
                .sum::<f64>()
                .sqrt(),
            Embedding::Sphere { radius, .. } => {
                let dot: f64 = x.iter().zip(&y).map(|(u, v)| u * v).sum();
                radius * (dot / (radius * radius)).clamp(-1.0, 1.0).acos()
            }
        };
        worst = worst.max((l - d).abs() / l);
    }
    Some(worst)
}

//! Gram matrices of abstract simplices given by edge lengths.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Pivot tolerance of the Cholesky attempt, relative to the largest squared edge length.
pub const TAU_PSD: f64 = 1e-12;

/// Edge lengths `ℓ_ij` of an abstract `k`-simplex, stored as a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLengths {
    n: usize,
    data: Vec<f64>,
}

impl EdgeLengths {
    /// All lengths zero, for a simplex with `n` vertices.
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut e = Self::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                e.set(i, j, f(i, j));
            }
        }
        e
    }

    /// Euclidean lengths of a point configuration.
    pub fn from_points(points: &[super::Point]) -> Self {
        Self::from_fn(points.len(), |i, j| points[i].dist(&points[j]))
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, l: f64) {
        self.data[i * self.n + j] = l;
        self.data[j * self.n + i] = l;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct GramResult {
    /// `G_ij = ½(ℓ_0i² + ℓ_0j² − ℓ_ij²)`, `k × k`.
    pub gram: DMatrix<f64>,
    pub positive_definite: bool,
    /// Upper-triangular `R` with `RᵀR = G`; its columns realise `p_i − p_0`.
    pub factor: Option<DMatrix<f64>>,
    /// Smallest pivot reached before success or failure.
    pub min_pivot: f64,
}

/// Builds the Gram matrix of an abstract simplex and decides whether it is realisable.
///
/// Realisability is decided by a Cholesky factorisation that fails as soon as a
/// pivot drops below `TAU_PSD · max ℓ²`.
pub fn gram_from_edge_lengths(lengths: &EdgeLengths) -> GramResult {
    let k = lengths.num_vertices().saturating_sub(1);
    let gram = DMatrix::from_fn(k, k, |r, c| {
        let (i, j) = (r + 1, c + 1);
        let l0i = lengths.get(0, i);
        let l0j = lengths.get(0, j);
        let lij = if i == j { 0.0 } else { lengths.get(i, j) };
        0.5 * (l0i * l0i + l0j * l0j - lij * lij)
    });
    let scale = lengths.max().powi(2);
    let tol = TAU_PSD * scale;

    let mut r = DMatrix::<f64>::zeros(k, k);
    let mut min_pivot = f64::INFINITY;
    let mut ok = k > 0 && scale > 0.0;
    for j in 0..k {
        if !ok {
            break;
        }
        let mut d = gram[(j, j)];
        for l in 0..j {
            d -= r[(l, j)] * r[(l, j)];
        }
        min_pivot = min_pivot.min(d);
        if !(d > tol) {
            ok = false;
            break;
        }
        let rjj = d.sqrt();
        r[(j, j)] = rjj;
        for c in j + 1..k {
            let mut s = gram[(j, c)];
            for l in 0..j {
                s -= r[(l, j)] * r[(l, c)];
            }
            r[(j, c)] = s / rjj;
        }
    }
    if k == 0 {
        min_pivot = 0.0;
    }
    GramResult { gram, positive_definite: ok, factor: ok.then_some(r), min_pivot }
}

/// Smallest eigenvalue of a symmetric matrix (0 for an empty one).
pub fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    g.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lengths3(l01: f64, l02: f64, l12: f64) -> EdgeLengths {
        let mut e = EdgeLengths::zeros(3);
        e.set(0, 1, l01);
        e.set(0, 2, l02);
        e.set(1, 2, l12);
        e
    }

    #[test]
    fn three_four_five() {
        let g = gram_from_edge_lengths(&lengths3(3.0, 4.0, 5.0));
        assert!(g.positive_definite);
        let r = g.factor.unwrap();
        let c1 = r.column(0);
        let c2 = r.column(1);
        assert!((c1.norm() - 3.0).abs() < 1e-12);
        assert!((c2.norm() - 4.0).abs() < 1e-12);
        assert!(((c1 - c2).norm() - 5.0).abs() < 1e-12);
        assert!((r.transpose() * &r - &g.gram).norm() < 1e-12);
    }

    #[test]
    fn flat_triangle_is_not_pd() {
        let g = gram_from_edge_lengths(&lengths3(1.0, 1.0, 2.0));
        assert!(!g.positive_definite);
        assert!(g.factor.is_none());
    }

    #[test]
    fn triangle_inequality_violation() {
        let g = gram_from_edge_lengths(&lengths3(1.0, 1.0, 3.0));
        assert!(!g.positive_definite);
        assert!(min_eigenvalue(&g.gram) < 0.0);
    }
}

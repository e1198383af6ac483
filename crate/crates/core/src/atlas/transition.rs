//! Transition maps between charts and their domains.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::AtlasError;
use crate::patch::Ball;
use crate::simplex::{Label, Point};

/// A union of intersections of closed balls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub parts: Vec<Vec<Ball>>,
}

impl Domain {
    pub fn intersection(balls: Vec<Ball>) -> Self {
        Self { parts: vec![balls] }
    }

    pub fn with_part(mut self, balls: Vec<Ball>) -> Self {
        self.parts.push(balls);
        self
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.parts.iter().any(|part| part.iter().all(|b| b.contains(x)))
    }
}

/// Tangent frame of a sphere of radius `radius` at `normal · radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub radius: f64,
    pub normal: [f64; 3],
    pub e1: [f64; 3],
    pub e2: [f64; 3],
}

impl Frame {
    /// Frame at the point `p` (any non-zero vector; it is projected to the sphere).
    pub fn at(p: [f64; 3], radius: f64) -> Self {
        let n = Vector3::from(p).normalize();
        let a = if n.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        let e1 = (a - n * a.dot(&n)).normalize();
        let e2 = n.cross(&e1);
        Self { radius, normal: n.into(), e1: e1.into(), e2: e2.into() }
    }

    /// Exponential map: chart coordinates to a point of the sphere in `R^3`.
    pub fn exp(&self, x: &Point) -> Point {
        let n = Vector3::from(self.normal);
        let v = Vector3::from(self.e1) * x.0[0] + Vector3::from(self.e2) * x.0[1];
        let s = v.norm();
        let q = if s == 0.0 {
            n
        } else {
            let th = s / self.radius;
            n * th.cos() + v * (th.sin() / s)
        };
        Point((q * self.radius).iter().copied().collect())
    }

    /// Inverse exponential map; `None` at (or numerically at) the antipode.
    pub fn log(&self, q: &Point) -> Option<Point> {
        let n = Vector3::from(self.normal);
        let qh = Vector3::new(q.0[0], q.0[1], q.0[2]).normalize();
        let c = qh.dot(&n).clamp(-1.0, 1.0);
        let w = qh - n * c;
        let sw = w.norm();
        let th = sw.atan2(c);
        if th > std::f64::consts::PI - 1e-9 {
            return None;
        }
        if sw == 0.0 {
            return Some(Point(vec![0.0, 0.0]));
        }
        let s = self.radius * th / sw;
        Some(Point(vec![s * w.dot(&Vector3::from(self.e1)), s * w.dot(&Vector3::from(self.e2))]))
    }
}

/// The point map of a transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum TransitionMap {
    /// `x ↦ x + offset`.
    Translation { offset: Vec<f64> },
    /// `x ↦ Ax + b`, `A` stored row-major. Isometric when `A` is orthogonal.
    Rigid { linear: Vec<Vec<f64>>, translation: Vec<f64> },
    /// Matched point pairs, interpolated by inverse-distance weighting of the displacements.
    Tabulated { source: Vec<Vec<f64>>, target: Vec<Vec<f64>> },
    /// `log_to ∘ exp_from` between two exponential charts of a sphere.
    ExpSphere { from: Frame, to: Frame },
}

impl TransitionMap {
    pub fn apply(&self, x: &Point) -> Option<Point> {
        match self {
            TransitionMap::Translation { offset } => Some(Point(x.0.iter().zip(offset).map(|(a, b)| a + b).collect())),
            TransitionMap::Rigid { linear, translation } => Some(Point(
                linear
                    .iter()
                    .zip(translation)
                    .map(|(row, t)| row.iter().zip(&x.0).map(|(a, b)| a * b).sum::<f64>() + t)
                    .collect(),
            )),
            TransitionMap::Tabulated { source, target } => idw(source, target, x),
            TransitionMap::ExpSphere { from, to } => to.log(&from.exp(x)),
        }
    }

    /// The map in the opposite direction.
    pub fn inverse(&self) -> Option<TransitionMap> {
        Some(match self {
            TransitionMap::Translation { offset } => {
                TransitionMap::Translation { offset: offset.iter().map(|o| -o).collect() }
            }
            TransitionMap::Rigid { linear, translation } => {
                let m = translation.len();
                let a = DMatrix::from_fn(m, m, |r, c| linear[r][c]);
                let inv = a.try_inverse()?;
                let t = -(&inv * DVector::from_column_slice(translation));
                TransitionMap::Rigid {
                    linear: (0..m).map(|r| (0..m).map(|c| inv[(r, c)]).collect()).collect(),
                    translation: t.iter().copied().collect(),
                }
            }
            TransitionMap::Tabulated { source, target } => {
                TransitionMap::Tabulated { source: target.clone(), target: source.clone() }
            }
            TransitionMap::ExpSphere { from, to } => TransitionMap::ExpSphere { from: to.clone(), to: from.clone() },
        })
    }
}

/// Inverse-distance-weighted displacement interpolation (power 2); exact at table points.
fn idw(source: &[Vec<f64>], target: &[Vec<f64>], x: &Point) -> Option<Point> {
    if source.is_empty() {
        return None;
    }
    let m = x.dim();
    let mut acc = vec![0.0; m];
    let mut wsum = 0.0;
    for (s, t) in source.iter().zip(target) {
        let d2: f64 = s.iter().zip(&x.0).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 == 0.0 {
            return Some(Point(t.clone()));
        }
        let w = 1.0 / d2;
        wsum += w;
        for k in 0..m {
            acc[k] += w * (t[k] - s[k]);
        }
    }
    Some(Point((0..m).map(|k| x.0[k] + acc[k] / wsum).collect()))
}

/// `φ_ij` together with its domain `U_ij` (in chart-`i` coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub i: Label,
    pub j: Label,
    pub map: TransitionMap,
    pub domain: Domain,
}

impl Transition {
    pub fn forward(&self, x: &Point) -> Result<Point, AtlasError> {
        if !self.domain.contains(x) {
            return Err(AtlasError::OutOfDomain { i: self.i, j: self.j });
        }
        self.map.apply(x).ok_or(AtlasError::OutOfDomain { i: self.i, j: self.j })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_log_round_trip() {
        let f = Frame::at([0.3, -0.2, 0.9], 2.0);
        for x in [[0.0, 0.0], [0.5, -0.1], [1.5, 2.0]] {
            let p = Point::from(x);
            let back = f.log(&f.exp(&p)).unwrap();
            assert!(back.dist(&p) < 1e-12);
            assert!((f.exp(&p).norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn antipode_is_out_of_domain() {
        let f = Frame::at([0.0, 0.0, 1.0], 1.0);
        assert!(f.log(&Point(vec![0.0, 0.0, -1.0])).is_none());
    }

    #[test]
    fn same_centre_charts_differ_by_rotation() {
        let a = Frame::at([0.0, 0.0, 1.0], 1.0);
        let mut b = a.clone();
        // Rotate the tangent frame by 90 degrees.
        b.e1 = a.e2;
        b.e2 = [-a.e1[0], -a.e1[1], -a.e1[2]];
        let map = TransitionMap::ExpSphere { from: a, to: b };
        let x = Point::from([0.3, 0.4]);
        let y = Point::from([-0.2, 0.1]);
        let fx = map.apply(&x).unwrap();
        let fy = map.apply(&y).unwrap();
        assert!((fx.dist(&fy) - x.dist(&y)).abs() < 1e-12);
        assert!((fx.norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tabulated_is_exact_on_table_and_translation_between() {
        let source = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let target: Vec<Vec<f64>> = source.iter().map(|s| vec![s[0] + 2.0, s[1] - 1.0]).collect();
        let map = TransitionMap::Tabulated { source, target };
        let y = map.apply(&Point::from([1.0, 0.0])).unwrap();
        assert_eq!(y.0, vec![3.0, -1.0]);
        let y = map.apply(&Point::from([0.3, 0.3])).unwrap();
        assert!(y.dist(&Point::from([2.3, -0.7])) < 1e-12);
    }

    #[test]
    fn rigid_inverse() {
        let map = TransitionMap::Rigid { linear: vec![vec![0.0, -1.0], vec![1.0, 0.0]], translation: vec![1.0, 2.0] };
        let inv = map.inverse().unwrap();
        let x = Point::from([0.7, -0.3]);
        assert!(inv.apply(&map.apply(&x).unwrap()).unwrap().dist(&x) < 1e-12);
    }

    #[test]
    fn domain_union() {
        let d = Domain::intersection(vec![Ball::new([0.0, 0.0].into(), 1.0), Ball::new([1.0, 0.0].into(), 1.0)])
            .with_part(vec![Ball::new([-1.0, 0.0].into(), 0.1)]);
        assert!(d.contains(&[0.5, 0.0].into()));
        assert!(d.contains(&[-1.05, 0.0].into()));
        assert!(!d.contains(&[-0.5, 0.0].into()));
    }
}

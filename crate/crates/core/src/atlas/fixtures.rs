//! Built-in atlases of the flat torus and the round sphere.
//!
//! Samples are produced by dart throwing with annulus candidates, truncated
//! to exactly `n` points and then evened out by Lloyd relaxation. The sampling
//! radius `ε` is measured afterwards, so the declared net parameters are
//! certified rather than assumed.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::Rng;

use super::{Atlas, AtlasError, Domain, Embedding, Frame, Transition, TransitionMap};
use crate::patch::{certify_net, Ball, Patch};
use crate::sampling::{rng_from_seed, unit_vector, Rng64};
use crate::simplex::{Label, Point};

const DART_ATTEMPTS: usize = 30;
const LLOYD_ITERATIONS: usize = 60;
const MIN_POINTS: usize = 20;

/// Minimal-image difference on the unit circle, in `[-0.5, 0.5)`.
fn wrap(d: f64) -> f64 {
    d - (d + 0.5).floor()
}

fn torus_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
}

/// Periodic bucket grid over the unit square.
struct TorusGrid {
    g: usize,
    cells: Vec<Vec<usize>>,
}

impl TorusGrid {
    fn new(cell: f64) -> Self {
        let g = ((1.0 / cell).floor() as usize).max(1);
        Self { g, cells: vec![Vec::new(); g * g] }
    }

    fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let c = |x: f64| ((x.rem_euclid(1.0) * self.g as f64) as usize).min(self.g - 1);
        (c(p[0]), c(p[1]))
    }

    fn insert(&mut self, p: [f64; 2], idx: usize) {
        let (x, y) = self.cell_of(p);
        self.cells[y * self.g + x].push(idx);
    }

    /// Candidates within `reach` cells of `p`.
    fn around(&self, p: [f64; 2], reach: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = self.cell_of(p);
        let g = self.g as isize;
        let r = reach.min(self.g / 2) as isize;
        (-r..=r).flat_map(move |dy| {
            (-r..=r).flat_map(move |dx| {
                let cx = (x as isize + dx).rem_euclid(g) as usize;
                let cy = (y as isize + dy).rem_euclid(g) as usize;
                self.cells[cy * self.g + cx].iter().copied()
            })
        })
    }
}

fn bridson_torus(r: f64, rng: &mut Rng64) -> Vec<[f64; 2]> {
    let mut grid = TorusGrid::new(r / 2f64.sqrt());
    let mut pts = vec![[rng.gen::<f64>(), rng.gen::<f64>()]];
    grid.insert(pts[0], 0);
    let mut active = vec![0usize];
    while !active.is_empty() {
        let a = rng.gen_range(0..active.len());
        let p = pts[active[a]];
        let mut found = false;
        for _ in 0..DART_ATTEMPTS {
            let th = rng.gen::<f64>() * TAU;
            let rad = r * (1.0 + rng.gen::<f64>());
            let q = [(p[0] + rad * th.cos()).rem_euclid(1.0), (p[1] + rad * th.sin()).rem_euclid(1.0)];
            if grid.around(q, 2).all(|k| torus_dist(pts[k], q) >= r) {
                grid.insert(q, pts.len());
                active.push(pts.len());
                pts.push(q);
                found = true;
                break;
            }
        }
        if !found {
            active.swap_remove(a);
        }
    }
    pts
}

fn nearest_torus(grid: &TorusGrid, pts: &[[f64; 2]], q: [f64; 2]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for k in grid.around(q, 2) {
        let d = torus_dist(pts[k], q);
        if d < best.1 {
            best = (k, d);
        }
    }
    if best.0 == usize::MAX {
        for (k, p) in pts.iter().enumerate() {
            let d = torus_dist(*p, q);
            if d < best.1 {
                best = (k, d);
            }
        }
    }
    best
}

fn torus_grid_for(pts: &[[f64; 2]]) -> TorusGrid {
    let mut grid = TorusGrid::new(1.0 / (pts.len() as f64).sqrt());
    for (k, p) in pts.iter().enumerate() {
        grid.insert(*p, k);
    }
    grid
}

fn lloyd_torus(pts: &mut [[f64; 2]], iterations: usize) {
    let res = 256;
    for _ in 0..iterations {
        let grid = torus_grid_for(pts);
        let mut sum = vec![[0.0f64; 2]; pts.len()];
        let mut cnt = vec![0usize; pts.len()];
        for gy in 0..res {
            for gx in 0..res {
                let q = [(gx as f64 + 0.5) / res as f64, (gy as f64 + 0.5) / res as f64];
                let (k, _) = nearest_torus(&grid, pts, q);
                sum[k][0] += wrap(q[0] - pts[k][0]);
                sum[k][1] += wrap(q[1] - pts[k][1]);
                cnt[k] += 1;
            }
        }
        for k in 0..pts.len() {
            if cnt[k] > 0 {
                pts[k][0] = (pts[k][0] + sum[k][0] / cnt[k] as f64).rem_euclid(1.0);
                pts[k][1] = (pts[k][1] + sum[k][1] / cnt[k] as f64).rem_euclid(1.0);
            }
        }
    }
}

/// Exactly `n` well-spread points of the unit flat torus.
pub fn poisson_disk_torus(n: usize, seed: u64) -> Result<Vec<[f64; 2]>, AtlasError> {
    if n < MIN_POINTS {
        return Err(AtlasError::SamplingFailed(format!("need at least {MIN_POINTS} points, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut r = (0.7 / n as f64).sqrt();
    for _ in 0..64 {
        let mut pts = bridson_torus(r, &mut rng);
        if pts.len() >= n {
            pts.truncate(n);
            lloyd_torus(&mut pts, LLOYD_ITERATIONS);
            return Ok(pts);
        }
        r *= 0.97;
    }
    Err(AtlasError::SamplingFailed(format!("could not place {n} points")))
}

/// Covering radius of a torus sample, certified on a grid, and its minimal separation.
fn torus_net_params(pts: &[[f64; 2]]) -> (f64, f64) {
    let grid = torus_grid_for(pts);
    let res = 512;
    let mut worst: f64 = 0.0;
    for gy in 0..res {
        for gx in 0..res {
            let q = [gx as f64 / res as f64, gy as f64 / res as f64];
            worst = worst.max(nearest_torus(&grid, pts, q).1);
        }
    }
    let cover = worst + (0.5f64).sqrt() / res as f64;
    let mut sep = f64::INFINITY;
    for (k, p) in pts.iter().enumerate() {
        for l in grid.around(*p, 2) {
            if l != k {
                sep = sep.min(torus_dist(*p, pts[l]));
            }
        }
    }
    (cover, sep)
}

/// Atlas of the unit flat 2-torus with `n` vertices.
///
/// Chart `i` unwraps the torus around vertex `i` and holds every vertex within
/// `9ε` of it; transitions are translations.
pub fn build_flat_torus(n: usize, mu0: f64, seed: u64) -> Result<Atlas, AtlasError> {
    let pts = poisson_disk_torus(n, seed)?;
    let (cover, sep) = torus_net_params(&pts);
    let eps = cover * (1.0 + 1e-6);
    if sep < mu0 * eps {
        return Err(AtlasError::SamplingFailed(format!("separation {sep} below mu0 * eps = {}", mu0 * eps)));
    }
    let pert = 0.25 * mu0;
    if (9.0 + pert) * eps >= 0.5 {
        return Err(AtlasError::SamplingFailed(format!(
            "eps = {eps} too large for charts of radius 9 eps on the unit torus; increase n"
        )));
    }

    let mut patches = BTreeMap::new();
    let mut transitions = BTreeMap::new();
    let chart = |i: usize, l: usize| -> Point {
        Point(vec![pts[i][0] + wrap(pts[l][0] - pts[i][0]), pts[i][1] + wrap(pts[l][1] - pts[i][1])])
    };
    for i in 0..n {
        let pi = Point(pts[i].to_vec());
        let mut points = BTreeMap::new();
        for l in 0..n {
            if torus_dist(pts[i], pts[l]) <= 9.0 * eps {
                points.insert(l as Label, chart(i, l));
            }
        }
        for (&j, pj) in &points {
            if j == i {
                continue;
            }
            let offset = vec![pts[j][0] - pj.0[0], pts[j][1] - pj.0[1]];
            let domain = Domain::intersection(vec![Ball::new(pi.clone(), 6.0 * eps), Ball::new(pj.clone(), 9.0 * eps)])
                .with_part(vec![Ball::new(pi.clone(), pert * eps)]);
            transitions.insert((i, j), Transition { i, j, map: TransitionMap::Translation { offset }, domain });
        }
        patches.insert(i, Patch::new(i, eps, points));
    }
    Ok(Atlas { m: 2, mu0, nu0: 0.0, xi0: 0.0, patches, transitions, embedding: Some(Embedding::FlatTorus) })
}

fn geodesic(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Bucket grid in `R^3` for points of the unit sphere.
struct SphereGrid {
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl SphereGrid {
    fn new(cell: f64) -> Self {
        Self { cell, cells: HashMap::new() }
    }

    fn key(&self, p: &Vector3<f64>) -> (i64, i64, i64) {
        let f = |x: f64| (x / self.cell).floor() as i64;
        (f(p.x), f(p.y), f(p.z))
    }

    fn insert(&mut self, p: &Vector3<f64>, idx: usize) {
        self.cells.entry(self.key(p)).or_default().push(idx);
    }

    fn around(&self, p: &Vector3<f64>, reach: i64) -> impl Iterator<Item = usize> + '_ {
        let (x, y, z) = self.key(p);
        (-reach..=reach).flat_map(move |dx| {
            (-reach..=reach).flat_map(move |dy| {
                (-reach..=reach)
                    .flat_map(move |dz| self.cells.get(&(x + dx, y + dy, z + dz)).into_iter().flatten().copied())
            })
        })
    }
}

fn exp_unit(p: &Vector3<f64>, dir: &Vector3<f64>, s: f64) -> Vector3<f64> {
    (p * s.cos() + dir * s.sin()).normalize()
}

fn bridson_sphere(r: f64, rng: &mut Rng64) -> Vec<Vector3<f64>> {
    let chord = 2.0 * (r / 2.0).sin();
    let mut grid = SphereGrid::new(chord);
    let v = unit_vector(rng, 3);
    let mut pts = vec![Vector3::new(v.0[0], v.0[1], v.0[2])];
    grid.insert(&pts[0], 0);
    let mut active = vec![0usize];
    while !active.is_empty() {
        let a = rng.gen_range(0..active.len());
        let p = pts[active[a]];
        let mut found = false;
        for _ in 0..DART_ATTEMPTS {
            let w = unit_vector(rng, 3);
            let w = Vector3::new(w.0[0], w.0[1], w.0[2]);
            let t = w - p * w.dot(&p);
            if t.norm() < 1e-9 {
                continue;
            }
            let q = exp_unit(&p, &t.normalize(), r * (1.0 + rng.gen::<f64>()));
            if grid.around(&q, 1).all(|k| geodesic(&pts[k], &q) >= r) {
                grid.insert(&q, pts.len());
                active.push(pts.len());
                pts.push(q);
                found = true;
                break;
            }
        }
        if !found {
            active.swap_remove(a);
        }
    }
    pts
}

/// Deterministic, nearly uniform test points on the unit sphere.
fn fibonacci_sphere(count: usize) -> Vec<Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * k as f64;
            Vector3::new(r * th.cos(), r * th.sin(), z)
        })
        .collect()
}

fn nearest_sphere(grid: &SphereGrid, pts: &[Vector3<f64>], q: &Vector3<f64>) -> (usize, f64) {
    // On the unit sphere the nearest point has the largest dot product.
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for k in grid.around(q, 1) {
        let d = pts[k].dot(q);
        if d > best.1 {
            best = (k, d);
        }
    }
    if best.0 == usize::MAX {
        for (k, p) in pts.iter().enumerate() {
            let d = p.dot(q);
            if d > best.1 {
                best = (k, d);
            }
        }
    }
    (best.0, geodesic(&pts[best.0], q))
}

fn sphere_grid_for(pts: &[Vector3<f64>]) -> SphereGrid {
    // Cells comfortably larger than the expected covering radius.
    let mut grid = SphereGrid::new(2.0 * (4.0 * PI / pts.len() as f64).sqrt());
    for (k, p) in pts.iter().enumerate() {
        grid.insert(p, k);
    }
    grid
}

fn lloyd_sphere(pts: &mut [Vector3<f64>], iterations: usize) {
    let tests = fibonacci_sphere(200 * pts.len());
    for _ in 0..iterations {
        let grid = sphere_grid_for(pts);
        let mut sum = vec![Vector3::zeros(); pts.len()];
        for q in &tests {
            let (k, _) = nearest_sphere(&grid, pts, q);
            sum[k] += q;
        }
        for (p, s) in pts.iter_mut().zip(&sum) {
            if s.norm() > 0.0 {
                *p = s.normalize();
            }
        }
    }
}

/// Exactly `n` well-spread points of the unit sphere.
pub fn poisson_disk_sphere(n: usize, seed: u64) -> Result<Vec<[f64; 3]>, AtlasError> {
    if n < MIN_POINTS {
        return Err(AtlasError::SamplingFailed(format!("need at least {MIN_POINTS} points, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut r = (0.7 * 4.0 * PI / n as f64).sqrt();
    for _ in 0..64 {
        let mut pts = bridson_sphere(r, &mut rng);
        if pts.len() >= n {
            pts.truncate(n);
            lloyd_sphere(&mut pts, LLOYD_ITERATIONS);
            return Ok(pts.iter().map(|p| [p.x, p.y, p.z]).collect());
        }
        r *= 0.97;
    }
    Err(AtlasError::SamplingFailed(format!("could not place {n} points")))
}

/// Atlas of the round sphere of the given radius with exponential charts.
///
/// The chart sampling radius `ε` is measured in chart coordinates, so it
/// includes the stretch of the inverse exponential map.
///
/// The declared distortion is the smaller of `6³Λε²` (`Λ = 1/radius²`) and the
/// bi-Lipschitz bound `s/sin s − 1`, where `s` is the largest geodesic radius a
/// transition touches. On a geodesic ball of radius `s < π/2` the exponential
/// map stretches lengths by a factor between `sin s / s` and `1`.
pub fn build_sphere_exp(n: usize, radius: f64, mu0: f64, seed: u64) -> Result<Atlas, AtlasError> {
    let unit: Vec<Vector3<f64>> = poisson_disk_sphere(n, seed)?.iter().map(|p| Vector3::from(*p)).collect();

    let tests = fibonacci_sphere(400 * n);
    let grid = sphere_grid_for(&unit);
    let mut cover: f64 = 0.0;
    for q in &tests {
        cover = cover.max(nearest_sphere(&grid, &unit, q).1);
    }
    // Test points are about sqrt(4π / count) apart.
    cover += (4.0 * PI / tests.len() as f64).sqrt();
    let mut sep = f64::INFINITY;
    for (k, p) in unit.iter().enumerate() {
        for l in grid.around(p, 1) {
            if l != k {
                sep = sep.min(geodesic(p, &unit[l]));
            }
        }
    }

    let frames: BTreeMap<Label, Frame> =
        unit.iter().enumerate().map(|(i, p)| (i, Frame::at([p.x, p.y, p.z], radius))).collect();
    let chart_points = |i: usize, reach: f64| -> BTreeMap<Label, Point> {
        let mut points = BTreeMap::new();
        for l in 0..n {
            if geodesic(&unit[i], &unit[l]) * radius <= reach {
                let q = Point((unit[l] * radius).iter().copied().collect());
                points.insert(l as Label, frames[&i].log(&q).expect("chart radius below pi"));
            }
        }
        points
    };

    // The chart radius ε is measured: grow it until every chart is ε-dense on B(p_i, 8ε).
    let mut eps = cover * radius;
    let mut settled = false;
    for _ in 0..30 {
        if 9.0 * eps / radius >= 0.9 * PI {
            break;
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let pts = chart_points(i, 9.0 * eps);
            let cert = certify_net(&pts, &Ball::new(Point::origin(2), 8.0 * eps), 0.0, eps, eps / 4.0);
            worst = worst.max(cert.worst_density_distance);
        }
        if worst < eps {
            settled = true;
            break;
        }
        eps = worst * 1.02;
    }
    if !settled {
        return Err(AtlasError::SamplingFailed("sample too coarse for exponential charts".into()));
    }
    if sep * radius < mu0 * eps {
        return Err(AtlasError::SamplingFailed(format!("separation {} below mu0 * eps = {}", sep * radius, mu0 * eps)));
    }

    let pert = 0.25 * mu0;
    let mut patches = BTreeMap::new();
    let mut transitions = BTreeMap::new();
    for i in 0..n {
        let fi = &frames[&i];
        let points = chart_points(i, 9.0 * eps);
        let pi = points[&i].clone();
        for (&j, pj) in &points {
            if j == i {
                continue;
            }
            let domain = Domain::intersection(vec![Ball::new(pi.clone(), 6.0 * eps), Ball::new(pj.clone(), 9.0 * eps)])
                .with_part(vec![Ball::new(pi.clone(), pert * eps)]);
            let map = TransitionMap::ExpSphere { from: fi.clone(), to: frames[&j].clone() };
            transitions.insert((i, j), Transition { i, j, map, domain });
        }
        patches.insert(i, Patch::new(i, eps, points));
    }
    let lambda = 1.0 / (radius * radius);
    let s = (9.0 + pert) * eps / radius;
    let xi0 =
        if s < 0.5 * PI { (216.0 * lambda * eps * eps).min(s / s.sin() - 1.0) } else { 216.0 * lambda * eps * eps };
    Ok(Atlas { m: 2, mu0, nu0: 0.0, xi0, patches, transitions, embedding: Some(Embedding::Sphere { radius, frames }) })
}

//! Seeded random sampling helpers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::simplex::Point;

/// The RNG used everywhere; seeded runs are reproducible across platforms.
pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly distributed unit vector in `R^m`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let p = Point(v);
        let n = p.norm();
        if n > 1e-12 {
            return p.scale(1.0 / n);
        }
    }
}

/// Uniform sample from the closed ball `B̄(center, radius)`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &Point, radius: f64) -> Point {
    let m = center.dim();
    let dir = unit_vector(rng, m);
    let u: f64 = rng.gen();
    let r = radius * u.powf(1.0 / m as f64);
    center.add(&dir.scale(r))
}

/// Haar-distributed orthogonal `m × m` matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

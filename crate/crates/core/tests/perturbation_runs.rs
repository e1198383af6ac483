use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::OnceLock;

use manidel::assembly::star_in_chart;
use manidel::atlas::{build_flat_torus, build_sphere_exp, Atlas};
use manidel::patch::{certify_net, delaunay_complex_with_cutoff, is_delta_protected, Ball, Patch};
use manidel::perturbation::{
    corrupt_transitions, derive_params, find_forbidden, forbidden_scan, hoop_distortion_check, is_good_perturbation,
    neighborhood_complex, neighborhood_shells, perturb_point, region_of_interest, run_extended, run_flat,
    scan_settings, shell_hit, AlgorithmParams, Overrides, RunReport,
};
use manidel::sampling::{rng_from_seed, uniform_in_ball};
use manidel::simplex::{circumcenter_radius, is_gamma_good, Label, Point, TAU_LIN};
use rand::Rng;

fn practical(a: &Atlas, seed: u64) -> AlgorithmParams {
    let mut p = derive_params(a.m, a.mu0, 0.1, a.xi0, a.nu0, &Overrides::practical(a.m, 0.1)).unwrap();
    p.rng_seed = seed;
    p
}

struct TorusRun {
    before: Atlas,
    after: Atlas,
    params: AlgorithmParams,
    report: RunReport,
}

fn torus_run() -> &'static TorusRun {
    static RUN: OnceLock<TorusRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let before = build_flat_torus(200, 0.5, 7).unwrap();
        let params = practical(&before, 7);
        let mut after = before.clone();
        let report = run_extended(&mut after, &params).unwrap();
        TorusRun { before, after, params, report }
    })
}

#[test]
fn torus_run_scan_is_empty_and_attempts_are_few() {
    let r = torus_run();
    assert!(r.report.scan_empty);
    assert!(r.report.mean_attempts <= 2.0, "{}", r.report.mean_attempts);
    assert!(r.report.max_own_displacement <= r.params.rho0 * (1.0 + TAU_LIN));
    assert!(r.report.max_neighbor_displacement <= r.params.rho_tilde0 * (1.0 + TAU_LIN));
    for i in r.after.labels() {
        assert!(forbidden_scan(&r.after, i, &r.params).unwrap().is_empty());
    }
}

#[test]
fn torus_neighbourhood_complexes_are_bounded() {
    let r = torus_run();
    for i in r.before.labels() {
        let n = neighborhood_complex(&r.before, i).unwrap().len();
        assert!((n as f64) < 28f64.powi(6));
    }
}

#[test]
fn torus_stars_are_protected_and_good() {
    let r = torus_run();
    let mut checked = 0;
    for i in r.after.labels() {
        let patch = &r.after.patches[&i];
        let delta = r.params.delta(patch.eps);
        for s in star_in_chart(&r.after, i) {
            checked += 1;
            assert!(is_delta_protected(&patch.points, &s, delta), "{s:?} in chart {i}");
            assert!(is_gamma_good(&patch.simplex(&s), r.params.gamma0), "{s:?} in chart {i}");
        }
    }
    assert!(checked >= 6 * 200);
}

#[test]
fn torus_regions_of_interest_remain_nets() {
    let r = torus_run();
    let mu_prime = r.params.mu_prime();
    for i in r.after.labels() {
        let patch = &r.after.patches[&i];
        let eps_prime = r.params.eps_prime(patch.eps);
        let q: BTreeMap<Label, Point> =
            region_of_interest(patch).into_iter().map(|l| (l, patch.points[&l].clone())).collect();
        let domain = Ball::new(patch.origin.clone(), 4.5 * patch.eps);
        let cert = certify_net(&q, &domain, mu_prime, eps_prime, patch.eps / 4.0);
        assert!(cert.worst_density_distance <= eps_prime * (1.0 + TAU_LIN));
        assert!(cert.min_separation >= mu_prime * eps_prime * (1.0 - TAU_LIN));
    }
}

#[test]
fn torus_run_is_reproducible() {
    let r = torus_run();
    let mut again = r.before.clone();
    let report = run_extended(&mut again, &r.params).unwrap();
    assert_eq!(report.without_timing(), r.report.without_timing());
    assert_eq!(again, r.after);
}

#[test]
fn finalized_points_never_reenter_forbidden_configurations() {
    let mut a = build_flat_torus(200, 0.5, 11).unwrap();
    let params = practical(&a, 11);
    let labels: Vec<Label> = a.labels().collect();
    for j in &labels {
        assert!(forbidden_scan(&a, *j, &params).unwrap().is_empty());
    }
    let mut done = BTreeSet::new();
    for &i in &labels {
        perturb_point(&mut a, i, &params).unwrap();
        done.insert(i);
        // Moving p_i only changes configurations that contain it, and those lie
        // within the diameter bound of p_i in the charts holding it.
        let mut charts = a.holders(i);
        charts.push(i);
        for j in charts {
            let patch = &a.patches[&j];
            let settings = scan_settings(&params, patch.eps);
            let pi = &patch.points[&i];
            let near: Vec<Label> = region_of_interest(patch)
                .into_iter()
                .filter(|l| patch.points[l].dist(pi) <= settings.diameter_bound)
                .collect();
            if !near.contains(&i) {
                continue;
            }
            for f in find_forbidden(&patch.points, &near, &settings, j) {
                assert!(!f.simplex.contains(&i), "after {i}: {f:?}");
            }
        }
    }
}

/// Area of `{x ∈ B(o, r) : ||x − c| − R| ≤ w for some shell}`, integrated
/// exactly along `rays` rays from `o`.
fn shell_union_area(o: &Point, r: f64, shells: &[(Point, f64)], w: f64, rays: usize) -> f64 {
    let mut total = 0.0;
    for k in 0..rays {
        let th = 2.0 * PI * (k as f64 + 0.5) / rays as f64;
        let u = [th.cos(), th.sin()];
        // Intervals of t ∈ [0, r] with R − w ≤ |o + t u − c| ≤ R + w.
        let mut iv: Vec<(f64, f64)> = Vec::new();
        for (c, &rad) in shells.iter().map(|(c, r)| (c, r)) {
            let dx = o.0[0] - c.0[0];
            let dy = o.0[1] - c.0[1];
            let b = dx * u[0] + dy * u[1];
            let cc = dx * dx + dy * dy;
            // |o + t u − c|² = t² + 2bt + cc.
            let roots = |s: f64| -> Option<(f64, f64)> {
                let disc = b * b - cc + s * s;
                (disc >= 0.0).then(|| (-b - disc.sqrt(), -b + disc.sqrt()))
            };
            let outer = roots(rad + w);
            let inner = if rad > w { roots(rad - w) } else { None };
            let mut push = |lo: f64, hi: f64| {
                let (lo, hi) = (lo.max(0.0), hi.min(r));
                if hi > lo {
                    iv.push((lo, hi));
                }
            };
            match (outer, inner) {
                (Some((a0, a1)), Some((b0, b1))) => {
                    push(a0, b0);
                    push(b1, a1);
                }
                (Some((a0, a1)), None) => push(a0, a1),
                _ => {}
            }
        }
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut cur: Option<(f64, f64)> = None;
        for (lo, hi) in iv {
            match cur {
                Some((a, b)) if lo <= b => cur = Some((a, b.max(hi))),
                _ => {
                    if let Some((a, b)) = cur {
                        total += 0.5 * (b * b - a * a);
                    }
                    cur = Some((lo, hi));
                }
            }
        }
        if let Some((a, b)) = cur {
            total += 0.5 * (b * b - a * a);
        }
    }
    total * 2.0 * PI / rays as f64
}

#[test]
fn rejection_rate_matches_shell_area() {
    let r = torus_run();
    let i = 17;
    let patch = &r.before.patches[&i];
    let eps = patch.eps;
    let w = 2.0 * r.params.alpha_tilde0 * eps;
    let radius = r.params.rho0 * eps;

    // Shells recomputed from the neighbourhood complex with the general solver.
    let oracle_shells: Vec<(Point, f64)> = neighborhood_complex(&r.before, i)
        .unwrap()
        .iter()
        .filter_map(|s| circumcenter_radius(&patch.simplex(s)).ok())
        .collect();
    let area = shell_union_area(&patch.origin, radius, &oracle_shells, w, 4096);
    let expected = area / (PI * radius * radius);

    let shells = neighborhood_shells(&r.before, i).unwrap();
    let mut rng = rng_from_seed(99);
    let trials = 10_000;
    let mut rejected = 0;
    for _ in 0..trials {
        let x = uniform_in_ball(&mut rng, &patch.origin, radius);
        if shell_hit(&x, &shells, w).is_some() {
            rejected += 1;
        }
    }
    let measured = rejected as f64 / trials as f64;
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    eprintln!("rejection {measured}, shell area fraction {expected}");
    assert!(expected > 0.05, "{expected}");
    assert!((measured - expected).abs() <= 4.0 * sigma + 0.005, "{measured} vs {expected}");

    // The full predicate agrees with the shell test on a few draws.
    for _ in 0..5 {
        let x = uniform_in_ball(&mut rng, &patch.origin, radius);
        assert_eq!(is_good_perturbation(&r.before, i, &x, &r.params).unwrap(), shell_hit(&x, &shells, w).is_none());
    }
}

#[test]
fn torus_transitions_preserve_hoops_and_corruption_is_caught() {
    let r = torus_run();
    let rep = hoop_distortion_check(&r.before, 1000, &r.params, 5);
    assert_eq!(rep.trials, 1000);
    assert_eq!(rep.violations(), 0, "{rep:?}");
    // Isometric transitions keep the planted distance below α0 R, well inside the α̃0 bound.
    assert!(rep.worst_distance * 2.0 <= 1.5 * r.params.alpha0 * (1.0 + 1e-6));
    let bad = corrupt_transitions(&r.before, 1.5);
    let rep = hoop_distortion_check(&bad, 200, &r.params, 5);
    assert!(rep.distance_violations > 0, "{rep:?}");
}

#[test]
fn sphere_transitions_preserve_hoops() {
    let a = build_sphere_exp(500, 1.0, 0.5, 3).unwrap();
    let params = practical(&a, 5);
    let rep = hoop_distortion_check(&a, 1000, &params, 8);
    assert_eq!(rep.trials, 1000);
    assert_eq!(rep.violations(), 0, "{rep:?}");
}

/// Jittered hexagonal lattice of spacing 1 with about `n` points.
fn hex_patch(rows: usize, cols: usize, jitter: f64, seed: u64) -> Patch {
    let mut rng = rng_from_seed(seed);
    let mut points = BTreeMap::new();
    for r in 0..rows {
        for c in 0..cols {
            let x = c as f64 + if r % 2 == 1 { 0.5 } else { 0.0 } - cols as f64 / 2.0;
            let y = r as f64 * 3f64.sqrt() / 2.0 - rows as f64 * 3f64.sqrt() / 4.0;
            let j = [rng.gen_range(-jitter..jitter), rng.gen_range(-jitter..jitter)];
            points.insert(points.len(), Point::from([x + j[0], y + j[1]]));
        }
    }
    let centre = *points.iter().min_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
    // Covering radius of the lattice is 1/√3; jitter adds at most √2 · jitter.
    Patch::new(centre, 1.0 / 3f64.sqrt() + 2f64.sqrt() * jitter, points)
}

fn flat_params(seed: u64) -> AlgorithmParams {
    let mut p = derive_params(2, 0.5, 0.1, 0.0, 0.0, &Overrides::practical(2, 0.1)).unwrap();
    p.rng_seed = seed;
    p
}

/// Delaunay triangles centred well inside the patch, where it is dense.
fn interior_triangles(patch: &Patch, params: &AlgorithmParams) -> BTreeSet<Vec<Label>> {
    let region = Ball::new(patch.origin.clone(), 2.0);
    delaunay_complex_with_cutoff(&patch.points, &region, params.eps_prime(patch.eps), patch.eps).top
}

#[test]
fn hex_net_flat_run_is_protected() {
    let mut patch = hex_patch(10, 10, 0.05, 3);
    let params = flat_params(3);
    let rep = run_flat(&mut patch, &params).unwrap();
    assert!(rep.forbidden.is_empty());
    let tris = interior_triangles(&patch, &params);
    assert!(tris.len() >= 20);
    for t in &tris {
        assert!(is_delta_protected(&patch.points, t, rep.delta), "{t:?}");
    }
}

#[test]
fn planted_cocircular_quad_is_found_and_resolved() {
    let mut patch = hex_patch(10, 10, 0.05, 4);
    let params = flat_params(4);
    // Move the far vertex of a triangle adjacent to one at the centre onto its circumcircle.
    let tris = interior_triangles(&patch, &params);
    let t = tris.iter().find(|t| t.contains(&patch.id)).unwrap().clone();
    let (c, r) = circumcenter_radius(&patch.simplex(&t)).unwrap();
    let edge = [t[1], t[2]];
    let other = tris
        .iter()
        .find(|s| *s != &t && s.contains(&edge[0]) && s.contains(&edge[1]))
        .or_else(|| tris.iter().find(|s| *s != &t && s.contains(&t[0]) && s.contains(&t[1])))
        .unwrap();
    let d = *other.iter().find(|l| !t.contains(l)).unwrap();
    let dir = patch.points[&d].sub(&c);
    patch.points.insert(d, c.add(&dir.scale(r / dir.norm())));

    let mut quad: Vec<Label> = t.iter().copied().chain([d]).collect();
    quad.sort_unstable();
    let settings = scan_settings(&params, patch.eps);
    let labels: Vec<Label> = patch.points.keys().copied().collect();
    let found = find_forbidden(&patch.points, &labels, &settings, patch.id);
    let hit = found.iter().find(|f| f.simplex == quad).expect("planted quad reported");
    assert!(hit.witness_ball.distance <= 1e-9 * patch.eps);

    let before = patch.clone();
    let rep = run_flat(&mut patch, &params).unwrap();
    assert!(quad.iter().any(|l| patch.points[l] != before.points[l]));
    assert!(rep.forbidden.is_empty());
    for s in interior_triangles(&patch, &params) {
        assert!(is_delta_protected(&patch.points, &s, rep.delta), "{s:?}");
    }
}

#[test]
fn single_triangle_needs_no_moves() {
    let points: BTreeMap<Label, Point> =
        [(0, Point::from([0.0, 0.0])), (1, Point::from([1.0, 0.0])), (2, Point::from([0.5, 0.9]))]
            .into_iter()
            .collect();
    let mut patch = Patch::new(0, 1.0, points);
    let rep = run_flat(&mut patch, &flat_params(1)).unwrap();
    assert!(rep.forbidden.is_empty());
    assert!(rep.attempts.values().all(|&n| n == 1));
    assert!(is_delta_protected(&patch.points, &[0, 1, 2], rep.delta));
}

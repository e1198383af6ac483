use std::collections::BTreeMap;
use std::sync::OnceLock;

use manidel::assembly::{
    assemble, assign_pl_metric, build_stars, check_star_consistency, complex_from_json, complex_to_json,
    manifold_check, max_geodesic_error, oracle_compare, realizability, star_in_chart, torus_delaunay_oracle,
    vertex_coordinates, write_off, AbstractComplex, AssemblyError, Stars,
};
use manidel::atlas::{build_flat_torus, build_sphere_exp, Atlas};
use manidel::perturbation::{derive_params, run_extended, Overrides};
use manidel::simplex::Label;

fn run(mut a: Atlas, seed: u64) -> Atlas {
    let mut p = derive_params(a.m, a.mu0, 0.1, a.xi0, a.nu0, &Overrides::practical(a.m, 0.1)).unwrap();
    p.rng_seed = seed;
    assert!(run_extended(&mut a, &p).unwrap().scan_empty);
    a
}

fn torus() -> &'static (Atlas, Stars) {
    static T: OnceLock<(Atlas, Stars)> = OnceLock::new();
    T.get_or_init(|| {
        let a = run(build_flat_torus(200, 0.5, 21).unwrap(), 21);
        let stars = build_stars(&a);
        (a, stars)
    })
}

#[test]
fn torus_stars_are_disks() {
    let (_, stars) = torus();
    for (i, star) in stars {
        let c = AbstractComplex::from_top(2, star.iter().cloned());
        assert_eq!(c.euler_characteristic(), 1, "star of {i}");
        assert!((4..=10).contains(&star.len()));
    }
}

#[test]
fn torus_complex_is_a_torus() {
    let (a, stars) = torus();
    assert!(check_star_consistency(stars).ok());
    let c = assemble(2, stars).unwrap();
    let mut rep = manifold_check(&c);
    rep.star_consistency_ok = Some(true);
    assert!(rep.ok(), "{rep:?}");
    assert_eq!(rep.euler_characteristic, 0);
    assert_eq!(c.count(0), a.len());
    assert_eq!(c.count(2), 2 * a.len());
}

#[test]
fn torus_complex_matches_lifted_oracle() {
    let (a, stars) = torus();
    let c = assemble(2, stars).unwrap();
    let coords = vertex_coordinates(a).unwrap();
    let pts: BTreeMap<Label, [f64; 2]> = coords.iter().map(|(&l, x)| (l, [x[0], x[1]])).collect();
    let d = oracle_compare(&c, &torus_delaunay_oracle(&pts));
    assert!(d.is_empty(), "{d:?}");
}

#[test]
fn torus_lengths_are_chart_distances() {
    let (a, stars) = torus();
    let c = assemble(2, stars).unwrap();
    let m = assign_pl_metric(a, &c).unwrap();
    assert!(m.fallbacks.is_empty());
    // Both charts give the same distance up to the rounding of translated coordinates.
    for (&(i, j), &l) in &m.edge_lengths {
        let (pi, pj) = (&a.patches[&i], &a.patches[&j]);
        let di = pi.points[&i].dist(&pi.points[&j]);
        let dj = pj.points[&i].dist(&pj.points[&j]);
        assert!((l - di).abs() <= 1e-14 * l && (l - dj).abs() <= 1e-14 * l, "edge ({i}, {j})");
    }
    assert!(m.min_gram_eigenvalue.iter().all(|(_, lam)| *lam > 1e-8));
}

#[test]
fn torus_json_round_trip_is_bit_exact() {
    let (a, stars) = torus();
    let c = assemble(2, stars).unwrap();
    let m = assign_pl_metric(a, &c).unwrap();
    let s = complex_to_json(&c, &m).unwrap();
    let (c2, m2) = complex_from_json(&s).unwrap();
    assert_eq!(c, c2);
    for (k, l) in &m.edge_lengths {
        assert_eq!(l.to_bits(), m2.edge_lengths[k].to_bits());
    }
    assert_eq!(complex_to_json(&c2, &m2).unwrap(), s);
}

#[test]
fn corrupted_length_is_not_realizable() {
    let (a, stars) = torus();
    let c = assemble(2, stars).unwrap();
    let mut m = assign_pl_metric(a, &c).unwrap();
    let (&e, &l) = m.edge_lengths.iter().next().unwrap();
    m.edge_lengths.insert(e, 10.0 * l);
    let r = realizability(&c, &m.edge_lengths);
    assert!(!r.failures.is_empty());
    assert!(r.failures.iter().all(|s| s.contains(&e.0) && s.contains(&e.1)));
}

#[test]
fn skipped_propagation_breaks_star_consistency() {
    let (a, _) = torus();
    let mut bad = a.clone();
    let i = 40;
    let patch = bad.patches.get_mut(&i).unwrap();
    let pi = patch.points[&i].clone();
    let (_, pj) =
        patch.points.iter().filter(|(&l, _)| l != i).min_by(|x, y| x.1.dist(&pi).total_cmp(&y.1.dist(&pi))).unwrap();
    // Past the nearest neighbour, in chart i only.
    let moved = pi.add(&pj.sub(&pi).scale(1.5));
    patch.points.insert(i, moved);
    let stars = build_stars(&bad);
    let rep = check_star_consistency(&stars);
    assert!(!rep.ok());
    assert!(rep.failures.iter().all(|&(x, y)| x == i || y == i), "{:?}", rep.failures);
    assert!(matches!(assemble(2, &stars), Err(AssemblyError::InconsistentStars(_))));
}

#[test]
fn sphere_complex_exports_a_sphere() {
    let a = run(build_sphere_exp(500, 1.0, 0.5, 3).unwrap(), 3);
    let stars = build_stars(&a);
    let sizes: Vec<usize> = stars.values().map(|s| s.len()).collect();
    eprintln!("star sizes {:?}..{:?}", sizes.iter().min(), sizes.iter().max());
    assert!(check_star_consistency(&stars).ok());
    let c = assemble(2, &stars).unwrap();
    let rep = manifold_check(&c);
    assert!(rep.ok(), "{rep:?}");
    assert_eq!(rep.euler_characteristic, 2);

    let m = assign_pl_metric(&a, &c).unwrap();
    let eps = a.patches.values().map(|p| p.eps).fold(0.0, f64::max);
    assert!(max_geodesic_error(&a, &m).unwrap() <= 6.0 * (6.0 * eps).powi(2));

    let mut buf = Vec::new();
    write_off(&c, &vertex_coordinates(&a).unwrap(), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header: Vec<usize> = text.lines().nth(1).unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
    assert_eq!(header[1], 2 * header[0] - 4);
    assert_eq!(text.lines().count(), 2 + header[0] + header[1]);
    let star = star_in_chart(&a, 0);
    assert_eq!(star, c.star(0));
}

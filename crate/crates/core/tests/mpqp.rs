mod common;

use common::{facet_distance, feasible_samples, load_qp, rng};
use drt_core::mpqp::{
    build_policy, build_region, explore, find_feasible_load, load_box, partition_complement,
    sensitivity, unify, CriticalRegion, ExploreOptions, Policy, MIN_RADIUS,
};
use drt_core::qpcore::Polytope;
use drt_core::sced::SCEDQp;
use drt_core::Error;
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;

const FIXTURES: [&str; 5] = [
    "onebus.json",
    "onebus_single.json",
    "three_bus_ring.json",
    "three_bus_congested.json",
    "five_bus.json",
];

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(x)
}

fn policy(qp: &SCEDQp) -> Policy {
    build_policy(qp, &load_box(qp), &ExploreOptions::default()).unwrap()
}

/// `[min, max]` of a one-dimensional polytope.
fn interval(p: &Polytope) -> (f64, f64) {
    let hi = p.support(&RowDVector::from_vec(vec![1.0])).unwrap();
    let lo = -p.support(&RowDVector::from_vec(vec![-1.0])).unwrap();
    (lo, hi)
}

#[test]
fn onebus_has_two_segments_with_breakpoint_at_gen1_capacity() {
    let qp = load_qp("onebus.json");
    let p = policy(&qp);
    assert_eq!(p.n_regions(), 2);
    let (lo0, hi0) = interval(&p.regions[0].region);
    let (lo1, hi1) = interval(&p.regions[1].region);
    assert!(lo0.abs() < 1e-7 && (hi0 - 1.0).abs() < 1e-7);
    assert!((lo1 - 1.0).abs() < 1e-7 && (hi1 - 11.0).abs() < 1e-7);
    // λ = a₁·l + b₁ on the first segment, a₂·(l − P₁max) + b₂ on the second
    assert!((p.regions[0].piece.f[(0, 0)] - 1.0).abs() < 1e-9);
    assert!(p.regions[0].piece.g[0].abs() < 1e-9);
    assert!((p.regions[1].piece.f[(0, 0)] - 1.0).abs() < 1e-9);
    assert!((p.regions[1].piece.g[0] - 1.0).abs() < 1e-9);
}

#[test]
fn single_generator_gives_one_affine_piece() {
    let qp = load_qp("onebus_single.json");
    let p = policy(&qp);
    assert_eq!(p.n_regions(), 1);
    let piece = &p.regions[0].piece;
    assert!((piece.f[(0, 0)] - 2.0).abs() < 1e-9 && (piece.g[0] - 5.0).abs() < 1e-9);
    assert!((piece.jac_p[(0, 0)] - 1.0).abs() < 1e-12);
}

#[test]
fn onebus_sensitivity_in_first_segment() {
    let qp = load_qp("onebus.json");
    let piece = sensitivity(&qp, &qp.dispatch(&v(&[0.5])).unwrap()).unwrap();
    assert!((piece.f[(0, 0)] - 1.0).abs() < 1e-12);
    assert!((piece.jac_p[(0, 0)] - 1.0).abs() < 1e-12);
    assert!(piece.jac_p[(1, 0)].abs() < 1e-12);
}

#[test]
fn jacobians_match_finite_differences() {
    let step = 1e-5;
    for name in ["three_bus_congested.json", "five_bus.json", "onebus.json"] {
        let qp = load_qp(name);
        let mut checked = 0;
        for l in feasible_samples(&qp, 15, 21) {
            let base = qp.dispatch(&l).unwrap();
            let Ok(piece) = sensitivity(&qp, &base) else {
                continue;
            };
            for i in 0..qp.n_nodes() {
                let mut up = l.clone();
                up[i] += step;
                let mut down = l.clone();
                down[i] -= step;
                let (Ok(ru), Ok(rd)) = (qp.dispatch(&up), qp.dispatch(&down)) else {
                    continue;
                };
                if ru.active_set != base.active_set || rd.active_set != base.active_set {
                    continue;
                }
                let dp = (&ru.generation - &rd.generation) / (2.0 * step);
                let dlam = (&ru.lambda - &rd.lambda) / (2.0 * step);
                let dgamma = (ru.gamma - rd.gamma) / (2.0 * step);
                assert!(
                    (dp - piece.jac_p.column(i)).amax() < 1e-5,
                    "{name} dP/dl_{i}"
                );
                assert!((dlam - piece.f.column(i)).amax() < 1e-5, "{name} dλ/dl_{i}");
                assert!(
                    (dgamma - piece.jac_gamma[i]).abs() < 1e-5,
                    "{name} dγ/dl_{i}"
                );
                checked += 1;
            }
        }
        assert!(checked > 0, "{name}: no derivative checked");
    }
}

#[test]
fn piece_reproduces_dispatch_at_base_point() {
    let qp = load_qp("five_bus.json");
    for l in feasible_samples(&qp, 10, 8) {
        let r = qp.dispatch(&l).unwrap();
        let Ok(piece) = sensitivity(&qp, &r) else {
            continue;
        };
        assert!((piece.primal_at(&l) - &r.generation).amax() < 1e-8);
        assert!((piece.lmp_at(&l) - &r.lambda).amax() < 1e-8);
        assert!((piece.duals_at(&l) - &r.solution.ineq_duals).amax() < 1e-8);
        assert!((piece.gamma_at(&l) - r.gamma).abs() < 1e-8);
    }
}

#[test]
fn onebus_regions_from_base_points() {
    let qp = load_qp("onebus.json");
    let l_set = load_box(&qp);
    for (base, lo, hi) in [(0.5, 0.0, 1.0), (2.0, 1.0, 11.0)] {
        let piece = sensitivity(&qp, &qp.dispatch(&v(&[base])).unwrap()).unwrap();
        let cr = build_region(piece, &qp, &l_set, MIN_RADIUS).unwrap();
        let (a, b) = interval(&cr.region);
        assert!(
            (a - lo).abs() < 1e-9 && (b - hi).abs() < 1e-9,
            "{base}: [{a}, {b}]"
        );
    }
}

#[test]
fn minimization_preserves_region_points() {
    let qp = load_qp("five_bus.json");
    let l0 = qp.case.base_load.clone();
    let piece = sensitivity(&qp, &qp.dispatch(&l0).unwrap()).unwrap();
    let raw = drt_core::mpqp::region::optimality_rows(&piece, &qp).intersect(&load_box(&qp));
    let cr = build_region(piece, &qp, &load_box(&qp), MIN_RADIUS).unwrap();
    assert!(cr.region.n_rows() < raw.n_rows());
    let mut r = rng(4);
    for _ in 0..200 {
        let z = DVector::from_fn(5, |i, _| l0[i] + 200.0 * (r.random::<f64>() - 0.5));
        let tol = 1e-7;
        if raw.max_violation(&z).abs() < tol {
            continue;
        }
        assert_eq!(raw.contains(&z, 0.0), cr.region.contains(&z, 1e-9), "{z}");
    }
}

#[test]
fn policies_match_dispatch_and_cover_samples() {
    for name in FIXTURES {
        let qp = load_qp(name);
        let p = policy(&qp);
        let samples = feasible_samples(&qp, 500, 2);
        assert_eq!(samples.len(), 500, "{name}");
        let mut compared = 0;
        for l in &samples {
            if facet_distance(&p, l) < 1e-7 {
                continue;
            }
            let e = p
                .evaluate(l)
                .unwrap_or_else(|err| panic!("{name}: {err} at {l}"));
            let d = qp.dispatch(l).unwrap();
            assert!((e.lambda - d.lambda).amax() <= 1e-6, "{name} at {l}");
            compared += 1;
        }
        assert!(compared > 450, "{name}: {compared}");
    }
}

#[test]
fn region_centers_are_consistent_and_disjoint() {
    for name in FIXTURES {
        let qp = load_qp(name);
        let p = policy(&qp);
        for (i, cr) in p.regions.iter().enumerate() {
            let (center, radius) = cr.region.chebyshev().unwrap();
            assert!(radius > MIN_RADIUS);
            let d = qp.dispatch(&center).unwrap();
            assert_eq!(d.active_set, cr.piece.active_set, "{name} region {i}");
            assert!((cr.piece.lmp_at(&center) - d.lambda).amax() < 1e-6);
            for (j, other) in p.regions.iter().enumerate() {
                if i != j {
                    assert!(
                        !other.contains(&center, 0.0),
                        "{name}: center of {i} inside {j}"
                    );
                }
            }
        }
    }
}

#[test]
fn lmp_is_affine_inside_each_region() {
    let qp = load_qp("five_bus.json");
    let p = policy(&qp);
    let mut r = rng(9);
    for cr in &p.regions {
        let (c, radius) = cr.region.chebyshev().unwrap();
        let pts: Vec<DVector<f64>> = (0..3)
            .map(|_| {
                DVector::from_fn(5, |_, _| r.random::<f64>() - 0.5).normalize() * (0.9 * radius)
                    + &c
            })
            .collect();
        let alpha = 0.3;
        let mid = &pts[0] * alpha + &pts[1] * (1.0 - alpha);
        let e = |l: &DVector<f64>| p.evaluate(l).unwrap().lambda;
        let lhs = e(&mid);
        let rhs = e(&pts[0]) * alpha + e(&pts[1]) * (1.0 - alpha);
        assert!((lhs - rhs).amax() < 1e-9);
    }
}

#[test]
fn generation_is_continuous_across_shared_facets() {
    for name in ["three_bus_congested.json", "five_bus.json", "onebus.json"] {
        let qp = load_qp(name);
        let p = policy(&qp);
        let centers: Vec<DVector<f64>> = p
            .regions
            .iter()
            .map(|r| r.region.chebyshev().unwrap().0)
            .collect();
        let mut shared = 0;
        for i in 0..p.n_regions() {
            for j in 0..p.n_regions() {
                if i == j {
                    continue;
                }
                // last point of region i on the segment towards j's center
                let (a, b) = (&centers[i], &centers[j]);
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if p.regions[i].contains(&(a + (b - a) * mid), 1e-12) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let x = a + (b - a) * lo;
                if !p.regions[j].contains(&x, 1e-7) {
                    continue;
                }
                let pi = p.regions[i].piece.primal_at(&x);
                let pj = p.regions[j].piece.primal_at(&x);
                assert!((pi - pj).amax() < 1e-6, "{name}: regions {i}/{j}");
                shared += 1;
            }
        }
        assert!(shared > 0, "{name}: no shared facet found");
    }
}

#[test]
fn complement_examples() {
    let seg = |a: f64, b: f64| Polytope::from_box(&v(&[a]), &v(&[b]));
    let rest = partition_complement(&[seg(0.0, 10.0)], &seg(0.0, 1.0), MIN_RADIUS);
    assert_eq!(rest.len(), 1);
    let (lo, hi) = interval(&rest[0]);
    assert!((lo - 1.0).abs() < 1e-12 && (hi - 10.0).abs() < 1e-12);

    let square = Polytope::from_box(&v(&[0.0, 0.0]), &v(&[1.0, 1.0]));
    let left = Polytope::from_box(&v(&[0.0, 0.0]), &v(&[0.5, 1.0]));
    let rest = partition_complement(std::slice::from_ref(&square), &left, MIN_RADIUS);
    assert_eq!(rest.len(), 1);
    let right = Polytope::from_box(&v(&[0.5, 0.0]), &v(&[1.0, 1.0]));
    assert!(rest[0].is_subset_of(&right) && right.is_subset_of(&rest[0]));

    assert!(partition_complement(std::slice::from_ref(&square), &square, MIN_RADIUS).is_empty());
}

#[test]
fn feasible_load_examples() {
    let qp = load_qp("onebus.json");
    let l = find_feasible_load(&qp, &load_box(&qp)).unwrap();
    assert!(l[0] > 0.0 && l[0] < 11.0);
    assert!(qp.dispatch(&l).is_ok());

    let beyond = Polytope::from_box(&v(&[12.0]), &v(&[20.0]));
    assert!(find_feasible_load(&qp, &beyond).is_none());

    let five = load_qp("five_bus.json");
    let slice = load_box(&five).intersect(&Polytope::new(
        DMatrix::from_row_slice(1, 5, &[0.0, -1.0, 0.0, 0.0, 0.0]),
        v(&[-350.0]),
    ));
    let l = find_feasible_load(&five, &slice).unwrap();
    assert!(l[1] > 350.0 && five.dispatch(&l).is_ok());
}

#[test]
fn unify_merges_artificially_split_region() {
    let qp = load_qp("onebus.json");
    let p = policy(&qp);
    let first = &p.regions[0];
    let cut = |lo: f64, hi: f64| CriticalRegion {
        piece: first.piece.clone(),
        region: Polytope::from_box(&v(&[lo]), &v(&[hi])),
    };
    let mut split = p.clone();
    split.regions = vec![cut(0.0, 0.4), cut(0.4, 1.0), p.regions[1].clone()];
    let merged = unify(&split);
    assert_eq!(merged.n_regions(), 2);
    let (lo, hi) = interval(&merged.regions[0].region);
    assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

    // different maps stay apart, and a second pass changes nothing
    assert_eq!(unify(&p).n_regions(), 2);
    assert_eq!(unify(&merged), merged);
}

#[test]
fn evaluate_examples() {
    let qp = load_qp("onebus.json");
    let p = policy(&qp);
    let e = p.evaluate(&v(&[0.5])).unwrap();
    assert_eq!(e.region, 0);
    assert!((e.lambda[0] - 0.5).abs() < 1e-9);
    let e = p.evaluate(&v(&[2.0])).unwrap();
    assert_eq!(e.region, 1);
    assert!((e.lambda[0] - 3.0).abs() < 1e-9);

    // at the breakpoint the price jumps: each side matches its one-sided
    // dispatch limit, and the dispatch price sits between them
    let left = p.regions[0].piece.lmp_at(&v(&[1.0]))[0];
    let right = p.regions[1].piece.lmp_at(&v(&[1.0]))[0];
    assert!((left - qp.dispatch(&v(&[1.0 - 1e-9])).unwrap().lambda[0]).abs() < 1e-6);
    assert!((right - qp.dispatch(&v(&[1.0 + 1e-9])).unwrap().lambda[0]).abs() < 1e-6);
    let at = qp.dispatch(&v(&[1.0])).unwrap().lambda[0];
    assert!(left - 1e-9 <= at && at <= right + 1e-9);
    assert_eq!(p.evaluate(&v(&[1.0])).unwrap().region, 0);

    assert!(matches!(
        p.evaluate(&v(&[12.0])),
        Err(Error::Uncovered {
            sced_feasible: false
        })
    ));
    let mut gap = p.clone();
    gap.regions.remove(0);
    assert!(matches!(
        gap.evaluate(&v(&[0.5])),
        Err(Error::Uncovered {
            sced_feasible: true
        })
    ));
}

#[test]
fn exploration_is_deterministic_and_round_trips() {
    let qp = load_qp("five_bus.json");
    let a = policy(&qp);
    let b = policy(&qp);
    assert_eq!(a, b);
    let json = a.to_json();
    assert_eq!(json, b.to_json());
    let back = Policy::from_json(&json).unwrap();
    assert_eq!(back, a);
}

#[test]
fn iteration_cap_is_reported() {
    let qp = load_qp("five_bus.json");
    let opts = ExploreOptions {
        iteration_cap: Some(3),
        ..Default::default()
    };
    let err = explore(&qp, &load_box(&qp), &opts).unwrap_err();
    assert!(matches!(err, Error::ExplorationCap { cap: 3, frontier } if frontier > 0));
}

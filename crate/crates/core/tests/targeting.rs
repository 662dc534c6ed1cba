mod common;

use common::load_qp;
use drt_core::mpqp::{build_policy, load_box, ExploreOptions, Policy};
use drt_core::qpcore::Polytope;
use drt_core::sced::SCEDQp;
use drt_core::targeting::{
    highest_lmp_nodes, oracle_targeting, solve_heuristic, solve_shifting, solve_targeting,
    solve_targeting_unscreened, subsets_up_to, Mode, RegionProblem, TargetingPlan, TargetingSpec,
};
use drt_core::Error;
use nalgebra::DVector;

fn policy(qp: &SCEDQp) -> Policy {
    build_policy(qp, &load_box(qp), &ExploreOptions::default()).unwrap()
}

/// λ* 10% below the current averaged LMP, w = 1.1, x̄ = 0.3·l0.
fn default_spec(p: &Policy, k: usize, mode: Mode) -> TargetingSpec {
    let l0 = p.qp.case.base_load.clone();
    let avg = p.qp.dispatch(&l0).unwrap().lambda.mean();
    let n = l0.len();
    TargetingSpec {
        lambda_ref: 0.9 * avg,
        k,
        weight: DVector::from_element(n, 1.1),
        xbar: &l0 * 0.3,
        l0,
        mode,
        shift_linear_term: false,
    }
}

fn check_plan(p: &Policy, spec: &TargetingSpec, plan: &TargetingPlan) {
    let n = spec.n();
    let targeted = plan.v.iter().filter(|&&v| v == 1).count();
    assert!(targeted <= spec.k);
    for i in 0..n {
        if plan.x[i] != 0.0 {
            assert_eq!(plan.v[i], 1);
        }
        assert!(plan.x[i].abs() <= spec.xbar[i] + 1e-9);
        if spec.mode == Mode::Reduce {
            assert!(plan.x[i] >= -1e-12);
        }
    }
    let l_hat = DVector::from_vec(plan.l_hat.clone());
    assert!(p.regions[plan.region].region.contains(&l_hat, 1e-9));
    let lmp = p.regions[plan.region].piece.lmp_at(&l_hat);
    assert!((lmp.mean() - plan.avg_lmp_after).abs() < 1e-9);
    if spec.mode == Mode::Shift {
        assert!(plan.x.iter().sum::<f64>().abs() < 1e-9);
    }
}

const TARGET_FIXTURES: [&str; 4] = [
    "three_bus_congested.json",
    "five_bus.json",
    "three_bus_ring.json",
    "onebus.json",
];

#[test]
fn matches_exhaustive_oracle() {
    for name in TARGET_FIXTURES {
        let qp = load_qp(name);
        let p = policy(&qp);
        for k in 1..=2.min(qp.n_nodes()) {
            let spec = default_spec(&p, k, Mode::Reduce);
            let plan = solve_targeting(&p, &spec).unwrap();
            let oracle = oracle_targeting(&p, &spec).unwrap();
            check_plan(&p, &spec, &plan);
            assert!(
                (plan.objective - oracle.objective).abs() <= 1e-6,
                "{name} K={k}: {} vs oracle {}",
                plan.objective,
                oracle.objective
            );
            if name == "three_bus_congested.json" {
                assert_eq!(plan.targeted(), oracle.targeted(), "{name} K={k}");
            }
        }
    }
}

#[test]
fn beats_highest_lmp_heuristic() {
    for name in ["three_bus_congested.json", "five_bus.json"] {
        let qp = load_qp(name);
        let p = policy(&qp);
        for k in 1..=2 {
            let spec = default_spec(&p, k, Mode::Reduce);
            let plan = solve_targeting(&p, &spec).unwrap();
            let heur = solve_heuristic(&p, &spec).unwrap();
            assert!(heur.objective >= plan.objective - 1e-9, "{name} K={k}");
            if name == "three_bus_congested.json" && k == 1 {
                assert!(
                    heur.objective > plan.objective + 1e-6,
                    "{} vs {}",
                    heur.objective,
                    plan.objective
                );
                assert_ne!(heur.targeted(), plan.targeted());
            }
        }
    }
}

#[test]
fn heuristic_picks_highest_prices() {
    let qp = load_qp("three_bus_congested.json");
    let p = policy(&qp);
    let spec = default_spec(&p, 1, Mode::Reduce);
    let lambda = qp.dispatch(&spec.l0).unwrap().lambda;
    let top = highest_lmp_nodes(&p, &spec).unwrap();
    assert_eq!(top.len(), 1);
    assert_eq!(lambda[top[0]], lambda.max());
}

#[test]
fn screening_changes_work_not_answers() {
    let mut any_screened = false;
    for name in TARGET_FIXTURES {
        let qp = load_qp(name);
        let p = policy(&qp);
        for k in 1..=2.min(qp.n_nodes()) {
            let spec = default_spec(&p, k, Mode::Reduce);
            let screened = solve_targeting(&p, &spec).unwrap();
            let full = solve_targeting_unscreened(&p, &spec).unwrap();
            assert!((screened.objective - full.objective).abs() <= 1e-9);
            assert_eq!(screened.x, full.x);
            assert_eq!(full.stats.miqps_solved, p.n_regions());
            if screened.stats.regions_screened_out > 0 {
                any_screened = true;
                assert!(screened.stats.miqps_solved < full.stats.miqps_solved);
            }
        }
    }
    assert!(any_screened, "no fixture exercised the screen");
}

#[test]
fn relaxation_infeasible_implies_miqp_infeasible() {
    for name in TARGET_FIXTURES {
        let qp = load_qp(name);
        let p = policy(&qp);
        let spec = default_spec(&p, 1, Mode::Reduce);
        for cr in &p.regions {
            let rp = RegionProblem::new(cr, &spec);
            if rp.relaxation().unwrap().is_none() {
                assert!(rp.miqp().unwrap().0.is_none());
            }
        }
    }
}

#[test]
fn objective_non_increasing_in_k() {
    for name in ["three_bus_congested.json", "five_bus.json"] {
        let qp = load_qp(name);
        let p = policy(&qp);
        let mut last = f64::INFINITY;
        for k in 0..=qp.n_nodes() {
            let plan = solve_targeting(&p, &default_spec(&p, k, Mode::Reduce)).unwrap();
            assert!(plan.objective <= last + 1e-9, "{name} K={k}");
            last = plan.objective;
        }
    }
}

#[test]
fn already_at_target_needs_no_reduction() {
    let qp = load_qp("five_bus.json");
    let p = policy(&qp);
    let mut spec = default_spec(&p, 2, Mode::Reduce);
    spec.lambda_ref = qp.dispatch(&spec.l0).unwrap().lambda.mean();
    spec.weight.fill(0.0);
    let plan = solve_targeting(&p, &spec).unwrap();
    assert!(plan.objective.abs() < 1e-9);
    assert!(plan.x.iter().all(|&x| x == 0.0));
}

#[test]
fn zero_k_keeps_load() {
    let qp = load_qp("three_bus_congested.json");
    let p = policy(&qp);
    let spec = default_spec(&p, 0, Mode::Reduce);
    let plan = solve_targeting(&p, &spec).unwrap();
    assert!(plan.x.iter().all(|&x| x == 0.0));
    let oracle = oracle_targeting(&p, &spec).unwrap();
    assert!((oracle.objective - plan.objective).abs() < 1e-9);
    assert!(oracle.x.iter().all(|&x| x == 0.0));
}

#[test]
fn full_cardinality_can_hit_target_exactly() {
    let qp = load_qp("three_bus_congested.json");
    let p = policy(&qp);
    let mut spec = default_spec(&p, 3, Mode::Reduce);
    spec.weight.fill(0.0);
    spec.lambda_ref = qp.dispatch(&spec.l0).unwrap().lambda.mean() - 0.5;
    let plan = solve_targeting(&p, &spec).unwrap();
    assert!(plan.objective < 1e-9, "{}", plan.objective);
    assert!((plan.avg_lmp_after - spec.lambda_ref).abs() < 1e-6);
}

#[test]
fn unreachable_regions_are_dr_infeasible() {
    // l0 beyond total capacity lies in no region; with x̄ = 0 nothing can
    // move it into one
    let qp = load_qp("onebus.json");
    let p = build_policy(
        &qp,
        &Polytope::from_box(
            &DVector::from_vec(vec![0.0]),
            &DVector::from_vec(vec![12.0]),
        ),
        &ExploreOptions::default(),
    )
    .unwrap();
    let mut spec = TargetingSpec {
        lambda_ref: 0.0,
        k: 1,
        weight: DVector::from_element(1, 1.0),
        xbar: DVector::from_element(1, 0.0),
        l0: DVector::from_element(1, 11.5),
        mode: Mode::Reduce,
        shift_linear_term: false,
    };
    assert!(matches!(
        solve_targeting(&p, &spec),
        Err(Error::DrInfeasible)
    ));
    spec.xbar[0] = 3.0;
    let plan = solve_targeting(&p, &spec).unwrap();
    assert!(plan.l_hat[0] <= 11.0 + 1e-9);
}

#[test]
fn onebus_relaxation_matches_closed_form() {
    let qp = load_qp("onebus.json");
    let p = policy(&qp);
    // second segment: λ(l) = l + 1 on [1, 11]
    let w = 0.5;
    let spec = TargetingSpec {
        lambda_ref: 4.0,
        k: 1,
        weight: DVector::from_element(1, w),
        xbar: DVector::from_element(1, 5.0),
        l0: DVector::from_element(1, 8.0),
        mode: Mode::Reduce,
        shift_linear_term: false,
    };
    let rp = RegionProblem::new(&p.regions[1], &spec);
    let relaxed = rp.relaxation().unwrap().unwrap();
    // minimize (l0 − x + 1 − λ*)² + w·x  ⇒  x = l0 + 1 − λ* − w/2
    let expected = 8.0 + 1.0 - 4.0 - w / 2.0;
    assert!((relaxed.x[0] - expected).abs() < 1e-9, "{}", relaxed.x[0]);
    let obj = (w / 2.0) * (w / 2.0) + w * expected;
    assert!((relaxed.objective - obj).abs() < 1e-9);
}

#[test]
fn unreachable_region_fails_relaxation() {
    let qp = load_qp("onebus.json");
    let p = policy(&qp);
    let spec = TargetingSpec {
        lambda_ref: 0.0,
        k: 1,
        weight: DVector::from_element(1, 1.0),
        xbar: DVector::from_element(1, 1.0),
        l0: DVector::from_element(1, 8.0),
        mode: Mode::Reduce,
        shift_linear_term: false,
    };
    // region 0 is [0, 1]; from l0 = 8 with x̄ = 1 it cannot be reached
    assert!(RegionProblem::new(&p.regions[0], &spec)
        .relaxation()
        .unwrap()
        .is_none());
}

#[test]
fn shifting_keeps_total_and_lowers_price() {
    let qp = load_qp("three_bus_congested.json");
    let p = policy(&qp);
    let spec = default_spec(&p, 2, Mode::Shift);
    let plan = solve_shifting(&p, &spec).unwrap();
    check_plan(&p, &spec, &plan);
    assert!(plan.avg_lmp_after < plan.avg_lmp_before - 1e-6);
    let oracle = oracle_targeting(&p, &spec).unwrap();
    assert!((plan.objective - oracle.objective).abs() < 1e-6);

    let mut last = plan.objective;
    for k in 3..=qp.n_nodes() {
        let next = solve_shifting(&p, &default_spec(&p, k, Mode::Shift)).unwrap();
        assert!(next.objective <= last + 1e-9);
        last = next.objective;
    }
}

#[test]
fn shifting_with_one_node_moves_nothing() {
    let qp = load_qp("three_bus_congested.json");
    let p = policy(&qp);
    let plan = solve_shifting(&p, &default_spec(&p, 1, Mode::Shift)).unwrap();
    assert!(plan.x.iter().all(|&x| x == 0.0));
}

#[test]
fn shifting_cannot_help_with_uniform_prices() {
    let qp = load_qp("three_bus_ring.json");
    let p = policy(&qp);
    let spec = default_spec(&p, 3, Mode::Shift);
    let plan = solve_shifting(&p, &spec).unwrap();
    assert!((plan.avg_lmp_after - plan.avg_lmp_before).abs() < 1e-6);
    assert!(matches!(
        solve_shifting(&p, &default_spec(&p, 3, Mode::Reduce)),
        Err(Error::InvalidSpec { .. })
    ));
}

#[test]
fn subset_count_is_binomial_sum() {
    assert_eq!(subsets_up_to(5, 2).len(), 1 + 5 + 10);
    assert_eq!(subsets_up_to(10, 3).len(), 1 + 10 + 45 + 120);
    assert_eq!(subsets_up_to(3, 0), vec![Vec::<usize>::new()]);
}

#[test]
fn oracle_size_guard_and_spec_validation() {
    let qp = load_qp("five_bus.json");
    let p = policy(&qp);
    let spec = default_spec(&p, 4, Mode::Reduce);
    assert!(matches!(
        oracle_targeting(&p, &spec),
        Err(Error::OracleTooLarge(_))
    ));
    let mut bad = default_spec(&p, 1, Mode::Reduce);
    bad.xbar[0] = bad.l0[0] + 1.0;
    assert!(matches!(
        solve_targeting(&p, &bad),
        Err(Error::InvalidSpec { .. })
    ));
    let mut bad = default_spec(&p, 9, Mode::Reduce);
    bad.k = 9;
    assert!(matches!(
        solve_targeting(&p, &bad),
        Err(Error::InvalidSpec { .. })
    ));
}

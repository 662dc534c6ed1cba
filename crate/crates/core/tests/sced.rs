mod common;

use common::{feasible_samples, load_qp};
use drt_core::netmodel::{build_shift_factors, NetworkCase};
use drt_core::sced::assemble;
use nalgebra::DVector;

#[test]
fn lmps_match_finite_differences_of_cost() {
    let qp = load_qp("three_bus_congested.json");
    let h = 1e-3;
    let mut checked = 0;
    for l in feasible_samples(&qp, 20, 11) {
        let base = qp.dispatch(&l).unwrap();
        for i in 0..qp.n_nodes() {
            let mut up = l.clone();
            up[i] += h;
            let mut down = l.clone();
            down[i] -= h;
            let (Ok(ru), Ok(rd)) = (qp.dispatch(&up), qp.dispatch(&down)) else {
                continue;
            };
            if ru.active_set != base.active_set || rd.active_set != base.active_set {
                continue;
            }
            let fd = (ru.cost - rd.cost) / (2.0 * h);
            assert!(
                (fd - base.lambda[i]).abs() < 1e-4,
                "node {i} at {l}: fd {fd} vs lmp {}",
                base.lambda[i]
            );
            checked += 1;
        }
    }
    assert!(checked >= 30, "only {checked} derivatives checked");
}

#[test]
fn lmp_formula_recomputed_from_duals() {
    let qp = load_qp("three_bus_congested.json");
    let r = qp.dispatch(&qp.case.base_load.clone()).unwrap();
    assert!(!r.binding_lines.is_empty());
    let spread = r.lambda.max() - r.lambda.min();
    assert!(
        spread > 1.0,
        "congestion should separate prices: {}",
        r.lambda
    );
    let recomputed =
        DVector::from_element(3, r.gamma) - qp.h.transpose() * (&r.mu_upper - &r.mu_lower);
    assert_eq!(recomputed, r.lambda);
    assert!((r.generation.sum() - r.load.sum()).abs() < 1e-6);
    assert!(r.solution.kkt_residuals(&qp.qp_at(&r.load).unwrap()).max() < 1e-7);
}

#[test]
fn uncongested_network_has_uniform_prices() {
    let qp = load_qp("three_bus_congested.json");
    let mut file = qp.case.to_case_file();
    for line in &mut file.lines {
        line.limit *= 100.0;
    }
    let case = NetworkCase::from_file(&file, Default::default()).unwrap();
    let wide = assemble(&case, &build_shift_factors(&case).unwrap()).unwrap();
    for l in feasible_samples(&wide, 20, 5) {
        let r = wide.dispatch(&l).unwrap();
        assert!(r.binding_lines.is_empty());
        assert!(r.lambda.max() - r.lambda.min() < 1e-6, "{}", r.lambda);
    }
}

#[test]
fn reducing_load_can_raise_average_price() {
    let qp = load_qp("three_bus_congested.json");
    let l0 = qp.case.base_load.clone();
    let avg = |l: &DVector<f64>| qp.dispatch(l).unwrap().lambda.mean();
    let before = avg(&l0);
    let found = (0..qp.n_nodes()).any(|k| {
        [1.0, 2.0, 5.0].iter().any(|&delta| {
            let mut l = l0.clone();
            l[k] -= delta;
            avg(&l) > before + 1e-9
        })
    });
    assert!(found, "no node reduction raised the averaged LMP");
}

#[test]
fn dispatch_kkt_holds_on_random_loads() {
    for name in ["three_bus_congested.json", "five_bus.json", "onebus.json"] {
        let qp = load_qp(name);
        for l in feasible_samples(&qp, 30, 3) {
            let r = qp.dispatch(&l).unwrap();
            let res = r.solution.kkt_residuals(&qp.qp_at(&l).unwrap());
            assert!(
                res.stationarity < 1e-7 && res.complementarity < 1e-7 && res.dual < 1e-9,
                "{name}: {res:?}"
            );
            assert!((r.generation.sum() - l.sum()).abs() < 1e-6);
        }
    }
}

mod common;

use common::{fixture, rng};
use drt_core::netmodel::{build_shift_factors, load_case, CaseFile, CaseOptions, NetworkCase};
use nalgebra::DVector;
use rand::Rng;

const CASES: [&str; 4] = [
    "three_bus_ring.json",
    "three_bus_congested.json",
    "five_bus.json",
    "onebus.json",
];

fn case_file(name: &str) -> CaseFile {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

fn balanced(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = rng(seed);
    let mut p = DVector::from_fn(n, |_, _| rng.random_range(-50.0..50.0));
    let mean = p.mean();
    p.add_scalar_mut(-mean);
    p
}

#[test]
fn flows_satisfy_kirchhoff_current_law() {
    for name in CASES {
        let case = load_case(fixture(name)).unwrap();
        let h = build_shift_factors(&case).unwrap();
        let p = balanced(case.n_nodes(), 3);
        let f = h.flows(&p);
        let mut net = DVector::zeros(case.n_nodes());
        for (e, line) in case.lines.iter().enumerate() {
            net[line.from] += f[e];
            net[line.to] -= f[e];
        }
        assert!((net - &p).amax() < 1e-9, "{name}");
    }
}

#[test]
fn slack_column_is_zero() {
    for name in CASES {
        let case = load_case(fixture(name)).unwrap();
        let h = build_shift_factors(&case).unwrap().h;
        assert!(h.column(case.slack).iter().all(|&v| v == 0.0), "{name}");
    }
}

#[test]
fn balanced_flows_do_not_depend_on_slack() {
    for name in ["three_bus_ring.json", "five_bus.json"] {
        let file = case_file(name);
        let base = NetworkCase::from_file(&file, CaseOptions::default()).unwrap();
        let p = balanced(base.n_nodes(), 5);
        let reference = build_shift_factors(&base).unwrap().flows(&p);
        for slack in &file.nodes {
            let mut moved = file.clone();
            moved.slack = slack.clone();
            let case = NetworkCase::from_file(&moved, CaseOptions::default()).unwrap();
            let f = build_shift_factors(&case).unwrap().flows(&p);
            assert!((f - &reference).amax() < 1e-9, "{name} slack {slack}");
        }
    }
}

#[test]
fn node_permutation_permutes_columns_exactly() {
    let file = case_file("five_bus.json");
    let base = NetworkCase::from_file(&file, CaseOptions::default()).unwrap();
    let h = build_shift_factors(&base).unwrap().h;
    let mut permuted = file.clone();
    permuted.nodes.reverse();
    let case = NetworkCase::from_file(&permuted, CaseOptions::default()).unwrap();
    let hp = build_shift_factors(&case).unwrap().h;
    for (j, id) in case.nodes.iter().enumerate() {
        let i = base.node_index(id).unwrap();
        assert_eq!(hp.column(j), h.column(i), "{id}");
    }
}

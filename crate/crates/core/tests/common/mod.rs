#![allow(dead_code)]

use std::path::PathBuf;

use drt_core::mpqp::Policy;
use drt_core::netmodel::{build_shift_factors, load_case};
use drt_core::sced::{assemble, SCEDQp};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load_qp(name: &str) -> SCEDQp {
    let case = load_case(fixture(name)).unwrap();
    assemble(&case, &build_shift_factors(&case).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_in_box(qp: &SCEDQp, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let lo = &qp.case.load_lo;
    let hi = &qp.case.load_hi;
    DVector::from_fn(lo.len(), |i, _| {
        lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()
    })
}

/// Up to `count` box samples with feasible dispatch.
pub fn feasible_samples(qp: &SCEDQp, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    let mut draws = 0;
    while out.len() < count && draws < 100 * count {
        draws += 1;
        let l = uniform_in_box(qp, &mut rng);
        if qp.dispatch(&l).is_ok() {
            out.push(l);
        }
    }
    out
}

/// Distance from `l` to the nearest facet hyperplane of any region.
pub fn facet_distance(policy: &Policy, l: &DVector<f64>) -> f64 {
    policy
        .regions
        .iter()
        .flat_map(|r| {
            let p = &r.region;
            (0..p.n_rows()).map(move |i| {
                let row = p.row(i);
                ((row.clone() * l)[0] - p.r_vec[i]).abs() / row.norm()
            })
        })
        .fold(f64::INFINITY, f64::min)
}

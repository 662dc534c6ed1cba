//! Sampled comparison of a policy against direct dispatch.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::Policy;
use crate::error::{Error, Result};

/// Largest LMP discrepancy accepted as a match.
pub const COVERAGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Dispatch-feasible samples compared.
    pub samples: usize,
    /// Box draws rejected because dispatch was infeasible.
    pub rejected: usize,
    pub matched: usize,
    pub uncovered: usize,
    /// Largest `‖evaluate(l) − dispatch(l).λ‖∞` over covered samples.
    pub max_error: f64,
}

impl CoverageReport {
    pub fn all_matched(&self) -> bool {
        self.matched == self.samples
    }
}

/// Draws uniform points of the case's load box until `count` of them have a
/// feasible dispatch (or `100·count` draws are spent) and compares the
/// policy's LMPs with the dispatch LMPs at each.
pub fn coverage_check(policy: &Policy, count: usize, seed: u64) -> Result<CoverageReport> {
    let lo = &policy.qp.case.load_lo;
    let hi = &policy.qp.case.load_hi;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CoverageReport {
        samples: 0,
        rejected: 0,
        matched: 0,
        uncovered: 0,
        max_error: 0.0,
    };
    let mut draws = 0;
    while report.samples < count && draws < 100 * count {
        draws += 1;
        let l = DVector::from_fn(lo.len(), |i, _| {
            lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()
        });
        if !policy.load_set.contains(&l, 0.0) {
            continue;
        }
        let dispatch = match policy.qp.dispatch(&l) {
            Ok(d) => d,
            Err(Error::DispatchInfeasible) => {
                report.rejected += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        report.samples += 1;
        match policy.evaluate(&l) {
            Ok(eval) => {
                let err = (&eval.lambda - &dispatch.lambda).amax();
                report.max_error = report.max_error.max(err);
                if err <= COVERAGE_TOL {
                    report.matched += 1;
                }
            }
            Err(Error::Uncovered { .. }) => report.uncovered += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

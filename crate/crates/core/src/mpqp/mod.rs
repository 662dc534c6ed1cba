//! Piecewise-affine LMP policies over the load space.

pub mod coverage;
pub mod explore;
pub mod policy;
pub mod region;
pub mod sensitivity;
pub mod unify;

pub use coverage::{coverage_check, CoverageReport, COVERAGE_TOL};
pub use explore::{explore, find_feasible_load, partition_complement, ExploreOptions};
pub use policy::{Evaluation, Policy, PolicyFile, PolicyMeta};
pub use region::{build_region, CriticalRegion, MIN_RADIUS};
pub use sensitivity::{sensitivity, AffinePiece};
pub use unify::unify;

use crate::error::Result;
use crate::qpcore::Polytope;
use crate::sced::SCEDQp;

/// The case's load box as a polytope.
pub fn load_box(qp: &SCEDQp) -> Polytope {
    Polytope::from_box(&qp.case.load_lo, &qp.case.load_hi)
}

/// Explores `load_set` and unifies the result.
pub fn build_policy(qp: &SCEDQp, load_set: &Polytope, opts: &ExploreOptions) -> Result<Policy> {
    Ok(unify(&explore(qp, load_set, opts)?))
}

//! Merging regions that share the same affine solution.

use super::explore::partition_complement;
use super::policy::Policy;
use super::region::CriticalRegion;
use super::sensitivity::AffinePiece;
use crate::qpcore::polytope::FEAS_TOL;
use crate::qpcore::Polytope;

/// Maps agreeing within this tolerance count as the same solution.
pub const MAP_TOL: f64 = 1e-8;

fn same_maps(a: &AffinePiece, b: &AffinePiece) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= MAP_TOL * (1.0 + x.abs().max(y.abs()));
    let intercept = |p: &AffinePiece| &p.p0 - &p.jac_p * &p.base_point;
    a.f.iter().zip(b.f.iter()).all(|(x, y)| close(*x, *y))
        && a.g.iter().zip(b.g.iter()).all(|(x, y)| close(*x, *y))
        && a.jac_p
            .iter()
            .zip(b.jac_p.iter())
            .all(|(x, y)| close(*x, *y))
        && intercept(a)
            .iter()
            .zip(intercept(b).iter())
            .all(|(x, y)| close(*x, *y))
}

/// Rows of `p` that every point of `q` satisfies.
fn rows_valid_for(p: &Polytope, q: &Polytope) -> Vec<usize> {
    (0..p.n_rows())
        .filter(|&i| matches!(q.support(&p.row(i)), Some(v) if v <= p.r_vec[i] + FEAS_TOL))
        .collect()
}

/// The union of `a` and `b` as a single polytope, if it is convex.
///
/// The candidate is the envelope: rows of either set that hold on the
/// other. The union is convex exactly when the envelope minus `a` lies
/// inside `b`.
pub fn convex_union(a: &Polytope, b: &Polytope, min_radius: f64) -> Option<Polytope> {
    let mut env = a.select_rows(&rows_valid_for(a, b));
    let from_b = b.select_rows(&rows_valid_for(b, a));
    env = env.intersect(&from_b);
    // an envelope with no rows would be unbounded; regions live in a bounded
    // load set, so that only happens for degenerate input
    if env.n_rows() == 0 {
        return None;
    }
    let rest = partition_complement(std::slice::from_ref(&env), a, min_radius);
    if rest.iter().all(|piece| piece.is_subset_of(b)) {
        env.minimize_representation().ok()
    } else {
        None
    }
}

fn merge_once(regions: &mut Vec<CriticalRegion>, min_radius: f64) -> bool {
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            if !same_maps(&regions[i].piece, &regions[j].piece) {
                continue;
            }
            if let Some(union) = convex_union(&regions[i].region, &regions[j].region, min_radius) {
                regions[i].region = union;
                regions.remove(j);
                return true;
            }
        }
    }
    false
}

/// Repeatedly merges pairs of regions with equal LMP and generation maps
/// whose union is convex. The lower-indexed region keeps its piece.
pub fn unify(policy: &Policy) -> Policy {
    let mut regions = policy.regions.clone();
    let before = regions.len();
    while merge_once(&mut regions, policy.meta.min_radius) {}
    let mut meta = policy.meta.clone();
    meta.regions_before_unify = Some(meta.regions_before_unify.unwrap_or(before));
    Policy::new(policy.qp.clone(), policy.load_set.clone(), regions, meta)
}

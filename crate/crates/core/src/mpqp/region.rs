//! Critical regions: the loads over which one active set stays optimal.

use nalgebra::{DMatrix, DVector};

use super::sensitivity::AffinePiece;
use crate::error::{Error, Result};
use crate::qpcore::Polytope;
use crate::sced::SCEDQp;

/// Regions with a smaller Chebyshev radius are treated as lower-dimensional.
pub const MIN_RADIUS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRegion {
    pub piece: AffinePiece,
    pub region: Polytope,
}

impl CriticalRegion {
    pub fn contains(&self, l: &DVector<f64>, tol: f64) -> bool {
        self.region.contains(l, tol)
    }
}

/// Rows over `l` that keep the piece optimal, before intersecting with the
/// load set: inactive inequalities stay satisfied along `P(l)`, and duals of
/// active inequalities stay nonnegative. Pinned generator bounds are always
/// tight and their dual sign carries no information, so they add no rows.
pub fn optimality_rows(piece: &AffinePiece, qp: &SCEDQp) -> Polytope {
    let n = qp.n_nodes();
    let a = qp.ineq_mat();
    let b_jac = qp.rhs_jacobian();
    let b_fixed = qp.ineq_rhs(&DVector::zeros(n));
    let p_offset = &piece.p0 - &piece.jac_p * &piece.base_point;
    let y_offset = &piece.y0 - &piece.jac_y * &piece.base_point;

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..qp.n_ineq() {
        if qp.pinned_pair(j).is_some() {
            continue;
        }
        if piece.active_set.binary_search(&j).is_ok() {
            // y_j(l) >= 0
            rows.push(-piece.jac_y.row(j));
            rhs.push(y_offset[j]);
        } else {
            // A_j P(l) <= b_j(l)
            let aj = a.row(j);
            rows.push(aj * &piece.jac_p - b_jac.row(j));
            rhs.push(b_fixed[j] - (aj * &p_offset)[0]);
        }
    }
    let mut r_mat = DMatrix::zeros(rows.len(), n);
    for (i, row) in rows.iter().enumerate() {
        r_mat.row_mut(i).copy_from(row);
    }
    Polytope::new(r_mat, DVector::from_vec(rhs))
}

/// The minimized critical region of `piece` inside `load_set`.
pub fn build_region(
    piece: AffinePiece,
    qp: &SCEDQp,
    load_set: &Polytope,
    min_radius: f64,
) -> Result<CriticalRegion> {
    let raw = optimality_rows(&piece, qp).intersect(load_set);
    let region = raw.minimize_representation().map_err(|e| match e {
        Error::EmptyPolytope => Error::RegionEmpty,
        e => e,
    })?;
    match region.chebyshev() {
        Some((_, radius)) if radius > min_radius => Ok(CriticalRegion { piece, region }),
        _ => Err(Error::RegionEmpty),
    }
}
